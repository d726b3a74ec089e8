#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cats/authority.hpp"
#include "cats/mobility.hpp"
#include "cats/vehicle.hpp"

namespace cats::sim {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ScenarioConfig {
  // Trace source: file, or the synthetic generator when trace_file is empty.
  std::string trace_file;
  mobility::SyntheticParams synthetic;

  double comm_range = 400.0;
  vehicle::PerceptionParams perception;

  // Misbehavior mix (percent of the fleet).
  double bad_sensor_pct = 0.0;
  double flipflop_pct = 0.0;
  Seconds flipflop_period = 60.0;

  sa::AuthorityParams authority;
  Seconds t_bbi = 1.0;
  Seconds message_freshness = 1.05;

  // Ablation switches. majority_view=false keeps voting only;
  // voting=false is the pure-majority-view variant.
  bool majority_view = true;
  bool voting = true;

  std::uint64_t seed = 1;
  Seconds duration = 600.0;
  int workers = 1;
  bool record_events = false;  // raw per-report log for recount oracles

  void validate() const;
};

// Flat key=value text, '#' comments. Unknown keys are errors.
ScenarioConfig parse_config(const std::string& text);
ScenarioConfig load_config(const std::string& path);

struct BanRecord {
  Uuid vid;
  Seconds ban_time = 0.0;
  Seconds first_bad_at = -1.0;  // <0: never broadcast bad data
  Seconds time_to_ban() const { return ban_time - first_bad_at; }
};

struct TimelinePoint {
  Seconds t = 0.0;
  Uuid vid;
  double score = 1.0;
  sa::TrustState state = sa::TrustState::Trusted;
  char flag = 'N';  // N/Y/R
};

struct ReportEvent {
  std::int64_t slot = 0;
  Uuid receiver;
  Uuid sender;
  std::uint64_t object_id = 0;
  bool bad = false;
  bool accepted = false;  // entered the receiver's control pipeline
};

struct MetricsReport {
  std::uint64_t bad_received = 0, bad_accepted = 0;
  std::uint64_t good_received = 0, good_dropped = 0;
  double fn_pct = 0.0;
  double fp_pct = 0.0;

  std::vector<BanRecord> bans;
  int misbehaving_total = 0;
  double mean_time_to_ban = 0.0;  // over banned misbehaving vehicles

  // Run-measured model inputs.
  double measured_p_false = 0.0;    // bad fraction of trusted senders' reports
  double measured_p_trusted = 0.0;  // trusted fraction of co-visible senders
  // Fraction of received bad reports whose sender still verified as
  // TrustedData — the misbehaving traffic that reaches control at all.
  double measured_bad_exposure = 0.0;
  double mean_covisible = 0.0;
  mobility::NeighborDistribution covis_dist;  // co-visible senders per (receiver, slot)
  // Trusted senders co-visible with the cluster, per fused report decision —
  // the n each majority-view accept/reject was taken under.
  mobility::NeighborDistribution decision_dist;
  // Trusted senders co-visible with a uniformly random claim location in a
  // heard sender's sensor disk — the n an arbitrary claim is judged under.
  mobility::NeighborDistribution claim_dist;

  std::vector<TimelinePoint> timelines;
  std::vector<ReportEvent> events;  // populated when record_events

  std::string metrics_csv() const;
  std::string events_csv() const;
  std::string timelines_csv() const;
};

MetricsReport run_scenario(const ScenarioConfig& config);

// Same run against a pre-generated trace (matched-seed ablations).
MetricsReport run_scenario(const ScenarioConfig& config, const mobility::Trace& trace);

// Recount oracle: metrics recomputed from the raw event log alone.
MetricsReport compute_metrics(const std::vector<ReportEvent>& events,
                              const std::vector<BanRecord>& bans, int misbehaving_total);

// Named variants: baseline, two_state, no_majority_view, majority_only,
// no_tide_scaling, nd1, nd3, tfw10, tfw20, tfw40, tfw80.
ScenarioConfig apply_variant(const ScenarioConfig& base, const std::string& variant);

struct AblationRow {
  std::string variant;
  std::uint64_t seed = 0;
  double fn_pct = 0.0;
  double fp_pct = 0.0;
  double mean_time_to_ban = 0.0;
  int bans = 0;
};

// Matched seeds across variants: one shared trace per seed.
std::vector<AblationRow> run_ablation(const ScenarioConfig& base,
                                      const std::vector<std::string>& variants,
                                      const std::vector<std::uint64_t>& seeds);
std::string ablation_csv(const std::vector<AblationRow>& rows);

// Mean FN/FP per variant over seeds.
struct AblationSummary {
  std::string variant;
  double fn_pct = 0.0;
  double fp_pct = 0.0;
};
std::vector<AblationSummary> summarize_ablation(const std::vector<AblationRow>& rows);

// Closed-population voting-only DoS experiment (§ collusion dynamics).
struct DosParams {
  int n_vehicles = 100;
  double colluder_pct = 20.0;
  Seconds duration = 200000.0;
  Seconds step = 20.0;
  std::uint64_t seed = 1;
  sa::AuthorityParams authority;
};

struct PopulationPoint {
  Seconds t = 0.0;
  double benign_active_pct = 0.0;
  double malicious_ready_pct = 0.0;
};

std::vector<PopulationPoint> dos_longrun(const DosParams& params);
std::string population_csv(const std::vector<PopulationPoint>& series);

// Tail-window averages used for steady-state comparisons.
PopulationPoint steady_state(const std::vector<PopulationPoint>& series, double tail_fraction);

}  // namespace cats::sim
