#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cats/mobility.hpp"
#include "cats/report.hpp"
#include "cats/simulator.hpp"

namespace cats::tune {

// Nearest-rank percentile on a copy of the samples. pct in (0, 100].
double percentile_nearest_rank(std::vector<double> samples, double pct);

struct VoteTimingStats {
  std::vector<double> iavi_samples;      // inter-accepted-vote intervals, seconds
  Seconds expected_daily_travel = 0.0;   // seconds of driving per day
};

struct TiveResult {
  double p95_iavi = 0.0;
  double votes_per_day = 0.0;
  Seconds t_ive = 0.0;
};

// Upvotes needed to climb from score_min back over n_thresh.
int recovery_votes_needed(double n_thresh, double score_min, double score_step);

TiveResult tune_tive(const VoteTimingStats& stats, int recovery_votes);

struct TideSearchPoint {
  Seconds t_ide = 0.0;
  double p_ve = 0.0;
  double p_ds = 0.0;
};

struct TideResult {
  Seconds t_ide = 0.0;  // largest candidate still meeting the target
  std::vector<TideSearchPoint> trace;
};

// Binary search over [lo, hi]. blocked_fraction(t_ide) returns the
// measured C_d/C_t for that candidate (fraction of observed vehicles
// whose downvote budget is spent within t_ide); p_ve = 1 - C_d/C_t, so
// larger t_ide means smaller p_ve and smaller p_ds.
TideResult tune_tide_base(const mobility::NeighborDistribution& dist, double target_p_ds,
                          const std::function<double(Seconds)>& blocked_fraction, Seconds lo,
                          Seconds hi, int iterations = 40);

Seconds tune_tvote(Seconds t_bbi, const std::vector<double>& latency_samples);

Seconds tti_for(int ban_count, Seconds base, double multiplier);

struct TbbiResult {
  double slots_per_second = 0.0;
  double max_rate_hz = 0.0;
  double lo_hz = 1.0;
  double hi_hz = 1.0;
  double recommended_hz = 1.0;
};

TbbiResult derive_tbbi(double beacon_bytes, double channel_bps, int max_coresident);

struct SweepRow {
  std::string label;
  double fn_pct = 0.0;
  double fp_pct = 0.0;
};

// Matched-seed simulation sweeps; means over `seeds`.
std::vector<SweepRow> sweep_nthresh(const sim::ScenarioConfig& config,
                                    const std::vector<int>& nd_values,
                                    const std::vector<std::uint64_t>& seeds);
std::vector<SweepRow> sweep_tfw(const sim::ScenarioConfig& config,
                                const std::vector<Seconds>& tfw_values,
                                const std::vector<std::uint64_t>& seeds);
std::string sweep_csv(const std::vector<SweepRow>& rows);

}  // namespace cats::tune
