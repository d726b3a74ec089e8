#include "cats/tuner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "cats/authority.hpp"
#include "cats/riskmodel.hpp"

namespace cats::tune {

double percentile_nearest_rank(std::vector<double> samples, double pct) {
  if (samples.empty()) throw std::invalid_argument("percentile: no samples");
  if (pct <= 0.0 || pct > 100.0) throw std::invalid_argument("percentile: pct out of range");
  std::sort(samples.begin(), samples.end());
  auto rank = static_cast<std::size_t>(std::ceil(pct / 100.0 * static_cast<double>(samples.size())));
  return samples[rank - 1];
}

int recovery_votes_needed(double n_thresh, double score_min, double score_step) {
  if (score_step <= 0.0) throw std::invalid_argument("recovery_votes: step must be positive");
  // Smallest k with score_min + k*step past the demotion comparator —
  // computed against the same comparator the authority uses so the
  // tuner can never drift from the score dynamics.
  int k = static_cast<int>(std::floor((n_thresh - score_min) / score_step + 1e-9));
  while (sa::demotes(score_min + k * score_step, n_thresh)) ++k;
  while (k > 0 && !sa::demotes(score_min + (k - 1) * score_step, n_thresh)) --k;
  return k;
}

TiveResult tune_tive(const VoteTimingStats& stats, int recovery_votes) {
  if (stats.iavi_samples.size() < 100) throw std::invalid_argument("tune_tive: need >= 100 samples");
  if (stats.expected_daily_travel <= 0.0) throw std::invalid_argument("tune_tive: travel time");
  if (recovery_votes <= 0) throw std::invalid_argument("tune_tive: recovery votes");
  TiveResult r;
  r.p95_iavi = percentile_nearest_rank(stats.iavi_samples, 95.0);
  r.votes_per_day = stats.expected_daily_travel / r.p95_iavi;
  r.t_ive = static_cast<double>(recovery_votes) / r.votes_per_day * 86400.0;
  return r;
}

TideResult tune_tide_base(const mobility::NeighborDistribution& dist, double target_p_ds,
                          const std::function<double(Seconds)>& blocked_fraction, Seconds lo,
                          Seconds hi, int iterations) {
  if (!(target_p_ds > 0.0 && target_p_ds < 1.0)) throw std::invalid_argument("tune_tide: target");
  if (!(lo > 0.0 && hi > lo)) throw std::invalid_argument("tune_tide: bounds");
  TideResult result;
  auto probe = [&](Seconds t) {
    double frac = blocked_fraction(t);
    double pve = risk::p_ve(frac, 1.0);
    TideSearchPoint pt{t, pve, risk::p_ds(pve, dist)};
    result.trace.push_back(pt);
    return pt;
  };
  // p_ds is non-increasing in t_ide: keep the largest value still at or
  // above target.
  auto at_lo = probe(lo);
  if (at_lo.p_ds < target_p_ds) throw std::runtime_error("tune_tide: target unreachable at lo");
  Seconds best = lo;
  Seconds a = lo, b = hi;
  if (probe(hi).p_ds >= target_p_ds) {
    result.t_ide = hi;
    return result;
  }
  for (int i = 0; i < iterations; ++i) {
    Seconds mid = 0.5 * (a + b);
    if (probe(mid).p_ds >= target_p_ds) {
      best = mid;
      a = mid;
    } else {
      b = mid;
    }
  }
  result.t_ide = best;
  return result;
}

Seconds tune_tvote(Seconds t_bbi, const std::vector<double>& latency_samples) {
  if (t_bbi <= 0.0) throw std::invalid_argument("tune_tvote: t_bbi");
  return t_bbi + percentile_nearest_rank(latency_samples, 95.0);
}

Seconds tti_for(int ban_count, Seconds base, double multiplier) {
  if (ban_count < 0) throw std::invalid_argument("tti_for: ban_count");
  return base * std::pow(multiplier, ban_count);
}

TbbiResult derive_tbbi(double beacon_bytes, double channel_bps, int max_coresident) {
  if (beacon_bytes <= 0.0 || channel_bps <= 0.0 || max_coresident <= 0)
    throw std::invalid_argument("derive_tbbi: inputs must be positive");
  TbbiResult r;
  r.slots_per_second = channel_bps / (beacon_bytes * 8.0);
  r.max_rate_hz = r.slots_per_second / static_cast<double>(max_coresident);
  r.lo_hz = 1.0;
  r.hi_hz = std::max(1.0, std::min(4.0, std::floor(r.max_rate_hz)));
  r.recommended_hz = 1.0;
  return r;
}

namespace {

SweepRow mean_row(std::string label, const sim::ScenarioConfig& cfg,
                  const std::vector<std::uint64_t>& seeds) {
  SweepRow row{std::move(label), 0.0, 0.0};
  for (auto seed : seeds) {
    sim::ScenarioConfig c = cfg;
    c.seed = seed;
    c.synthetic.seed = seed;
    auto m = sim::run_scenario(c);
    row.fn_pct += m.fn_pct;
    row.fp_pct += m.fp_pct;
  }
  auto n = static_cast<double>(seeds.size());
  row.fn_pct /= n;
  row.fp_pct /= n;
  return row;
}

}  // namespace

std::vector<SweepRow> sweep_nthresh(const sim::ScenarioConfig& config,
                                    const std::vector<int>& nd_values,
                                    const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) throw std::invalid_argument("sweep: no seeds");
  std::vector<SweepRow> rows;
  for (int nd : nd_values) {
    if (nd < 1 || nd > 3) throw std::invalid_argument("sweep_nthresh: N_D must be in {1,2,3}");
    sim::ScenarioConfig c = config;
    c.authority.score_step = (1.0 - c.authority.n_thresh) / nd;
    rows.push_back(mean_row("nd" + std::to_string(nd), c, seeds));
  }
  return rows;
}

std::vector<SweepRow> sweep_tfw(const sim::ScenarioConfig& config,
                                const std::vector<Seconds>& tfw_values,
                                const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) throw std::invalid_argument("sweep: no seeds");
  std::vector<SweepRow> rows;
  for (Seconds tfw : tfw_values) {
    if (tfw <= 0.0) throw std::invalid_argument("sweep_tfw: T_FW must be positive");
    sim::ScenarioConfig c = config;
    c.authority.t_fw = tfw;
    char label[32];
    std::snprintf(label, sizeof label, "tfw%g", tfw);
    rows.push_back(mean_row(label, c, seeds));
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "variant,fn_pct,fp_pct\n";
  for (const auto& r : rows) {
    char line[128];
    std::snprintf(line, sizeof line, "%s,%.10g,%.10g\n", r.label.c_str(), r.fn_pct, r.fp_pct);
    out += line;
  }
  return out;
}

}  // namespace cats::tune
