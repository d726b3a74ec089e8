#pragma once

#include <string>
#include <vector>

#include "cats/mobility.hpp"
#include "cats/report.hpp"

namespace cats::risk {

constexpr Seconds kTenYears = 10.0 * 365.0 * 24.0 * 3600.0;

struct FailureRates {
  double lidar_10yr = 0.1;
  // Aggregate software/GPS/camera/radar failure rate over the same
  // period; 0.352 reproduces the published P_OC of 2.79e-7.
  double other_components_10yr = 0.352;
  Seconds t_f = 250.0;  // trusted-while-faulty duration
  Seconds lifespan = kTenYears;
};

double p_fs(const FailureRates& rates);
double p_oc(const FailureRates& rates);
double p_false(const FailureRates& rates);

// Probability that a strict majority of m trusted senders is wrong.
// Stable down to p ~ 1e-9 (log-space terms).
double p_wd_trusted(int m, double p_false);

struct RiskParams {
  double p_false = 3.59e-7;
  double p_trusted = 0.9993;
  int min_trusted = 1;  // T
  mobility::NeighborDistribution neighbor_dist;
};

// Wrong fused decision with n total neighbors (trusted-count marginalized).
double p_wd_all(int n, const RiskParams& params);

// Proportion of time a vehicle is untrusted while recovering.
double p_untrusted(double failure_10yr_total, double recert_days, double lifespan_days);

// Neighbor-count average of p_wd_all, from n = T.
double avg_p_wd(const RiskParams& params);

// Usable-data availability with n neighbors, and its average from n = 1.
double availability(int n, const RiskParams& params);
double avg_availability(const RiskParams& params);

// Voting eligibility and downvote-success probability.
double p_ve(double c_d, double c_t);
double p_ds(double p_ve, const mobility::NeighborDistribution& dist);

struct ModelComparisonRow {
  std::string cell;
  double fn_sim_pct = 0.0;
  double fn_model_pct = 0.0;
  bool model_conservative = false;  // model >= experiment
};

// Pair one simulated cell with the model's FN prediction under
// run-measured parameters. `bad_exposure` is the measured fraction of
// misbehaving traffic that still verifies as trusted when received (the
// rest never reaches a fused decision); 1.0 is the conservative default.
ModelComparisonRow compare_cell(const std::string& cell, double fn_sim_pct,
                                const RiskParams& params, double bad_exposure = 1.0);

std::string comparison_csv(const std::vector<ModelComparisonRow>& rows);

// Curve exports for the CLI.
std::string pwd_vs_n_csv(const RiskParams& params, int max_n);
std::string pwd_vs_pfalse_csv(RiskParams params, const std::vector<double>& pfalse_values);
std::string availability_tradeoff_csv(RiskParams params, const std::vector<int>& t_values);

}  // namespace cats::risk
