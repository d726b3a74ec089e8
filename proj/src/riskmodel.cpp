#include "cats/riskmodel.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace cats::risk {

namespace {

double lchoose(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

// C(n,k) p^k (1-p)^(n-k) in log space; safe for p down to ~1e-300.
double binom_term(int n, int k, double p) {
  if (p <= 0.0) return k == 0 ? 1.0 : 0.0;
  if (p >= 1.0) return k == n ? 1.0 : 0.0;
  return std::exp(lchoose(n, k) + k * std::log(p) + (n - k) * std::log1p(-p));
}

void check_prob(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument(std::string(what) + " not in [0,1]");
}

}  // namespace

double p_fs(const FailureRates& rates) {
  return rates.lidar_10yr * rates.t_f / rates.lifespan;
}

double p_oc(const FailureRates& rates) {
  return rates.other_components_10yr * rates.t_f / rates.lifespan;
}

double p_false(const FailureRates& rates) { return p_fs(rates) + p_oc(rates); }

double p_wd_trusted(int m, double p_false) {
  check_prob(p_false, "p_false");
  if (m < 1) return 0.0;
  int k_min = m / 2 + 1;  // floor(m/2 + 1)
  double sum = 0.0;
  for (int k = k_min; k <= m; ++k) sum += binom_term(m, k, p_false);
  return std::min(sum, 1.0);
}

double p_wd_all(int n, const RiskParams& params) {
  check_prob(params.p_trusted, "p_trusted");
  double sum = 0.0;
  for (int m = params.min_trusted; m <= n; ++m)
    sum += binom_term(n, m, params.p_trusted) * p_wd_trusted(m, params.p_false);
  return std::min(sum, 1.0);
}

double p_untrusted(double failure_10yr_total, double recert_days, double lifespan_days) {
  if (failure_10yr_total < 0.0 || recert_days < 0.0 || lifespan_days <= 0.0)
    throw std::invalid_argument("p_untrusted inputs");
  return failure_10yr_total * recert_days / lifespan_days;
}

double avg_p_wd(const RiskParams& params) {
  double sum = 0.0;
  for (int n = params.min_trusted; n < static_cast<int>(params.neighbor_dist.p.size()); ++n)
    sum += params.neighbor_dist.p[n] * p_wd_all(n, params);
  return sum;
}

double availability(int n, const RiskParams& params) {
  check_prob(params.p_trusted, "p_trusted");
  double sum = 0.0;
  for (int m = params.min_trusted; m <= n; ++m)
    sum += binom_term(n, m, params.p_trusted) * p_wd_trusted(m, 1.0 - params.p_false);
  return std::min(sum, 1.0);
}

double avg_availability(const RiskParams& params) {
  double sum = 0.0;
  for (int n = 1; n < static_cast<int>(params.neighbor_dist.p.size()); ++n)
    sum += params.neighbor_dist.p[n] * availability(n, params);
  return sum;
}

double p_ve(double c_d, double c_t) {
  if (c_t <= 0.0 || c_d < 0.0 || c_d > c_t) throw std::invalid_argument("p_ve inputs");
  return 1.0 - c_d / c_t;
}

double p_ds(double p_ve, const mobility::NeighborDistribution& dist) {
  check_prob(p_ve, "p_ve");
  double sum = 0.0;
  for (std::size_t n = 0; n < dist.p.size(); ++n)
    sum += dist.p[n] * (1.0 - std::pow(1.0 - p_ve, static_cast<double>(n)));
  return sum;
}

ModelComparisonRow compare_cell(const std::string& cell, double fn_sim_pct,
                                const RiskParams& params, double bad_exposure) {
  ModelComparisonRow row;
  row.cell = cell;
  row.fn_sim_pct = fn_sim_pct;
  // Decisions taken with fewer than T trusted co-visible senders have no
  // majority to lean on; the model charges them as wrong outright (upper
  // bound) on top of the Eq. (6) average over the quorate cases.
  double sparse = 0.0;
  for (int n = 0; n < params.min_trusted && n < static_cast<int>(params.neighbor_dist.p.size());
       ++n)
    sparse += params.neighbor_dist.p[n];
  row.fn_model_pct = 100.0 * bad_exposure * std::min(1.0, sparse + avg_p_wd(params));
  row.model_conservative = row.fn_model_pct >= fn_sim_pct;
  return row;
}

std::string comparison_csv(const std::vector<ModelComparisonRow>& rows) {
  std::ostringstream out;
  out << "cell,fn_sim_pct,fn_model_pct,model_conservative\n";
  for (const auto& r : rows)
    out << r.cell << ',' << r.fn_sim_pct << ',' << r.fn_model_pct << ','
        << (r.model_conservative ? 1 : 0) << '\n';
  return out.str();
}

std::string pwd_vs_n_csv(const RiskParams& params, int max_n) {
  std::ostringstream out;
  out << "n,p_wd\n";
  char num[64];
  for (int n = params.min_trusted; n <= max_n; ++n) {
    std::snprintf(num, sizeof num, "%.12g", p_wd_all(n, params));
    out << n << ',' << num << '\n';
  }
  return out.str();
}

std::string pwd_vs_pfalse_csv(RiskParams params, const std::vector<double>& pfalse_values) {
  std::ostringstream out;
  out << "p_false,avg_p_wd\n";
  char num[64];
  for (double pf : pfalse_values) {
    params.p_false = pf;
    std::snprintf(num, sizeof num, "%.12g,%.12g", pf, avg_p_wd(params));
    out << num << '\n';
  }
  return out.str();
}

std::string availability_tradeoff_csv(RiskParams params, const std::vector<int>& t_values) {
  std::ostringstream out;
  out << "t,avg_availability,avg_p_wd\n";
  char num[96];
  for (int t : t_values) {
    params.min_trusted = t;
    std::snprintf(num, sizeof num, "%d,%.12g,%.12g", t, avg_availability(params),
                  avg_p_wd(params));
    out << num << '\n';
  }
  return out.str();
}

}  // namespace cats::risk
