// cats-sim: scenario runner, ablations, DoS experiment, risk-model
// curves, parameter tuners, and the crypto benchmark.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "cats/pki.hpp"
#include "cats/riskmodel.hpp"
#include "cats/simulator.hpp"
#include "cats/tuner.hpp"

using namespace cats;

namespace {

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

std::vector<double> load_samples(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::vector<double> v;
  double x;
  while (in >> x) v.push_back(x);
  return v;
}

sim::ScenarioConfig config_from(const std::string& path) {
  if (path.empty()) return {};
  return sim::load_config(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CATS cooperative-autonomy trust simulator"};
  app.require_subcommand(1);

  std::string config_path, out_dir = ".";
  std::uint64_t seed_override = 0;
  bool have_seed = false;

  // --- run ---
  auto* run = app.add_subcommand("run", "run one scenario, write metrics.csv");
  bool events = false, timelines = false;
  run->add_option("-c,--config", config_path, "key=value scenario file")->required();
  run->add_option("-o,--out", out_dir, "output directory");
  run->add_option("--seed", seed_override, "override the config seed")
      ->each([&](const std::string&) { have_seed = true; });
  run->add_flag("--events", events, "also write events.csv (raw report log)");
  run->add_flag("--timelines", timelines, "also write timelines.csv (score/state trace)");
  run->callback([&] {
    auto cfg = config_from(config_path);
    if (have_seed) {
      cfg.seed = seed_override;
      cfg.synthetic.seed = seed_override;
    }
    cfg.record_events = cfg.record_events || events;
    auto m = sim::run_scenario(cfg);
    write_file(out_dir + "/metrics.csv", m.metrics_csv());
    if (events) write_file(out_dir + "/events.csv", m.events_csv());
    if (timelines) write_file(out_dir + "/timelines.csv", m.timelines_csv());
    std::printf("fn %.4f%%  fp %.4f%%  bans %zu/%d  mean ttb %.1fs\n", m.fn_pct, m.fp_pct,
                m.bans.size(), m.misbehaving_total, m.mean_time_to_ban);
  });

  // --- ablate ---
  auto* ablate = app.add_subcommand("ablate", "matched-seed variant sweep, write ablation.csv");
  std::vector<std::string> variants = {"baseline", "two_state", "no_majority_view",
                                       "majority_only"};
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  ablate->add_option("-c,--config", config_path, "key=value scenario file")->required();
  ablate->add_option("-o,--out", out_dir, "output directory");
  ablate->add_option("--variants", variants, "variant names");
  ablate->add_option("--seeds", seeds, "seeds (one trace per seed)");
  ablate->callback([&] {
    auto rows = sim::run_ablation(config_from(config_path), variants, seeds);
    write_file(out_dir + "/ablation.csv", sim::ablation_csv(rows));
    for (const auto& s : sim::summarize_ablation(rows))
      std::printf("%-18s mean fn %.4f%%  mean fp %.4f%%\n", s.variant.c_str(), s.fn_pct,
                  s.fp_pct);
  });

  // --- dos ---
  auto* dos = app.add_subcommand("dos", "closed-population collusion run, write population.csv");
  sim::DosParams dp;
  bool no_scaling = false;
  dos->add_option("-o,--out", out_dir, "output directory");
  dos->add_option("--vehicles", dp.n_vehicles, "population size");
  dos->add_option("--colluders", dp.colluder_pct, "colluder percentage");
  dos->add_option("--duration", dp.duration, "seconds simulated");
  dos->add_option("--step", dp.step, "seconds per step");
  dos->add_option("--seed", dp.seed, "rng seed");
  dos->add_option("--t-ide", dp.authority.t_ide_base, "base inter-downvote epoch, s");
  dos->add_option("--t-ti", dp.authority.t_ti_base, "base flag timeout, s");
  dos->add_option("--t-ive", dp.authority.t_ive, "per-pair vote epoch, s");
  dos->add_flag("--no-tide-scaling", no_scaling, "disable per-vehicle T_IDE scaling");
  dos->callback([&] {
    dp.authority.tide_scaling = !no_scaling;
    auto series = sim::dos_longrun(dp);
    write_file(out_dir + "/population.csv", sim::population_csv(series));
    auto ss = sim::steady_state(series, 0.25);
    std::printf("steady state: benign active %.2f%%  malicious ready %.2f%%\n",
                ss.benign_active_pct, ss.malicious_ready_pct);
  });

  // --- riskmodel ---
  auto* riskc = app.add_subcommand("riskmodel", "closed-form risk curves as CSV");
  risk::RiskParams rp;
  int max_n = 20;
  std::string curve = "pwd_vs_n";
  riskc->add_option("--curve", curve, "pwd_vs_n | pwd_vs_pfalse | availability")
      ->check(CLI::IsMember({"pwd_vs_n", "pwd_vs_pfalse", "availability"}));
  riskc->add_option("--p-false", rp.p_false, "per-report error probability");
  riskc->add_option("--p-trusted", rp.p_trusted, "probability a neighbor is trusted");
  riskc->add_option("--min-trusted", rp.min_trusted, "trusted senders required (T)");
  riskc->add_option("--max-n", max_n, "largest neighbor count");
  riskc->callback([&] {
    if (curve == "pwd_vs_n") {
      std::cout << risk::pwd_vs_n_csv(rp, max_n);
    } else if (curve == "pwd_vs_pfalse") {
      rp.neighbor_dist.p.assign(max_n + 1, 0.0);
      rp.neighbor_dist.p[max_n] = 1.0;
      rp.neighbor_dist.max_n = max_n;
      std::cout << risk::pwd_vs_pfalse_csv(rp, {1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2});
    } else {
      rp.neighbor_dist.p.assign(max_n + 1, 0.0);
      rp.neighbor_dist.p[max_n] = 1.0;
      rp.neighbor_dist.max_n = max_n;
      std::cout << risk::availability_tradeoff_csv(rp, {1, 2, 3, 4, 5});
    }
  });

  // --- tune ---
  auto* tune = app.add_subcommand("tune", "parameter derivation helpers");
  tune->require_subcommand(1);

  auto* tive = tune->add_subcommand("tive", "T_IVE from inter-accepted-vote intervals");
  std::string samples_path;
  double daily_travel = 6000.0;
  double n_thresh = 0.998, score_step = 0.001, score_min = 0.0;
  tive->add_option("--iavi-file", samples_path, "whitespace-separated IAVI samples, s")
      ->required();
  tive->add_option("--daily-travel", daily_travel, "driving seconds per day");
  tive->add_option("--n-thresh", n_thresh, "demotion threshold");
  tive->add_option("--score-step", score_step, "per-vote score step");
  tive->add_option("--score-min", score_min, "post-ban score floor");
  tive->callback([&] {
    tune::VoteTimingStats stats{load_samples(samples_path), daily_travel};
    int votes = tune::recovery_votes_needed(n_thresh, score_min, score_step);
    auto r = tune::tune_tive(stats, votes);
    std::printf("p95 iavi %.2fs  votes/day %.1f  recovery votes %d  T_IVE %.0fs (%.2f d)\n",
                r.p95_iavi, r.votes_per_day, votes, r.t_ive, r.t_ive / 86400.0);
  });

  auto* tide = tune->add_subcommand("tide", "T_IDE base from a blocked-fraction table");
  std::string table_path;
  double target_pds = 0.99;
  double dist_mean_n = 4.0;
  tide->add_option("--table", table_path,
                   "rows of 't_ide blocked_fraction', increasing t_ide")
      ->required();
  tide->add_option("--target-pds", target_pds, "required downvote-success probability");
  tide->add_option("--mean-n", dist_mean_n, "mean co-visible voters (Poisson model)");
  tide->callback([&] {
    auto raw = load_samples(table_path);
    if (raw.size() < 4 || raw.size() % 2 != 0)
      throw std::runtime_error("table needs >= 2 't_ide fraction' rows");
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 0; i < raw.size(); i += 2) pts.emplace_back(raw[i], raw[i + 1]);
    auto blocked = [&](Seconds t) {
      if (t <= pts.front().first) return pts.front().second;
      for (std::size_t i = 1; i < pts.size(); ++i)
        if (t <= pts[i].first) {
          double u = (t - pts[i - 1].first) / (pts[i].first - pts[i - 1].first);
          return pts[i - 1].second + u * (pts[i].second - pts[i - 1].second);
        }
      return pts.back().second;
    };
    mobility::NeighborDistribution dist;
    dist.max_n = 20;
    dist.p.assign(21, 0.0);
    double lam = dist_mean_n, term = std::exp(-lam), sum = 0.0;
    for (int n = 0; n <= 20; ++n) {
      dist.p[n] = term;
      sum += term;
      term *= lam / (n + 1);
    }
    for (auto& p : dist.p) p /= sum;
    auto r = tune::tune_tide_base(dist, target_pds, blocked, pts.front().first,
                                  pts.back().first);
    std::printf("T_IDE %.0fs meets p_ds >= %.4f (%zu probes)\n", r.t_ide, target_pds,
                r.trace.size());
  });

  auto* tvote = tune->add_subcommand("tvote", "T_vote from beacon interval and latency");
  double t_bbi = 1.0;
  std::string latency_path;
  tvote->add_option("--t-bbi", t_bbi, "beacon interval, s");
  tvote->add_option("--latency-file", latency_path, "uplink latency samples, s")->required();
  tvote->callback([&] {
    std::printf("T_vote = %.3fs\n", tune::tune_tvote(t_bbi, load_samples(latency_path)));
  });

  auto* tbbi = tune->add_subcommand("tbbi", "beacon rate from channel budget");
  double beacon_bytes = 1300.0, channel_bps = 3.0e6;
  int coresident = 240;
  tbbi->add_option("--beacon-bytes", beacon_bytes, "encoded beacon size");
  tbbi->add_option("--channel-bps", channel_bps, "channel capacity, bit/s");
  tbbi->add_option("--coresident", coresident, "vehicles sharing the channel");
  tbbi->callback([&] {
    auto r = tune::derive_tbbi(beacon_bytes, channel_bps, coresident);
    std::printf("slots/s %.1f  max rate %.2f Hz  viable %g-%g Hz  recommended %g Hz\n",
                r.slots_per_second, r.max_rate_hz, r.lo_hz, r.hi_hz, r.recommended_hz);
  });

  // --- sweep ---
  auto* sweep = app.add_subcommand("sweep", "simulation parameter sweeps");
  sweep->require_subcommand(1);

  auto* swn = sweep->add_subcommand("nthresh", "downvotes-to-demote sweep");
  std::vector<int> nd_values = {1, 2, 3};
  swn->add_option("-c,--config", config_path, "key=value scenario file")->required();
  swn->add_option("--nd", nd_values, "N_D values");
  swn->add_option("--seeds", seeds, "seeds");
  swn->callback([&] {
    std::cout << tune::sweep_csv(tune::sweep_nthresh(config_from(config_path), nd_values, seeds));
  });

  auto* swf = sweep->add_subcommand("tfw", "flagging window sweep");
  std::vector<Seconds> tfw_values = {10.0, 20.0, 40.0, 80.0};
  swf->add_option("-c,--config", config_path, "key=value scenario file")->required();
  swf->add_option("--tfw", tfw_values, "window lengths, s");
  swf->add_option("--seeds", seeds, "seeds");
  swf->callback([&] {
    std::cout << tune::sweep_csv(tune::sweep_tfw(config_from(config_path), tfw_values, seeds));
  });

  // --- crypto ---
  auto* bench = app.add_subcommand("crypto", "verification pipeline benchmark");
  int iterations = 200;
  bench->add_option("--iterations", iterations, "verifies per tier");
  bench->callback([&] {
    using crypto::CurveTier;
    for (CurveTier tier : {CurveTier::Secp224r1, CurveTier::BrainpoolP256r1,
                           CurveTier::Secp384r1, CurveTier::BrainpoolP512r1}) {
      double s = pki::verification_benchmark(tier, iterations);
      std::printf("%-18s %8.3f ms/verify\n", crypto::curve_name(tier), 1e3 * s);
    }
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
