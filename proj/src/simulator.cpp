#include "cats/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>
#include <unordered_set>

#include "cats/crypto.hpp"
#include "cats/pki.hpp"

namespace cats::sim {

void ScenarioConfig::validate() const {
  if (bad_sensor_pct < 0.0 || flipflop_pct < 0.0)
    throw ConfigError("misbehavior ratios must be >= 0");
  if (bad_sensor_pct + flipflop_pct > 100.0)
    throw ConfigError("misbehavior ratios sum above 100");
  if (duration < 1.0) throw ConfigError("duration must be >= 1 second");
  if (comm_range <= 0.0) throw ConfigError("comm_range must be positive");
  if (workers < 1 || workers > 64) throw ConfigError("workers must be in [1, 64]");
  if (trace_file.empty() && synthetic.n_vehicles < 2)
    throw ConfigError("synthetic trace needs >= 2 vehicles");
  if (perception.sensor_radius <= 0.0) throw ConfigError("sensor_radius must be positive");
  if (t_bbi <= 0.0) throw ConfigError("t_bbi must be positive");
}

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_f64(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("bad numeric value for " + key + ": '" + v + "'");
  }
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    std::uint64_t x = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("bad integer value for " + key + ": '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("bad boolean value for " + key + ": '" + v + "'");
}

}  // namespace

ScenarioConfig parse_config(const std::string& text) {
  ScenarioConfig c;
  std::istringstream in(text);
  std::string raw;
  while (std::getline(in, raw)) {
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key=value: '" + line + "'");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (key == "seed") {
      c.seed = to_u64(key, val);
      c.synthetic.seed = c.seed;
    } else if (key == "duration") {
      c.duration = to_f64(key, val);
      c.synthetic.duration = c.duration;
    } else if (key == "workers")
      c.workers = static_cast<int>(to_u64(key, val));
    else if (key == "record_events")
      c.record_events = to_bool(key, val);
    else if (key == "trace_file")
      c.trace_file = val;
    else if (key == "n_vehicles")
      c.synthetic.n_vehicles = static_cast<int>(to_u64(key, val));
    else if (key == "area")
      c.synthetic.area = to_f64(key, val);
    else if (key == "speed_min")
      c.synthetic.speed_min = to_f64(key, val);
    else if (key == "speed_max")
      c.synthetic.speed_max = to_f64(key, val);
    else if (key == "grid_spacing")
      c.synthetic.grid_spacing = to_f64(key, val);
    else if (key == "comm_range")
      c.comm_range = to_f64(key, val);
    else if (key == "sensor_radius")
      c.perception.sensor_radius = to_f64(key, val);
    else if (key == "match_tolerance")
      c.perception.match_tolerance = to_f64(key, val);
    else if (key == "cluster_tolerance")
      c.perception.cluster_tolerance = to_f64(key, val);
    else if (key == "min_senders")
      c.perception.min_senders = static_cast<int>(to_u64(key, val));
    else if (key == "bad_sensor_pct")
      c.bad_sensor_pct = to_f64(key, val);
    else if (key == "flipflop_pct")
      c.flipflop_pct = to_f64(key, val);
    else if (key == "flipflop_period")
      c.flipflop_period = to_f64(key, val);
    else if (key == "n_thresh")
      c.authority.n_thresh = to_f64(key, val);
    else if (key == "score_step")
      c.authority.score_step = to_f64(key, val);
    else if (key == "score_min")
      c.authority.score_min = to_f64(key, val);
    else if (key == "t_fw")
      c.authority.t_fw = to_f64(key, val);
    else if (key == "t_ti_base")
      c.authority.t_ti_base = to_f64(key, val);
    else if (key == "t_ti_multiplier")
      c.authority.t_ti_multiplier = to_f64(key, val);
    else if (key == "t_ive")
      c.authority.t_ive = to_f64(key, val);
    else if (key == "t_ide_base")
      c.authority.t_ide_base = to_f64(key, val);
    else if (key == "t_ide_multiplier")
      c.authority.t_ide_multiplier = to_f64(key, val);
    else if (key == "t_vote")
      c.authority.t_vote = to_f64(key, val);
    else if (key == "cert_batch_size")
      c.authority.cert_batch_size = static_cast<int>(to_u64(key, val));
    else if (key == "t_bbi")
      c.t_bbi = to_f64(key, val);
    else if (key == "message_freshness")
      c.message_freshness = to_f64(key, val);
    else if (key == "three_state")
      c.authority.three_state = to_bool(key, val);
    else if (key == "tide_scaling")
      c.authority.tide_scaling = to_bool(key, val);
    else if (key == "majority_view")
      c.majority_view = to_bool(key, val);
    else if (key == "voting")
      c.voting = to_bool(key, val);
    else
      throw ConfigError("unknown config key: '" + key + "'");
  }
  c.validate();
  return c;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_config(buf.str());
}

ScenarioConfig apply_variant(const ScenarioConfig& base, const std::string& variant) {
  ScenarioConfig c = base;
  if (variant == "baseline") return c;
  if (variant == "two_state") {
    c.authority.three_state = false;
    return c;
  }
  if (variant == "no_majority_view") {
    c.majority_view = false;
    return c;
  }
  if (variant == "majority_only") {
    c.voting = false;
    return c;
  }
  if (variant == "no_tide_scaling") {
    c.authority.tide_scaling = false;
    return c;
  }
  if (variant.rfind("nd", 0) == 0) {
    int nd = static_cast<int>(to_u64(variant, variant.substr(2)));
    if (nd < 1 || nd > 3) throw ConfigError("variant " + variant + ": N_D must be in {1,2,3}");
    c.authority.score_step = (1.0 - c.authority.n_thresh) / nd;
    return c;
  }
  if (variant.rfind("tfw", 0) == 0) {
    c.authority.t_fw = to_f64(variant, variant.substr(3));
    if (c.authority.t_fw <= 0.0) throw ConfigError("variant " + variant + ": T_FW must be positive");
    return c;
  }
  throw ConfigError("unknown variant: '" + variant + "'");
}

// ---------------------------------------------------------------------
// World

namespace {

using vehicle::BehaviorKind;

struct VehicleState {
  Uuid vid;
  std::uint64_t num_id = 0;  // object_id this vehicle appears as in reports
  vehicle::BehaviorProfile profile;
  crypto::KeyPair vic_keys;
  std::vector<pki::IssuedCert> certs;
  std::size_t cert_idx = 0;
  std::mt19937_64 rng;
  Seconds first_bad_at = -1.0;
  // Client-side mirror of the voter's own accepted votes; equals the
  // SA's rate-limit view for this voter, so eligible intents are always
  // accepted (modulo flag-driven state changes).
  std::unordered_map<Uuid, Seconds, UuidHash> next_up_ok;
  Seconds next_down_ok = -1.0e18;
  // Senders this vehicle itself caught lying; never upvoted again.
  std::unordered_set<Uuid, UuidHash> known_offenders;

  const pki::IssuedCert& current_cert() const { return certs[cert_idx % certs.size()]; }
};

struct SenderSlot {
  // Per-sender per-slot broadcast products, shared by all receivers.
  pki::Beacon beacon;
  pki::ShareMessage message;
  vehicle::Position pos;
  pki::VerifyResult verdict;
};

struct Intent {
  Uuid voter;
  Uuid target;
  sa::VoteAction action = sa::VoteAction::Upvote;
  sa::VoteReason reason = sa::VoteReason::InconsistentObservation;
};

struct ReceiverOut {
  std::uint64_t bad_received = 0, bad_accepted = 0;
  std::uint64_t good_received = 0, good_dropped = 0;
  std::uint64_t trusted_reports = 0, trusted_bad_reports = 0;
  int covisible = 0, covisible_trusted = 0;
  std::vector<int> decision_covis;
  int claim_covis = -1;
  std::vector<Intent> intents;
  std::vector<ReportEvent> events;
};

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class World {
 public:
  World(const ScenarioConfig& config, const mobility::Trace& trace)
      : cfg_(config),
        trace_(trace),
        scheme_(crypto::make_fake_scheme(cfg_.seed)),
        sa_(config.authority, scheme_),
        cache_(1u << 18) {
    if (trace_.empty()) throw ConfigError("empty trace");
    init_vehicles();
  }

  MetricsReport run() {
    for (std::size_t i = 0; i < trace_.size(); ++i) step(trace_[i]);
    return finish();
  }

 private:
  void init_vehicles() {
    std::vector<Uuid> vids;
    {
      std::unordered_set<Uuid> seen;
      for (const auto& slot : trace_)
        for (const auto& e : slot.entries)
          if (seen.insert(e.vid).second) vids.push_back(e.vid);
    }
    std::sort(vids.begin(), vids.end());

    auto lifetime = mobility::lifetimes(trace_);
    std::mt19937_64 world_rng(mix64(cfg_.seed ^ 0xca75ca75ca75ca75ULL));
    auto u01 = [&world_rng] {
      return static_cast<double>(world_rng() >> 11) * 0x1.0p-53;
    };

    std::vector<Uuid> shuffled = vids;
    for (std::size_t i = shuffled.size(); i > 1; --i)
      std::swap(shuffled[i - 1], shuffled[static_cast<std::size_t>(u01() * static_cast<double>(i))]);
    auto n = static_cast<double>(vids.size());
    auto n_bad = static_cast<std::size_t>(std::llround(n * cfg_.bad_sensor_pct / 100.0));
    auto n_ff = static_cast<std::size_t>(std::llround(n * cfg_.flipflop_pct / 100.0));
    std::unordered_map<Uuid, BehaviorKind, UuidHash> kind;
    for (std::size_t i = 0; i < shuffled.size(); ++i)
      kind[shuffled[i]] =
          i < n_bad ? BehaviorKind::BadSensor
                    : (i < n_bad + n_ff ? BehaviorKind::FlipFlop : BehaviorKind::Honest);

    std::uint64_t next_num = 1;
    for (const auto& vid : vids) {
      VehicleState v;
      v.vid = vid;
      v.num_id = next_num++;
      v.profile.kind = kind[vid];
      v.profile.flipflop_period = cfg_.flipflop_period;
      auto lt = lifetime.at(vid);
      double a = static_cast<double>(lt.first);
      double b = 0.5 * static_cast<double>(lt.first + lt.last);
      v.profile.activation_at = a + u01() * std::max(0.0, b - a);
      v.vic_keys = scheme_->generate_keypair();
      v.rng.seed(mix64(cfg_.seed ^ v.num_id));
      sa_.register_vehicle(vid, v.vic_keys.public_key, 0.0);
      v.certs = sa_.ca().issue_vpc_batch(vid, pki::CertTrust::Trusted,
                                         cfg_.authority.cert_batch_size, 0.0);
      num_of_[vid] = v.num_id;
      index_of_[vid] = vehicles_.size();
      vehicles_.push_back(std::move(v));
    }
    for (const auto& v : vehicles_)
      if (v.profile.kind != BehaviorKind::Honest) ++misbehaving_;
  }

  void step(const mobility::TraceSlot& slot) {
    auto now = static_cast<Seconds>(slot.t);
    mobility::SlotIndex index(slot, cfg_.comm_range);

    // (1)+(2) Broadcast phase: beacon + share message per present vehicle.
    std::unordered_map<Uuid, SenderSlot, UuidHash> tx;
    tx.reserve(slot.entries.size());
    for (const auto& e : slot.entries) {
      auto& v = vehicles_[index_of_.at(e.vid)];
      SenderSlot s;
      s.pos = {e.x, e.y};
      const auto& ic = v.current_cert();
      s.beacon.cert = ic.cert;
      s.beacon.timestamp = now;
      s.beacon.signature = scheme_->sign(ic.private_key, pki::beacon_signed_payload(s.beacon));
      auto own = own_sensing(index, e.vid, now);
      auto payload = vehicle::generate_share(v.profile, s.pos, std::move(own), now,
                                             cfg_.perception, v.rng);
      bool bad = false;
      for (const auto& r : payload)
        if (r.object_id == 0) bad = true;
      if (bad && v.first_bad_at < 0.0) v.first_bad_at = now;
      s.message = pki::sign_message(*scheme_, ic.private_key, ic.cert.pid, now, std::move(payload));
      if (pki::verify_beacon(*scheme_, s.beacon) &&
          pki::verify_cert(*scheme_, sa_.ca().sa_public_key(), s.beacon.cert))
        cache_.put(s.beacon.cert);
      tx.emplace(e.vid, std::move(s));
    }

    // Shared in-band verification: one verdict per sender (all receivers
    // see the same bytes against the same slot-start revocation view).
    for (auto& [vid, s] : tx)
      s.verdict = pki::verify_message(*scheme_, s.message, cache_, active_rev_, now,
                                      cfg_.message_freshness);

    // (3)+(4) Receiver pipelines, parallel over receivers.
    std::vector<ReceiverOut> outs(slot.entries.size());
    auto work = [&](std::size_t lo, std::size_t hi) {
      for (std::size_t i = lo; i < hi; ++i)
        receive(slot.entries[i], index, tx, now, outs[i]);
    };
    if (cfg_.workers == 1 || slot.entries.size() < 64) {
      work(0, slot.entries.size());
    } else {
      std::vector<std::thread> pool;
      std::size_t chunk = (slot.entries.size() + cfg_.workers - 1) / cfg_.workers;
      for (int w = 0; w < cfg_.workers; ++w) {
        std::size_t lo = std::min(slot.entries.size(), static_cast<std::size_t>(w) * chunk);
        std::size_t hi = std::min(slot.entries.size(), lo + chunk);
        if (lo < hi) pool.emplace_back(work, lo, hi);
      }
      for (auto& t : pool) t.join();
    }

    // Fixed-order aggregation: receiver index order, regardless of
    // worker count.
    for (auto& o : outs) {
      metrics_.bad_received += o.bad_received;
      metrics_.bad_accepted += o.bad_accepted;
      metrics_.good_received += o.good_received;
      metrics_.good_dropped += o.good_dropped;
      trusted_reports_ += o.trusted_reports;
      trusted_bad_reports_ += o.trusted_bad_reports;
      covis_sum_ += o.covisible;
      covis_trusted_sum_ += o.covisible_trusted;
      covis_samples_ += 1;
      if (static_cast<std::size_t>(o.covisible) >= covis_hist_.size())
        covis_hist_.resize(o.covisible + 1, 0);
      covis_hist_[o.covisible] += 1;
      for (int n : o.decision_covis) {
        if (static_cast<std::size_t>(n) >= decision_hist_.size())
          decision_hist_.resize(n + 1, 0);
        decision_hist_[n] += 1;
        ++decision_samples_;
      }
      if (o.claim_covis >= 0) {
        if (static_cast<std::size_t>(o.claim_covis) >= claim_hist_.size())
          claim_hist_.resize(o.claim_covis + 1, 0);
        claim_hist_[o.claim_covis] += 1;
        ++claim_samples_;
      }
      if (cfg_.record_events)
        metrics_.events.insert(metrics_.events.end(), o.events.begin(), o.events.end());
    }

    // (5) SA phase: ballots in canonical order.
    if (cfg_.voting) {
      for (const auto& o : outs)
        for (const auto& intent : o.intents) apply_intent(intent, tx, now);
    }
    sa_.expire_flags(now);

    // (6) Causality boundary: trust updates and revocations made during
    // this slot become visible at slot + 1.
    for (auto& [vid, batch] : sa_.take_pending_certs()) {
      auto& v = vehicles_[index_of_.at(vid)];
      v.certs = std::move(batch);
      v.cert_idx = 0;
    }
    const auto& log = sa_.ca().revocation_list().log();
    for (; rev_applied_ < log.size(); ++rev_applied_)
      active_rev_.revoke(log[rev_applied_].first, log[rev_applied_].second);
  }

  std::vector<ObjectReport> own_sensing(const mobility::SlotIndex& index, const Uuid& self,
                                        Seconds now) const {
    std::vector<ObjectReport> out;
    for (const auto& vid : index.neighbors_within(self, cfg_.perception.sensor_radius)) {
      auto [x, y] = index.position(vid);
      out.push_back({num_of_.at(vid), x, y, now});
    }
    return out;
  }

  void receive(const mobility::TraceEntry& re, const mobility::SlotIndex& index,
               const std::unordered_map<Uuid, SenderSlot, UuidHash>& tx, Seconds now,
               ReceiverOut& o) {
    auto& recv = vehicles_[index_of_.at(re.vid)];
    vehicle::Position rpos{re.x, re.y};
    auto neighbors = index.neighbors_within(re.vid, cfg_.comm_range);

    auto gt = own_sensing(index, re.vid, now);
    std::vector<vehicle::Position> gt_pos;
    gt_pos.reserve(gt.size() + 1);
    for (const auto& r : gt) gt_pos.push_back({r.x, r.y});
    gt_pos.push_back(rpos);  // claims about the receiver itself are valid

    std::vector<vehicle::SenderReports> trusted;
    std::unordered_map<Uuid, vehicle::Position> trusted_pos;
    std::optional<Intent> downvote;

    for (const auto& svid : neighbors) {
      const auto& s = tx.at(svid);
      bool is_trusted = s.verdict.kind == pki::VerifyResult::Kind::TrustedData;
      bool is_untrusted = s.verdict.kind == pki::VerifyResult::Kind::UntrustedData;

      double dx = s.pos.x - rpos.x, dy = s.pos.y - rpos.y;
      if (dx * dx + dy * dy <=
          cfg_.perception.sensor_radius * cfg_.perception.sensor_radius) {
        ++o.covisible;
        if (is_trusted) ++o.covisible_trusted;
      }

      for (const auto& r : s.message.payload) {
        bool bad = r.object_id == 0;
        if (bad)
          ++o.bad_received;
        else
          ++o.good_received;
        if (is_trusted) {
          ++o.trusted_reports;
          if (bad) ++o.trusted_bad_reports;
        }
      }
      if (is_trusted) {
        trusted.push_back({svid, s.message.payload});
        trusted_pos[svid] = s.pos;
      }

      // Verification + voting on any authenticated sender.
      if (cfg_.voting && (is_trusted || is_untrusted)) {
        std::vector<vehicle::VerificationOutcome> outcomes;
        outcomes.reserve(s.message.payload.size());
        for (const auto& r : s.message.payload)
          outcomes.push_back(vehicle::verify_observation(rpos, r, gt_pos, cfg_.perception));
        auto honest = vehicle::decide_vote(outcomes);
        if (honest == vehicle::VoteChoice::Downvote && recv.profile.kind == BehaviorKind::Honest)
          recv.known_offenders.insert(svid);
        auto choice = vehicle::apply_vote_behavior(recv.profile, honest, now);
        if (choice == vehicle::VoteChoice::Upvote) {
          // Never re-upvote a sender this receiver itself caught lying;
          // stops flip-floppers farming their good phases for recovery.
          auto it = recv.next_up_ok.find(svid);
          if ((it == recv.next_up_ok.end() || now >= it->second) &&
              !recv.known_offenders.contains(svid))
            o.intents.push_back({re.vid, svid, sa::VoteAction::Upvote,
                                 sa::VoteReason::InconsistentObservation});
        } else if (choice == vehicle::VoteChoice::Downvote && !downvote && now >= recv.next_down_ok) {
          // Downvote budget husbandry. A voter's T_IDE budget is one
          // downvote per fortnight, so wasted votes dominate detection
          // capacity. Two receiver-side policies:
          //  - against a still-Trusted offender, vote eagerly but only
          //    in flagging windows matching the voter's id parity, so
          //    the offender collects votes in two distinct windows
          //    instead of a same-window pile-on;
          //  - an offender already marked Untrusted in its cert was
          //    yellow-flagged in the window its Untrusted cert was
          //    issued (not_before), so a finisher vote is only useful
          //    in a later window; the first accepted one bans, and
          //    post-ban votes are rejected without burning budget.
          auto window = static_cast<std::int64_t>(std::floor(now / cfg_.authority.t_fw));
          bool cast;
          if (is_trusted) {
            cast = ((window + static_cast<std::int64_t>(recv.num_id)) & 1) == 0;
          } else {
            auto flagged = static_cast<std::int64_t>(
                std::floor(s.beacon.cert.not_before / cfg_.authority.t_fw));
            cast = window > flagged;
          }
          if (cast)
            downvote = Intent{re.vid, svid, sa::VoteAction::Downvote,
                              sa::VoteReason::InconsistentObservation};
        }
      }
    }
    if (downvote) o.intents.push_back(*downvote);

    // Probe point: a uniformly random claim location inside a random heard
    // trusted sender's sensor disk, and the trusted co-visible count a claim
    // there would be judged under. This is the n the risk model sees for an
    // arbitrary (possibly fabricated) claim, independent of where real
    // objects happen to sit. The probe rng is keyed off (seed, receiver,
    // slot) so it never perturbs the simulation's own random streams.
    if (!trusted.empty()) {
      std::mt19937_64 prng(mix64(cfg_.seed ^ mix64(num_of_.at(re.vid)) ^
                                 mix64(static_cast<std::uint64_t>(now))));
      auto u01 = [&prng] { return static_cast<double>(prng() >> 11) * 0x1.0p-53; };
      const Uuid claimant = trusted[prng() % trusted.size()].sender;
      const auto& cpos = trusted_pos.at(claimant);
      double angle = 2.0 * M_PI * u01();
      double radius = cfg_.perception.sensor_radius * std::sqrt(u01());
      double px = cpos.x + radius * std::cos(angle), py = cpos.y + radius * std::sin(angle);
      double r2 = cfg_.perception.sensor_radius * cfg_.perception.sensor_radius;
      // The claimant is no independent witness of its own claim, so it is
      // left out of n (the simulation's quorum count does include it, which
      // only makes the model's prediction an upper bound).
      int n = 0;
      for (const auto& [svid, pos] : trusted_pos) {
        if (svid == claimant) continue;
        double ddx = pos.x - px, ddy = pos.y - py;
        if (ddx * ddx + ddy * ddy <= r2) ++n;
      }
      o.claim_covis = n;
    }

    // Control pipeline for trusted data.
    if (cfg_.majority_view) {
      auto filtered = vehicle::majority_filter(trusted, trusted_pos, cfg_.perception);
      o.decision_covis.insert(o.decision_covis.end(), filtered.decision_covis.begin(),
                              filtered.decision_covis.end());
      for (const auto& [svid, r] : filtered.accepted) {
        if (r.object_id == 0)
          ++o.bad_accepted;
        if (cfg_.record_events)
          o.events.push_back({static_cast<std::int64_t>(now), re.vid, svid, r.object_id,
                              r.object_id == 0, true});
      }
      for (const auto& [svid, r] : filtered.rejected) {
        if (r.object_id != 0) ++o.good_dropped;
        if (cfg_.record_events)
          o.events.push_back({static_cast<std::int64_t>(now), re.vid, svid, r.object_id,
                              r.object_id == 0, false});
      }
    } else {
      for (const auto& sr : trusted)
        for (const auto& r : sr.reports) {
          if (r.object_id == 0)
            ++o.bad_accepted;
          if (cfg_.record_events)
            o.events.push_back({static_cast<std::int64_t>(now), re.vid, sr.sender, r.object_id,
                                r.object_id == 0, true});
        }
    }
    // Reports from untrusted/dropped senders never reach control.
    for (const auto& svid : neighbors) {
      const auto& s = tx.at(svid);
      if (s.verdict.kind == pki::VerifyResult::Kind::TrustedData) continue;
      for (const auto& r : s.message.payload) {
        if (r.object_id != 0) ++o.good_dropped;
        if (cfg_.record_events)
          o.events.push_back({static_cast<std::int64_t>(now), re.vid, svid, r.object_id,
                              r.object_id == 0, false});
      }
    }
  }

  void apply_intent(const Intent& intent, const std::unordered_map<Uuid, SenderSlot, UuidHash>& tx,
                    Seconds now) {
    sa::VoteBallot ballot;
    ballot.voter_vid = intent.voter;
    ballot.target_beacon = tx.at(intent.target).beacon;
    ballot.action = intent.action;
    ballot.reason = intent.reason;
    ballot.submitted_at = now;
    auto& voter = vehicles_[index_of_.at(intent.voter)];
    sa::sign_ballot(*scheme_, voter.vic_keys.private_key, ballot);
    auto outcome = sa_.process_vote(ballot, now);
    if (outcome.accepted) {
      if (intent.action == sa::VoteAction::Upvote)
        voter.next_up_ok[intent.target] = now + cfg_.authority.t_ive;
      else
        voter.next_down_ok = now + sa_.record(intent.voter).tide_current;
      const auto& rec = sa_.record(outcome.target_vid);
      char flag = rec.flag.kind == sa::Flag::Kind::None
                      ? 'N'
                      : (rec.flag.kind == sa::Flag::Kind::Yellow ? 'Y' : 'R');
      metrics_.timelines.push_back({now, outcome.target_vid, rec.score, rec.trust_state, flag});
    } else if (outcome.reason == sa::RejectReason::IdeLimit) {
      // Mirror went stale (tide raised after our last accept); retry
      // after a window.
      voter.next_down_ok = now + cfg_.authority.t_fw;
    }
  }

  MetricsReport finish() {
    auto& m = metrics_;
    m.fn_pct = m.bad_received ? 100.0 * static_cast<double>(m.bad_accepted) /
                                    static_cast<double>(m.bad_received)
                              : 0.0;
    m.fp_pct = m.good_received ? 100.0 * static_cast<double>(m.good_dropped) /
                                     static_cast<double>(m.good_received)
                               : 0.0;
    m.misbehaving_total = misbehaving_;
    m.measured_p_false =
        trusted_reports_ ? static_cast<double>(trusted_bad_reports_) /
                               static_cast<double>(trusted_reports_)
                         : 0.0;
    m.measured_p_trusted =
        covis_sum_ ? static_cast<double>(covis_trusted_sum_) / static_cast<double>(covis_sum_)
                   : 1.0;
    m.measured_bad_exposure =
        metrics_.bad_received ? static_cast<double>(trusted_bad_reports_) /
                                    static_cast<double>(metrics_.bad_received)
                              : 0.0;
    m.mean_covisible =
        covis_samples_ ? static_cast<double>(covis_sum_) / static_cast<double>(covis_samples_)
                       : 0.0;
    if (!covis_hist_.empty()) {
      m.covis_dist.p.resize(covis_hist_.size());
      for (std::size_t i = 0; i < covis_hist_.size(); ++i)
        m.covis_dist.p[i] =
            static_cast<double>(covis_hist_[i]) / static_cast<double>(covis_samples_);
      m.covis_dist.max_n = static_cast<int>(covis_hist_.size()) - 1;
    }
    if (!decision_hist_.empty()) {
      m.decision_dist.p.resize(decision_hist_.size());
      for (std::size_t i = 0; i < decision_hist_.size(); ++i)
        m.decision_dist.p[i] =
            static_cast<double>(decision_hist_[i]) / static_cast<double>(decision_samples_);
      m.decision_dist.max_n = static_cast<int>(decision_hist_.size()) - 1;
    }
    if (!claim_hist_.empty()) {
      m.claim_dist.p.resize(claim_hist_.size());
      for (std::size_t i = 0; i < claim_hist_.size(); ++i)
        m.claim_dist.p[i] =
            static_cast<double>(claim_hist_[i]) / static_cast<double>(claim_samples_);
      m.claim_dist.max_n = static_cast<int>(claim_hist_.size()) - 1;
    }
    double sum_ttb = 0.0;
    int n_ttb = 0;
    std::unordered_set<Uuid> seen;
    for (const auto& be : sa_.ban_events()) {
      if (!seen.insert(be.vid).second) continue;  // first ban only
      const auto& v = vehicles_[index_of_.at(be.vid)];
      BanRecord br{be.vid, be.time, v.first_bad_at};
      m.bans.push_back(br);
      if (v.first_bad_at >= 0.0) {
        sum_ttb += br.time_to_ban();
        ++n_ttb;
      }
    }
    m.mean_time_to_ban = n_ttb ? sum_ttb / n_ttb : 0.0;
    return std::move(metrics_);
  }

  ScenarioConfig cfg_;
  const mobility::Trace& trace_;
  std::shared_ptr<crypto::SignatureScheme> scheme_;
  sa::SecurityAuthority sa_;
  pki::CertCache cache_;
  pki::RevocationList active_rev_;  // receivers' view, lags the SA by one slot
  std::size_t rev_applied_ = 0;

  std::vector<VehicleState> vehicles_;
  std::unordered_map<Uuid, std::size_t, UuidHash> index_of_;
  std::unordered_map<Uuid, std::uint64_t, UuidHash> num_of_;
  int misbehaving_ = 0;

  MetricsReport metrics_;
  std::uint64_t trusted_reports_ = 0, trusted_bad_reports_ = 0;
  std::uint64_t covis_sum_ = 0, covis_trusted_sum_ = 0, covis_samples_ = 0;
  std::vector<std::uint64_t> covis_hist_;
  std::vector<std::uint64_t> decision_hist_;
  std::uint64_t decision_samples_ = 0;
  std::vector<std::uint64_t> claim_hist_;
  std::uint64_t claim_samples_ = 0;
};

}  // namespace

MetricsReport run_scenario(const ScenarioConfig& config, const mobility::Trace& trace) {
  config.validate();
  World world(config, trace);
  return world.run();
}

MetricsReport run_scenario(const ScenarioConfig& config) {
  config.validate();
  mobility::Trace trace = config.trace_file.empty()
                              ? mobility::generate_synthetic(config.synthetic)
                              : mobility::load_trace(config.trace_file);
  return run_scenario(config, trace);
}

MetricsReport compute_metrics(const std::vector<ReportEvent>& events,
                              const std::vector<BanRecord>& bans, int misbehaving_total) {
  MetricsReport m;
  for (const auto& e : events) {
    if (e.bad) {
      ++m.bad_received;
      if (e.accepted) ++m.bad_accepted;
    } else {
      ++m.good_received;
      if (!e.accepted) ++m.good_dropped;
    }
  }
  m.fn_pct = m.bad_received
                 ? 100.0 * static_cast<double>(m.bad_accepted) / static_cast<double>(m.bad_received)
                 : 0.0;
  m.fp_pct = m.good_received ? 100.0 * static_cast<double>(m.good_dropped) /
                                   static_cast<double>(m.good_received)
                             : 0.0;
  m.bans = bans;
  m.misbehaving_total = misbehaving_total;
  double sum = 0.0;
  int n = 0;
  for (const auto& b : bans)
    if (b.first_bad_at >= 0.0) {
      sum += b.time_to_ban();
      ++n;
    }
  m.mean_time_to_ban = n ? sum / n : 0.0;
  return m;
}

std::string MetricsReport::metrics_csv() const {
  std::string out =
      "fn_pct,fp_pct,bad_received,bad_accepted,good_received,good_dropped,bans,misbehaving,"
      "mean_time_to_ban,measured_p_false,measured_p_trusted,mean_covisible\n";
  char line[512];
  std::snprintf(line, sizeof line,
                "%.10g,%.10g,%llu,%llu,%llu,%llu,%zu,%d,%.10g,%.10g,%.10g,%.10g\n", fn_pct, fp_pct,
                static_cast<unsigned long long>(bad_received),
                static_cast<unsigned long long>(bad_accepted),
                static_cast<unsigned long long>(good_received),
                static_cast<unsigned long long>(good_dropped), bans.size(), misbehaving_total,
                mean_time_to_ban, measured_p_false, measured_p_trusted, mean_covisible);
  return out + line;
}

std::string MetricsReport::events_csv() const {
  std::string out = "slot,receiver,sender,object_id,bad,accepted\n";
  for (const auto& e : events) {
    char line[160];
    std::snprintf(line, sizeof line, "%lld,%s,%s,%llu,%d,%d\n",
                  static_cast<long long>(e.slot), e.receiver.to_string().c_str(),
                  e.sender.to_string().c_str(), static_cast<unsigned long long>(e.object_id),
                  e.bad ? 1 : 0, e.accepted ? 1 : 0);
    out += line;
  }
  return out;
}

std::string MetricsReport::timelines_csv() const {
  std::string out = "t,vid,score,state,flag\n";
  for (const auto& p : timelines) {
    char line[160];
    std::snprintf(line, sizeof line, "%.10g,%s,%.10g,%s,%c\n", p.t, p.vid.to_string().c_str(),
                  p.score, sa::to_string(p.state), p.flag);
    out += line;
  }
  return out;
}

std::vector<AblationRow> run_ablation(const ScenarioConfig& base,
                                      const std::vector<std::string>& variants,
                                      const std::vector<std::uint64_t>& seeds) {
  if (variants.empty() || seeds.empty()) throw ConfigError("ablation: variants and seeds required");
  std::vector<AblationRow> rows;
  for (auto seed : seeds) {
    ScenarioConfig seeded = base;
    seeded.seed = seed;
    seeded.synthetic.seed = seed;
    mobility::Trace trace = seeded.trace_file.empty()
                                ? mobility::generate_synthetic(seeded.synthetic)
                                : mobility::load_trace(seeded.trace_file);
    for (const auto& v : variants) {
      auto m = run_scenario(apply_variant(seeded, v), trace);
      rows.push_back({v, seed, m.fn_pct, m.fp_pct, m.mean_time_to_ban,
                      static_cast<int>(m.bans.size())});
    }
  }
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string out = "variant,seed,fn_pct,fp_pct,mean_time_to_ban,bans\n";
  for (const auto& r : rows) {
    char line[192];
    std::snprintf(line, sizeof line, "%s,%llu,%.10g,%.10g,%.10g,%d\n", r.variant.c_str(),
                  static_cast<unsigned long long>(r.seed), r.fn_pct, r.fp_pct, r.mean_time_to_ban,
                  r.bans);
    out += line;
  }
  return out;
}

std::vector<AblationSummary> summarize_ablation(const std::vector<AblationRow>& rows) {
  std::vector<AblationSummary> out;
  for (const auto& r : rows) {
    auto it = std::find_if(out.begin(), out.end(),
                           [&](const AblationSummary& s) { return s.variant == r.variant; });
    if (it == out.end()) {
      out.push_back({r.variant, 0.0, 0.0});
      it = out.end() - 1;
    }
    it->fn_pct += r.fn_pct;
    it->fp_pct += r.fp_pct;
  }
  std::unordered_map<std::string, int> counts;
  for (const auto& r : rows) ++counts[r.variant];
  for (auto& s : out) {
    s.fn_pct /= counts[s.variant];
    s.fp_pct /= counts[s.variant];
  }
  return out;
}

// ---------------------------------------------------------------------
// Closed-population DoS long run: voting dynamics only, everyone in
// mutual radio contact, no perception.

std::vector<PopulationPoint> dos_longrun(const DosParams& params) {
  if (params.n_vehicles < 2) throw ConfigError("dos: need >= 2 vehicles");
  if (params.colluder_pct < 0.0 || params.colluder_pct > 100.0)
    throw ConfigError("dos: colluder_pct out of range");
  if (params.step <= 0.0 || params.duration < params.step) throw ConfigError("dos: bad timing");

  std::shared_ptr<crypto::SignatureScheme> scheme = crypto::make_fake_scheme(params.seed);
  sa::SecurityAuthority sa(params.authority, scheme);

  struct Member {
    Uuid vid;
    crypto::KeyPair keys;
    pki::IssuedCert cert;
    bool colluder = false;
  };
  std::vector<Member> members(params.n_vehicles);
  std::mt19937_64 rng(mix64(params.seed ^ 0xd05d05d05d05d05dULL));
  for (int i = 0; i < params.n_vehicles; ++i) {
    auto& m = members[i];
    m.vid = Uuid::from_u64(static_cast<std::uint64_t>(i) + 1);
    m.keys = scheme->generate_keypair();
    sa.register_vehicle(m.vid, m.keys.public_key, 0.0);
    m.cert = sa.ca().issue_vpc_batch(m.vid, pki::CertTrust::Trusted, 1, 0.0)[0];
  }
  auto n_coll = static_cast<std::size_t>(
      std::llround(params.n_vehicles * params.colluder_pct / 100.0));
  std::vector<std::size_t> order(members.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = order.size(); i > 1; --i) {
    auto j = static_cast<std::size_t>(
        (static_cast<double>(rng() >> 11) * 0x1.0p-53) * static_cast<double>(i));
    std::swap(order[i - 1], order[j]);
  }
  std::vector<Uuid> colluders, benign;
  for (std::size_t i = 0; i < order.size(); ++i) {
    members[order[i]].colluder = i < n_coll;
    (i < n_coll ? colluders : benign).push_back(members[order[i]].vid);
  }
  std::sort(colluders.begin(), colluders.end());
  std::sort(benign.begin(), benign.end());

  std::unordered_map<Uuid, std::size_t, UuidHash> idx;
  for (std::size_t i = 0; i < members.size(); ++i) idx[members[i].vid] = i;

  vehicle::ColluderController controller(colluders, params.authority.t_fw,
                                         params.authority.t_ive);
  controller.set_targets(benign);

  auto visible = [&](const Uuid& target) {
    return !sa.ca().is_banned(target) && sa.record(target).trust_state != sa::TrustState::Banned;
  };

  std::vector<PopulationPoint> series;
  for (Seconds now = 0.0; now <= params.duration; now += params.step) {
    // Benign recovery: self-certify as soon as the red flag lapses.
    for (const auto& bvid : benign) {
      const auto& rec = sa.record(bvid);
      if (rec.trust_state == sa::TrustState::Banned && now >= rec.flag.expires_at) {
        if (sa.self_certify(bvid, now).ok) controller.requeue_target(bvid);
      }
    }
    sa.expire_flags(now);
    for (auto& [vid, batch] : sa.take_pending_certs()) members[idx.at(vid)].cert = batch[0];

    if (!colluders.empty()) {
      if (auto intent = controller.plan(now, visible)) {
        sa::VoteBallot ballot;
        ballot.voter_vid = intent->voter;
        const auto& tgt = members[idx.at(intent->target)];
        ballot.target_beacon.cert = tgt.cert.cert;
        ballot.target_beacon.timestamp = now;
        ballot.target_beacon.signature =
            scheme->sign(tgt.cert.private_key, pki::beacon_signed_payload(ballot.target_beacon));
        ballot.action = sa::VoteAction::Downvote;
        ballot.submitted_at = now;
        sa::sign_ballot(*scheme, members[idx.at(intent->voter)].keys.private_key, ballot);
        auto outcome = sa.process_vote(ballot, now);
        bool banned = outcome.flag_event == sa::FlagEvent::RedIssuedBan;
        Seconds next_ready = now + sa.record(intent->voter).tide_current;
        controller.on_result(*intent, outcome.accepted, banned, now, next_ready);
      }
    }

    PopulationPoint pt;
    pt.t = now;
    int active = 0;
    for (const auto& bvid : benign)
      if (sa.record(bvid).trust_state != sa::TrustState::Banned) ++active;
    pt.benign_active_pct =
        benign.empty() ? 100.0 : 100.0 * active / static_cast<double>(benign.size());
    int ready = 0;
    for (const auto& cvid : colluders) {
      const auto& rec = sa.record(cvid);
      if (now - rec.last_downvote_at >= rec.tide_current) ++ready;
    }
    pt.malicious_ready_pct =
        colluders.empty() ? 0.0 : 100.0 * ready / static_cast<double>(colluders.size());
    series.push_back(pt);
  }
  return series;
}

std::string population_csv(const std::vector<PopulationPoint>& series) {
  std::string out = "t,benign_active_pct,malicious_ready_pct\n";
  for (const auto& p : series) {
    char line[96];
    std::snprintf(line, sizeof line, "%.10g,%.10g,%.10g\n", p.t, p.benign_active_pct,
                  p.malicious_ready_pct);
    out += line;
  }
  return out;
}

PopulationPoint steady_state(const std::vector<PopulationPoint>& series, double tail_fraction) {
  if (series.empty()) throw ConfigError("steady_state: empty series");
  if (tail_fraction <= 0.0 || tail_fraction > 1.0) throw ConfigError("steady_state: fraction");
  auto start = static_cast<std::size_t>(
      static_cast<double>(series.size()) * (1.0 - tail_fraction));
  if (start >= series.size()) start = series.size() - 1;
  PopulationPoint avg;
  avg.t = series[start].t;
  for (std::size_t i = start; i < series.size(); ++i) {
    avg.benign_active_pct += series[i].benign_active_pct;
    avg.malicious_ready_pct += series[i].malicious_ready_pct;
  }
  auto n = static_cast<double>(series.size() - start);
  avg.benign_active_pct /= n;
  avg.malicious_ready_pct /= n;
  return avg;
}

}  // namespace cats::sim
