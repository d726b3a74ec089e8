#include "cats/vehicle.hpp"

#include <algorithm>
#include <cmath>

namespace cats::vehicle {

namespace {

double dist2(double ax, double ay, double bx, double by) {
  double dx = ax - bx, dy = ay - by;
  return dx * dx + dy * dy;
}

double u01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

VerificationOutcome verify_observation(const Position& receiver, const ObjectReport& report,
                                       std::span<const Position> ground_truth,
                                       const PerceptionParams& params) {
  double r2 = params.sensor_radius * params.sensor_radius;
  if (dist2(receiver.x, receiver.y, report.x, report.y) > r2)
    return VerificationOutcome::Unconfirmed;
  double tol2 = params.match_tolerance * params.match_tolerance;
  for (const auto& obj : ground_truth)
    if (dist2(obj.x, obj.y, report.x, report.y) <= tol2) return VerificationOutcome::ConfirmedValid;
  return VerificationOutcome::ConfirmedInconsistent;
}

VoteChoice decide_vote(std::span<const VerificationOutcome> outcomes) {
  bool any_valid = false;
  for (auto o : outcomes) {
    if (o == VerificationOutcome::ConfirmedInconsistent) return VoteChoice::Downvote;
    if (o == VerificationOutcome::ConfirmedValid) any_valid = true;
  }
  return any_valid ? VoteChoice::Upvote : VoteChoice::NoVote;
}

FilterResult majority_filter(const std::vector<SenderReports>& by_sender,
                             const std::unordered_map<Uuid, Position>& sender_positions,
                             const PerceptionParams& params) {
  struct Cluster {
    double x, y;  // representative (first report)
    std::vector<std::pair<Uuid, ObjectReport>> members;
    std::vector<Uuid> supporters;  // distinct senders
  };
  std::vector<Cluster> clusters;
  double ctol2 = params.cluster_tolerance * params.cluster_tolerance;

  for (const auto& sr : by_sender) {
    for (const auto& rep : sr.reports) {
      Cluster* home = nullptr;
      for (auto& c : clusters) {
        if (dist2(c.x, c.y, rep.x, rep.y) <= ctol2) {
          home = &c;
          break;
        }
      }
      if (!home) {
        clusters.push_back({rep.x, rep.y, {}, {}});
        home = &clusters.back();
      }
      home->members.emplace_back(sr.sender, rep);
      if (std::find(home->supporters.begin(), home->supporters.end(), sr.sender) ==
          home->supporters.end())
        home->supporters.push_back(sr.sender);
    }
  }

  FilterResult out;
  double r2 = params.sensor_radius * params.sensor_radius;
  for (const auto& c : clusters) {
    int covisible = 0;
    for (const auto& [sender, pos] : sender_positions)
      if (dist2(pos.x, pos.y, c.x, c.y) <= r2) ++covisible;
    bool accepted;
    if (covisible >= params.min_senders) {
      accepted = static_cast<int>(c.supporters.size()) > covisible / 2;
    } else {
      accepted = true;  // reputation-only fallback
    }
    auto& sink = accepted ? out.accepted : out.rejected;
    sink.insert(sink.end(), c.members.begin(), c.members.end());
    out.decision_covis.insert(out.decision_covis.end(), c.members.size(), covisible);
  }
  return out;
}

bool in_bad_phase(const BehaviorProfile& profile, Seconds now) {
  if (now < profile.activation_at) return false;
  switch (profile.kind) {
    case BehaviorKind::BadSensor:
      return true;
    case BehaviorKind::FlipFlop: {
      double phase = std::fmod(now - profile.activation_at, profile.flipflop_period);
      return phase < 0.5 * profile.flipflop_period;
    }
    default:
      return false;
  }
}

std::vector<ObjectReport> generate_share(const BehaviorProfile& profile, const Position& self,
                                         std::vector<ObjectReport> own_sensing, Seconds now,
                                         const PerceptionParams& params, std::mt19937_64& rng) {
  if (!in_bad_phase(profile, now)) return own_sensing;

  // Drop one true object.
  if (!own_sensing.empty())
    own_sensing.erase(own_sensing.begin() +
                      static_cast<std::ptrdiff_t>(rng() % own_sensing.size()));

  // Inject a phantom at a uniform in-range position, away from anything
  // the attacker itself can see (so the claim is provably false).
  ObjectReport phantom;
  phantom.object_id = 0;
  phantom.claimed_at = now;
  double tol2 = params.match_tolerance * params.match_tolerance;
  for (int attempt = 0; attempt < 32; ++attempt) {
    double angle = 2.0 * M_PI * u01(rng);
    double radius = params.sensor_radius * std::sqrt(u01(rng));
    phantom.x = self.x + radius * std::cos(angle);
    phantom.y = self.y + radius * std::sin(angle);
    bool clashes = false;
    for (const auto& o : own_sensing)
      if (dist2(o.x, o.y, phantom.x, phantom.y) <= 4.0 * tol2) clashes = true;
    if (!clashes) break;
  }
  own_sensing.push_back(phantom);
  return own_sensing;
}

VoteChoice apply_vote_behavior(const BehaviorProfile& profile, VoteChoice honest, Seconds now) {
  if (profile.kind != BehaviorKind::BadSensor || now < profile.activation_at) return honest;
  // Inverted voting: downvote the honest, prop up nothing, and spend the
  // (rate-limited) downvote even when nothing was verifiable.
  switch (honest) {
    case VoteChoice::Upvote: return VoteChoice::Downvote;
    case VoteChoice::Downvote: return VoteChoice::Upvote;
    case VoteChoice::NoVote: return VoteChoice::Downvote;
  }
  return honest;
}

ColluderController::ColluderController(std::vector<Uuid> colluders, Seconds t_fw,
                                       Seconds pair_retry)
    : t_fw_(t_fw), pair_retry_(pair_retry), colluders_(std::move(colluders)) {
  for (const auto& c : colluders_) ready_at_[c] = 0.0;
}

void ColluderController::set_targets(std::vector<Uuid> targets) {
  targets_.assign(targets.begin(), targets.end());
}

void ColluderController::requeue_target(const Uuid& target) { targets_.push_back(target); }

std::optional<ColluderController::Intent> ColluderController::plan(
    Seconds now, const std::function<bool(const Uuid&)>& visible) {
  if (inflight_) return std::nullopt;
  if (!current_target_) {
    if (targets_.empty()) return std::nullopt;
    current_target_ = targets_.front();
    targets_.pop_front();
    first_window_ = std::nullopt;
  }
  if (first_window_ &&
      static_cast<std::int64_t>(std::floor(now / t_fw_)) <= *first_window_)
    return std::nullopt;  // the kill shot must land in a later window
  if (!visible(*current_target_)) return std::nullopt;

  bool any_unblocked = false;
  for (const auto& voter : colluders_) {
    if (voter == *current_target_) continue;
    auto rest = pair_rest_.find({voter, *current_target_});
    if (rest != pair_rest_.end() && now < rest->second) continue;
    any_unblocked = true;
    if (ready_at_.at(voter) <= now) {
      inflight_ = Intent{voter, *current_target_};
      return inflight_;
    }
  }
  if (!any_unblocked) {
    // Every pairing against this target was refused; rotate it to the back
    // and let the pair limits age out.
    targets_.push_back(*current_target_);
    current_target_.reset();
    first_window_.reset();
  }
  return std::nullopt;
}

void ColluderController::on_result(const Intent& intent, bool accepted, bool target_banned,
                                   Seconds now, Seconds next_ready_at) {
  inflight_.reset();
  pair_rest_[{intent.voter, intent.target}] = now + pair_retry_;
  if (!accepted) return;
  ready_at_[intent.voter] = next_ready_at;
  if (target_banned) {
    current_target_.reset();
    first_window_.reset();
  } else if (!first_window_) {
    first_window_ = static_cast<std::int64_t>(std::floor(now / t_fw_));
  }
}

}  // namespace cats::vehicle
