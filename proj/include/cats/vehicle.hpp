#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <unordered_map>
#include <vector>

#include "cats/report.hpp"
#include "cats/uuid.hpp"

namespace cats::vehicle {

enum class VerificationOutcome : std::uint8_t {
  ConfirmedValid,
  ConfirmedInconsistent,
  Unconfirmed,
};

enum class VoteChoice : std::uint8_t { Upvote, Downvote, NoVote };

struct PerceptionParams {
  double sensor_radius = 30.0;
  double match_tolerance = 1.0;
  double cluster_tolerance = 2.0;
  int min_senders = 3;
};

struct Position {
  double x = 0.0;
  double y = 0.0;
};

// Receiver-side consistency check of one claimed object against the
// receiver's own (perfect-disk) sensing of ground truth.
VerificationOutcome verify_observation(const Position& receiver, const ObjectReport& report,
                                       std::span<const Position> ground_truth,
                                       const PerceptionParams& params);

// Per-(sender, slot) vote from that sender's report outcomes.
// Downvote dominates: one provably false claim outweighs true ones.
VoteChoice decide_vote(std::span<const VerificationOutcome> outcomes);

struct SenderReports {
  Uuid sender;  // vid in simulation, pid on the wire
  std::vector<ObjectReport> reports;
};

struct FilterResult {
  std::vector<std::pair<Uuid, ObjectReport>> accepted;
  std::vector<std::pair<Uuid, ObjectReport>> rejected;
  // Per routed report: trusted senders co-visible with its cluster.
  // This is the n each accept/reject decision was taken under.
  std::vector<int> decision_covis;
};

// Majority view over already-TrustedData reports. Claims are clustered
// by position; a claim with >= min_senders co-visible trusted senders is
// accepted iff strictly more than floor(m/2) of them report it. Sparser
// claims fall back to reputation-only acceptance.
FilterResult majority_filter(const std::vector<SenderReports>& by_sender,
                             const std::unordered_map<Uuid, Position>& sender_positions,
                             const PerceptionParams& params);

enum class BehaviorKind : std::uint8_t {
  Honest,
  BadSensor,
  FlipFlop,
  DownvoteColluder,
  UpvoteColluder,
};

struct BehaviorProfile {
  BehaviorKind kind = BehaviorKind::Honest;
  Seconds activation_at = 0.0;
  Seconds flipflop_period = 60.0;  // 50% duty cycle
};

// True when the profile corrupts its payload at `now`.
bool in_bad_phase(const BehaviorProfile& profile, Seconds now);

// Payload for this slot. own_sensing is the ground truth within sensor
// range. BadSensor (active) injects one phantom at a uniformly random
// in-range position and drops one true object; FlipFlop does the same
// during the bad half of its period.
std::vector<ObjectReport> generate_share(const BehaviorProfile& profile, const Position& self,
                                         std::vector<ObjectReport> own_sensing, Seconds now,
                                         const PerceptionParams& params, std::mt19937_64& rng);

// Vote emitted on the wire after the profile's (mis)behavior is applied:
// active bad sensors invert their honest decision and downvote peers;
// flip-floppers vote truthfully for stealth.
VoteChoice apply_vote_behavior(const BehaviorProfile& profile, VoteChoice honest, Seconds now);

// Coordinates downvote colluders: pairs of voters spend their single
// per-T_IDE downvote on benign targets, one per flagging window, so each
// target collects two downvotes in distinct windows and is banned.
class ColluderController {
 public:
  // pair_retry: how long a (voter, target) pairing rests after the SA
  // refuses or spends it (the per-pair vote limit).
  ColluderController(std::vector<Uuid> colluders, Seconds t_fw, Seconds pair_retry);

  void set_targets(std::vector<Uuid> targets);  // benign victims, cycled
  // Target recovered / re-targetable again.
  void requeue_target(const Uuid& target);

  struct Intent {
    Uuid voter;
    Uuid target;
  };
  // At most one downvote intent per slot; visible(target) gates on
  // beacon availability.
  std::optional<Intent> plan(Seconds now, const std::function<bool(const Uuid&)>& visible);

  // Feedback from the SA. next_ready_at = now + voter's tide on accept.
  void on_result(const Intent& intent, bool accepted, bool target_banned, Seconds now,
                 Seconds next_ready_at);

  std::size_t pending_targets() const { return targets_.size(); }

 private:
  Seconds t_fw_;
  Seconds pair_retry_;
  std::vector<Uuid> colluders_;
  std::unordered_map<Uuid, Seconds> ready_at_;
  std::map<std::pair<Uuid, Uuid>, Seconds> pair_rest_;  // (voter, target) -> retry at
  std::deque<Uuid> targets_;
  // In-flight attack on the current target.
  std::optional<Uuid> current_target_;
  std::optional<std::int64_t> first_window_;
  std::optional<Intent> inflight_;
};

}  // namespace cats::vehicle
