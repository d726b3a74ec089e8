#pragma once

#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "cats/pki.hpp"
#include "cats/uuid.hpp"

namespace cats::sa {

enum class TrustState : std::uint8_t { Trusted, Untrusted, Banned };
enum class VoteAction : std::uint8_t { Upvote, Downvote };
enum class VoteReason : std::uint8_t { InconsistentObservation, MajorityMinority };

const char* to_string(TrustState s);
const char* to_string(VoteAction a);

struct AuthorityParams {
  double n_thresh = 0.998;
  double score_step = 0.001;  // (1 - n_thresh) / n_downvoters
  double score_min = 0.0;
  Seconds t_fw = 20.0;
  Seconds t_ti_base = 7.0 * 86400.0;
  double t_ti_multiplier = 2.0;
  Seconds t_ive = 7.0 * 86400.0;
  Seconds t_ide_base = 14.0 * 86400.0;
  double t_ide_multiplier = 2.0;
  Seconds t_vote = 1.05;
  int cert_batch_size = 1;
  // Ablation switches.
  bool three_state = true;   // false: no Untrusted demotion (2-state variant)
  bool tide_scaling = true;  // false: T_IDE stays at base

  Seconds succession_window() const { return 2.0 * t_fw; }
};

// Demotion comparator, isolated: with score_step = (1 - n_thresh) / 2
// exactly two downvotes move a fresh vehicle to Untrusted. The epsilon
// absorbs accumulated step rounding (steps are ~1e-3, so 1e-9 is inert).
inline bool demotes(double score, double n_thresh) { return score <= n_thresh + 1e-9; }

// Discretized flagging timeline.
struct FlagClock {
  Seconds t_fw;
  std::int64_t window_of(Seconds t) const { return static_cast<std::int64_t>(std::floor(t / t_fw)); }
};

struct Flag {
  enum class Kind : std::uint8_t { None, Yellow, Red } kind = Kind::None;
  Seconds issued_at = 0.0;
  Seconds expires_at = 0.0;
  std::int64_t window = 0;   // flagging window at issue
  Uuid issued_by;            // downvoter that triggered the flag
};

struct VehicleRecord {
  Uuid vid;
  double score = 1.0;
  TrustState trust_state = TrustState::Trusted;
  Flag flag;
  int ban_count = 0;
  Seconds tide_current = 0.0;   // this vehicle's effective T_IDE as a voter
  Seconds tide_personal = 0.0;  // floor tide_current decays to; raised at ban time
  Seconds tti_current = 0.0;   // this vehicle's flag timeout
  // Voter-side downvote bookkeeping for tide scaling/decay.
  Seconds last_downvote_at = -std::numeric_limits<double>::infinity();
  Uuid last_downvote_target;
};

struct VoteBallot {
  Uuid voter_vid;
  pki::Beacon target_beacon;
  VoteAction action = VoteAction::Upvote;
  VoteReason reason = VoteReason::InconsistentObservation;
  Seconds submitted_at = 0.0;
  crypto::Bytes signature;  // under the voter's VIC key
};

crypto::Bytes ballot_signed_payload(const VoteBallot& ballot);
void sign_ballot(const crypto::SignatureScheme& scheme, crypto::BytesView vic_private_key,
                 VoteBallot& ballot);
bool authenticate_ballot(const crypto::SignatureScheme& scheme, crypto::BytesView vic_public_key,
                         const VoteBallot& ballot);

enum class RejectReason : std::uint8_t {
  UnknownIdentity,
  SelfVote,
  VoterNotTrusted,
  TargetBanned,
  StaleBeacon,
  IveLimit,
  IdeLimit,
};
const char* to_string(RejectReason r);

enum class FlagEvent : std::uint8_t { NoChange, YellowIssued, RedIssuedBan };

struct VoteOutcome {
  bool accepted = false;
  RejectReason reason = RejectReason::UnknownIdentity;  // when rejected
  Uuid target_vid;                                      // when resolvable
  TrustState target_state = TrustState::Trusted;        // after processing
  FlagEvent flag_event = FlagEvent::NoChange;
};

// Time-indexed upvote/downvote ledger. Only the most recent accepted
// time per key matters for any rate-limit decision, so entries collapse
// to last-seen maps plus a short per-target tail for ban attribution.
class VoteLedger {
 public:
  void record(VoteAction action, const Uuid& voter, const Uuid& target, Seconds at);

  // (voter, target) pair within `horizon` before `now`, per list.
  bool pair_within(VoteAction list, const Uuid& voter, const Uuid& target, Seconds now,
                   Seconds horizon) const;
  // (voter, *) downvote within `horizon` before `now`.
  bool voter_downvote_within(const Uuid& voter, Seconds now, Seconds horizon) const;

  // Accepted downvoters of `target` within `horizon` before `now`,
  // in acceptance order.
  std::vector<std::pair<Uuid, Seconds>> recent_downvoters(const Uuid& target, Seconds now,
                                                          Seconds horizon) const;

  void prune(Seconds now, Seconds horizon);
  std::size_t size() const;

 private:
  struct PairKey {
    Uuid a, b;
    bool operator==(const PairKey&) const = default;
  };
  struct PairHash {
    std::size_t operator()(const PairKey& k) const {
      return UuidHash{}(k.a) * 0x9e3779b97f4a7c15ULL + UuidHash{}(k.b);
    }
  };
  std::unordered_map<PairKey, Seconds, PairHash> last_up_;
  std::unordered_map<PairKey, Seconds, PairHash> last_down_;
  std::unordered_map<Uuid, Seconds> last_voter_down_;
  std::unordered_map<Uuid, std::deque<std::pair<Uuid, Seconds>>> target_down_tail_;
};

struct AuditEntry {
  Seconds time = 0.0;
  Uuid voter;
  Uuid target;
  VoteAction action = VoteAction::Upvote;
  bool accepted = false;
  std::string detail;  // reject reason or flag event
};

struct BanEvent {
  Uuid vid;
  Seconds time = 0.0;
  Uuid yellow_voter;
  Uuid red_voter;
  std::int64_t yellow_window = 0;
  std::int64_t red_window = 0;
};

// The Security Authority: one logical sequential state machine over a
// totally ordered ballot stream.
class SecurityAuthority {
 public:
  SecurityAuthority(AuthorityParams params, std::shared_ptr<crypto::SignatureScheme> scheme);

  // Registration (provisioning). Returns the identity record.
  pki::VehicleIdentity register_vehicle(const Uuid& vid, crypto::Bytes vic_public_key,
                                        Seconds now);

  VoteOutcome process_vote(const VoteBallot& ballot, Seconds now);

  FlagEvent record_downvote_flagging(const Uuid& target_vid, const Uuid& voter_vid, Seconds now);
  VehicleRecord& ban_vehicle(const Uuid& vid, Seconds now);

  struct SelfCertifyResult {
    bool ok = false;  // false: TooEarly
    TrustState state = TrustState::Banned;
  };
  SelfCertifyResult self_certify(const Uuid& vid, Seconds now);
  VehicleRecord& re_certify(const Uuid& vid, Seconds now);

  std::vector<Uuid> expire_flags(Seconds now);

  Seconds scale_tide(const Uuid& voter_vid, const Uuid& target_vid, Seconds now);

  // Revokes the vehicle's live certs and issues a fresh batch carrying
  // its current trust attribute. Throws pki::BannedVehicle when banned.
  std::vector<pki::IssuedCert> issue_trust_update(const Uuid& vid, Seconds now);

  // Cert batches issued since the last call, per vehicle (trust updates
  // and recovery paths). The simulator polls this each slot.
  std::vector<std::pair<Uuid, std::vector<pki::IssuedCert>>> take_pending_certs();

  const VehicleRecord& record(const Uuid& vid) const;
  VehicleRecord& record_mut(const Uuid& vid);
  bool has_record(const Uuid& vid) const { return records_.contains(vid); }

  pki::CertificateAuthority& ca() { return ca_; }
  const pki::CertificateAuthority& ca() const { return ca_; }
  const AuthorityParams& params() const { return params_; }
  const VoteLedger& ledger() const { return ledger_; }
  FlagClock flag_clock() const { return {params_.t_fw}; }

  const std::vector<AuditEntry>& audit_log() const { return audit_; }
  const std::vector<BanEvent>& ban_events() const { return ban_events_; }
  void clear_audit_log() { audit_.clear(); }

  // Audit CSV: time,voter,target,action,outcome,reason
  std::string audit_csv() const;

 private:
  void apply_trust_determination(VehicleRecord& rec, Seconds now);
  void set_trust_state(VehicleRecord& rec, TrustState next, Seconds now);
  bool flag_active(const Flag& f, Seconds now) const {
    return f.kind != Flag::Kind::None && now < f.expires_at;
  }

  AuthorityParams params_;
  std::shared_ptr<crypto::SignatureScheme> scheme_;
  pki::CertificateAuthority ca_;
  std::unordered_map<Uuid, VehicleRecord> records_;
  VoteLedger ledger_;
  std::vector<AuditEntry> audit_;
  std::vector<BanEvent> ban_events_;
  std::vector<std::pair<Uuid, std::vector<pki::IssuedCert>>> pending_certs_;
  int accepts_since_prune_ = 0;
};

}  // namespace cats::sa
