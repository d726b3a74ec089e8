#include "cats/authority.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "cats/wire.hpp"

namespace cats::sa {

const char* to_string(TrustState s) {
  switch (s) {
    case TrustState::Trusted: return "Trusted";
    case TrustState::Untrusted: return "Untrusted";
    case TrustState::Banned: return "Banned";
  }
  return "?";
}

const char* to_string(VoteAction a) {
  return a == VoteAction::Upvote ? "Upvote" : "Downvote";
}

const char* to_string(RejectReason r) {
  switch (r) {
    case RejectReason::UnknownIdentity: return "UnknownIdentity";
    case RejectReason::SelfVote: return "SelfVote";
    case RejectReason::VoterNotTrusted: return "VoterNotTrusted";
    case RejectReason::TargetBanned: return "TargetBanned";
    case RejectReason::StaleBeacon: return "StaleBeacon";
    case RejectReason::IveLimit: return "IveLimit";
    case RejectReason::IdeLimit: return "IdeLimit";
  }
  return "?";
}

crypto::Bytes ballot_signed_payload(const VoteBallot& ballot) {
  wire::Writer w;
  w.uuid(0x30, ballot.voter_vid);
  w.field(0x31, pki::encode_beacon(ballot.target_beacon));
  w.u8(0x32, static_cast<std::uint8_t>(ballot.action));
  w.u8(0x33, static_cast<std::uint8_t>(ballot.reason));
  w.f64(0x34, ballot.submitted_at);
  return w.take();
}

void sign_ballot(const crypto::SignatureScheme& scheme, crypto::BytesView vic_private_key,
                 VoteBallot& ballot) {
  ballot.signature = scheme.sign(vic_private_key, ballot_signed_payload(ballot));
}

bool authenticate_ballot(const crypto::SignatureScheme& scheme, crypto::BytesView vic_public_key,
                         const VoteBallot& ballot) {
  return scheme.verify(vic_public_key, ballot_signed_payload(ballot), ballot.signature);
}

void VoteLedger::record(VoteAction action, const Uuid& voter, const Uuid& target, Seconds at) {
  if (action == VoteAction::Upvote) {
    last_up_[{voter, target}] = at;
    return;
  }
  last_down_[{voter, target}] = at;
  last_voter_down_[voter] = at;
  auto& tail = target_down_tail_[target];
  tail.emplace_back(voter, at);
  while (!tail.empty() && tail.front().second < at - 86400.0) tail.pop_front();
}

bool VoteLedger::pair_within(VoteAction list, const Uuid& voter, const Uuid& target, Seconds now,
                             Seconds horizon) const {
  const auto& m = list == VoteAction::Upvote ? last_up_ : last_down_;
  auto it = m.find({voter, target});
  return it != m.end() && now - it->second < horizon;
}

bool VoteLedger::voter_downvote_within(const Uuid& voter, Seconds now, Seconds horizon) const {
  auto it = last_voter_down_.find(voter);
  return it != last_voter_down_.end() && now - it->second < horizon;
}

std::vector<std::pair<Uuid, Seconds>> VoteLedger::recent_downvoters(const Uuid& target,
                                                                    Seconds now,
                                                                    Seconds horizon) const {
  std::vector<std::pair<Uuid, Seconds>> out;
  auto it = target_down_tail_.find(target);
  if (it == target_down_tail_.end()) return out;
  for (const auto& [voter, at] : it->second)
    if (now - at <= horizon) out.emplace_back(voter, at);
  return out;
}

void VoteLedger::prune(Seconds now, Seconds horizon) {
  std::erase_if(last_up_, [&](const auto& kv) { return now - kv.second >= horizon; });
  std::erase_if(last_down_, [&](const auto& kv) { return now - kv.second >= horizon; });
  std::erase_if(last_voter_down_, [&](const auto& kv) { return now - kv.second >= horizon; });
  for (auto& [_, tail] : target_down_tail_)
    while (!tail.empty() && now - tail.front().second >= horizon) tail.pop_front();
  std::erase_if(target_down_tail_, [](const auto& kv) { return kv.second.empty(); });
}

std::size_t VoteLedger::size() const {
  return last_up_.size() + last_down_.size();
}

SecurityAuthority::SecurityAuthority(AuthorityParams params,
                                     std::shared_ptr<crypto::SignatureScheme> scheme)
    : params_(params), scheme_(std::move(scheme)), ca_(scheme_) {}

pki::VehicleIdentity SecurityAuthority::register_vehicle(const Uuid& vid,
                                                         crypto::Bytes vic_public_key,
                                                         Seconds now) {
  pki::VehicleIdentity id = ca_.issue_vic(vid, std::move(vic_public_key), now);
  VehicleRecord rec;
  rec.vid = vid;
  rec.tide_current = params_.t_ide_base;
  rec.tide_personal = params_.t_ide_base;
  rec.tti_current = params_.t_ti_base;
  records_.emplace(vid, rec);
  auto certs = ca_.issue_vpc_batch(vid, pki::CertTrust::Trusted, params_.cert_batch_size, now);
  pending_certs_.emplace_back(vid, std::move(certs));
  return id;
}

const VehicleRecord& SecurityAuthority::record(const Uuid& vid) const {
  auto it = records_.find(vid);
  if (it == records_.end()) throw pki::UnknownVehicle("no record for vid");
  return it->second;
}

VehicleRecord& SecurityAuthority::record_mut(const Uuid& vid) {
  auto it = records_.find(vid);
  if (it == records_.end()) throw pki::UnknownVehicle("no record for vid");
  return it->second;
}

VoteOutcome SecurityAuthority::process_vote(const VoteBallot& ballot, Seconds now) {
  VoteOutcome out;
  auto reject = [&](RejectReason r) {
    out.accepted = false;
    out.reason = r;
    audit_.push_back({now, ballot.voter_vid, out.target_vid, ballot.action, false, to_string(r)});
    return out;
  };

  // Identities (Alg. lines 1-2).
  auto voter_it = records_.find(ballot.voter_vid);
  if (voter_it == records_.end()) return reject(RejectReason::UnknownIdentity);
  auto owner = ca_.owner_of(ballot.target_beacon.cert.pid);
  if (!owner) return reject(RejectReason::UnknownIdentity);
  out.target_vid = *owner;
  if (ballot.voter_vid == *owner) return reject(RejectReason::SelfVote);
  VehicleRecord& voter = voter_it->second;
  if (voter.trust_state != TrustState::Trusted) return reject(RejectReason::VoterNotTrusted);

  VehicleRecord& target = record_mut(*owner);
  if (target.trust_state == TrustState::Banned) return reject(RejectReason::TargetBanned);

  // Freshness (lines 3-5).
  if (now - ballot.target_beacon.timestamp > params_.t_vote)
    return reject(RejectReason::StaleBeacon);

  // Rate limits (lines 6-18).
  if (ballot.action == VoteAction::Upvote) {
    if (ledger_.pair_within(VoteAction::Upvote, ballot.voter_vid, *owner, now, params_.t_ive))
      return reject(RejectReason::IveLimit);
  } else {
    if (ledger_.pair_within(VoteAction::Downvote, ballot.voter_vid, *owner, now, params_.t_ive))
      return reject(RejectReason::IveLimit);
    if (ledger_.voter_downvote_within(ballot.voter_vid, now, voter.tide_current))
      return reject(RejectReason::IdeLimit);
  }

  // Accept.
  ledger_.record(ballot.action, ballot.voter_vid, *owner, now);
  out.accepted = true;
  if (ballot.action == VoteAction::Upvote) {
    target.score = std::min(1.0, target.score + params_.score_step);
  } else {
    scale_tide(ballot.voter_vid, *owner, now);
    target.score = std::max(params_.score_min, target.score - params_.score_step);
    out.flag_event = record_downvote_flagging(*owner, ballot.voter_vid, now);
  }
  // Trust-state determination runs after every accepted vote; bans are
  // final for this ballot.
  if (target.trust_state != TrustState::Banned) apply_trust_determination(target, now);
  out.target_state = target.trust_state;

  const char* detail = ballot.action == VoteAction::Upvote ? "Accepted"
                       : out.flag_event == FlagEvent::RedIssuedBan
                           ? "Accepted/RedIssuedBan"
                           : (out.flag_event == FlagEvent::YellowIssued ? "Accepted/YellowIssued"
                                                                        : "Accepted");
  audit_.push_back({now, ballot.voter_vid, *owner, ballot.action, true, detail});

  if (++accepts_since_prune_ >= 4096) {
    Seconds max_tide = params_.t_ide_base;
    for (const auto& [_, r] : records_) max_tide = std::max(max_tide, r.tide_current);
    ledger_.prune(now, std::max(params_.t_ive, max_tide) + 86400.0);
    accepts_since_prune_ = 0;
  }
  return out;
}

FlagEvent SecurityAuthority::record_downvote_flagging(const Uuid& target_vid,
                                                      const Uuid& voter_vid, Seconds now) {
  VehicleRecord& rec = record_mut(target_vid);
  FlagClock clock = flag_clock();

  if (!flag_active(rec.flag, now)) {
    rec.flag = {Flag::Kind::Yellow, now, now + rec.tti_current, clock.window_of(now), voter_vid};
    return FlagEvent::YellowIssued;
  }
  if (rec.flag.kind == Flag::Kind::Yellow) {
    if (clock.window_of(now) > rec.flag.window) {
      BanEvent ev;
      ev.vid = target_vid;
      ev.time = now;
      ev.yellow_voter = rec.flag.issued_by;
      ev.yellow_window = rec.flag.window;
      ev.red_voter = voter_vid;
      ev.red_window = clock.window_of(now);
      rec.flag = {Flag::Kind::Red, now, now + rec.tti_current, clock.window_of(now), voter_vid};
      ban_vehicle(target_vid, now);
      ban_events_.push_back(ev);
      return FlagEvent::RedIssuedBan;
    }
    return FlagEvent::NoChange;  // same window: stays yellow
  }
  return FlagEvent::NoChange;  // already red (banned)
}

VehicleRecord& SecurityAuthority::ban_vehicle(const Uuid& vid, Seconds now) {
  VehicleRecord& rec = record_mut(vid);
  if (rec.flag.kind != Flag::Kind::Red) {
    rec.flag = {Flag::Kind::Red, now, now + rec.tti_current, flag_clock().window_of(now), Uuid{}};
  }
  rec.trust_state = TrustState::Banned;
  rec.score = params_.score_min;
  // The red flag just set uses the pre-increment timeout; the counter and
  // the lengthened timeout apply from the next ban.
  rec.ban_count += 1;
  rec.tti_current = params_.t_ti_base * std::pow(params_.t_ti_multiplier, rec.ban_count);
  ca_.revoke_vpcs(vid, now);
  ca_.set_banned(vid, true);

  // Coordinated-ban deterrent: every voter whose accepted downvote on
  // this target falls in the succession window gets its inter-downvote
  // epoch lengthened.
  if (params_.tide_scaling) {
    for (const auto& [voter, _] : ledger_.recent_downvoters(vid, now, params_.succession_window())) {
      auto it = records_.find(voter);
      if (it == records_.end()) continue;
      it->second.tide_personal *= params_.t_ide_multiplier;
      it->second.tide_current *= params_.t_ide_multiplier;
    }
  }
  return rec;
}

SecurityAuthority::SelfCertifyResult SecurityAuthority::self_certify(const Uuid& vid,
                                                                     Seconds now) {
  VehicleRecord& rec = record_mut(vid);
  if (rec.trust_state != TrustState::Banned)
    throw std::invalid_argument("self_certify: vehicle not banned");
  if (now < rec.flag.expires_at) return {false, TrustState::Banned};
  rec.flag = {};
  rec.score = params_.score_min;
  rec.trust_state = TrustState::Untrusted;
  ca_.set_banned(vid, false);
  auto certs = issue_trust_update(vid, now);
  (void)certs;
  return {true, TrustState::Untrusted};
}

VehicleRecord& SecurityAuthority::re_certify(const Uuid& vid, Seconds now) {
  VehicleRecord& rec = record_mut(vid);
  rec.flag = {};
  rec.score = 1.0;
  rec.ban_count = 0;
  rec.tti_current = params_.t_ti_base;
  rec.trust_state = TrustState::Trusted;
  ca_.set_banned(vid, false);
  issue_trust_update(vid, now);
  return rec;
}

std::vector<Uuid> SecurityAuthority::expire_flags(Seconds now) {
  std::vector<Uuid> lapsed;
  for (auto& [vid, rec] : records_) {
    if (rec.flag.kind == Flag::Kind::None) continue;
    if (now < rec.flag.expires_at) continue;
    lapsed.push_back(vid);
    if (rec.flag.kind == Flag::Kind::Yellow) rec.flag = {};
    // Expired red flags stay on record; the vehicle becomes eligible for
    // self-certification but remains banned until it takes it.
  }
  std::sort(lapsed.begin(), lapsed.end());
  return lapsed;
}

Seconds SecurityAuthority::scale_tide(const Uuid& voter_vid, const Uuid& target_vid,
                                      Seconds now) {
  VehicleRecord& rec = record_mut(voter_vid);
  // Repeat-rule compounding decays to the personal floor; ban-time
  // scaling of the floor itself never decays within a run.
  if (now - rec.last_downvote_at >= rec.tide_current) rec.tide_current = rec.tide_personal;
  if (params_.tide_scaling && rec.last_downvote_target == target_vid &&
      !rec.last_downvote_target.is_nil() &&
      now - rec.last_downvote_at <= params_.succession_window()) {
    rec.tide_current *= params_.t_ide_multiplier;
  }
  rec.last_downvote_at = now;
  rec.last_downvote_target = target_vid;
  return rec.tide_current;
}

std::vector<pki::IssuedCert> SecurityAuthority::issue_trust_update(const Uuid& vid, Seconds now) {
  VehicleRecord& rec = record_mut(vid);
  if (rec.trust_state == TrustState::Banned)
    throw pki::BannedVehicle("no issuance while banned");
  ca_.revoke_vpcs(vid, now);
  pki::CertTrust trust = rec.trust_state == TrustState::Trusted ? pki::CertTrust::Trusted
                                                                : pki::CertTrust::Untrusted;
  auto certs = ca_.issue_vpc_batch(vid, trust, params_.cert_batch_size, now);
  pending_certs_.emplace_back(vid, certs);
  return certs;
}

std::vector<std::pair<Uuid, std::vector<pki::IssuedCert>>> SecurityAuthority::take_pending_certs() {
  return std::exchange(pending_certs_, {});
}

void SecurityAuthority::apply_trust_determination(VehicleRecord& rec, Seconds now) {
  TrustState next = TrustState::Trusted;
  if (params_.three_state && demotes(rec.score, params_.n_thresh)) next = TrustState::Untrusted;
  set_trust_state(rec, next, now);
}

void SecurityAuthority::set_trust_state(VehicleRecord& rec, TrustState next, Seconds now) {
  if (rec.trust_state == next) return;
  rec.trust_state = next;
  issue_trust_update(rec.vid, now);
}

std::string SecurityAuthority::audit_csv() const {
  std::ostringstream out;
  out << "time,voter,target,action,outcome,reason\n";
  for (const auto& e : audit_) {
    out << e.time << ',' << e.voter.to_string() << ',' << e.target.to_string() << ','
        << to_string(e.action) << ',' << (e.accepted ? "accepted" : "rejected") << ',' << e.detail
        << '\n';
  }
  return out.str();
}

}  // namespace cats::sa
