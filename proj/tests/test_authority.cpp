#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <random>
#include <unordered_map>

#include "cats/authority.hpp"

using namespace cats;
using namespace cats::sa;

namespace {

constexpr double kDay = 86400.0;

struct Fixture {
  std::shared_ptr<crypto::SignatureScheme> scheme;
  SecurityAuthority auth;
  std::unordered_map<Uuid, crypto::KeyPair> keys;
  std::unordered_map<Uuid, pki::IssuedCert> latest_cert;

  explicit Fixture(AuthorityParams p = {}, std::uint64_t seed = 7)
      : scheme(crypto::make_fake_scheme(seed)), auth(p, scheme) {}

  Uuid add(std::uint64_t n, Seconds now = 0.0) {
    Uuid v = Uuid::from_u64(n);
    auto kp = scheme->generate_keypair();
    keys[v] = kp;
    auth.register_vehicle(v, kp.public_key, now);
    refresh_certs();
    return v;
  }

  void refresh_certs() {
    for (auto& [v, batch] : auth.take_pending_certs())
      if (!batch.empty()) latest_cert[v] = batch.front();
  }

  pki::Beacon beacon(const Uuid& target, Seconds ts) {
    refresh_certs();
    pki::Beacon b;
    b.cert = latest_cert.at(target).cert;
    b.timestamp = ts;
    b.signature = scheme->sign(latest_cert.at(target).private_key, pki::beacon_signed_payload(b));
    return b;
  }

  VoteBallot ballot(const Uuid& voter, const Uuid& target, VoteAction a, Seconds now) {
    VoteBallot bal;
    bal.voter_vid = voter;
    bal.target_beacon = beacon(target, now);
    bal.action = a;
    bal.submitted_at = now;
    sign_ballot(*scheme, keys.at(voter).private_key, bal);
    return bal;
  }

  VoteOutcome vote(const Uuid& voter, const Uuid& target, VoteAction a, Seconds now) {
    return auth.process_vote(ballot(voter, target, a, now), now);
  }
};

}  // namespace

TEST_CASE("ballot signing authenticates under the voter VIC") {
  Fixture f;
  auto a = f.add(1), b = f.add(2);
  auto bal = f.ballot(a, b, VoteAction::Downvote, 5.0);
  CHECK(authenticate_ballot(*f.scheme, f.keys.at(a).public_key, bal));
  auto tampered = bal;
  tampered.action = VoteAction::Upvote;
  CHECK_FALSE(authenticate_ballot(*f.scheme, f.keys.at(a).public_key, tampered));
  CHECK_FALSE(authenticate_ballot(*f.scheme, f.keys.at(b).public_key, bal));
}

TEST_CASE("fresh upvote is accepted and adjusts score") {
  Fixture f;
  auto a = f.add(1), b = f.add(2), c = f.add(3);
  // Pull b below 1.0 first so the upvote increment is visible.
  CHECK(f.vote(c, b, VoteAction::Downvote, 10.0).accepted);
  CHECK(f.auth.record(b).score == doctest::Approx(0.999));

  auto out = f.vote(a, b, VoteAction::Upvote, 11.0);
  CHECK(out.accepted);
  CHECK(f.auth.record(b).score == doctest::Approx(1.0));
  CHECK(out.target_state == TrustState::Trusted);

  // Score clamps at 1.0.
  auto d = f.add(4);
  CHECK(f.vote(d, b, VoteAction::Upvote, 12.0).accepted);
  CHECK(f.auth.record(b).score == doctest::Approx(1.0));
}

TEST_CASE("reject reasons") {
  Fixture f;
  auto a = f.add(1), b = f.add(2), c = f.add(3);

  SUBCASE("unknown voter") {
    VoteBallot bal;
    bal.voter_vid = Uuid::from_u64(99);
    bal.target_beacon = f.beacon(b, 5.0);
    bal.action = VoteAction::Upvote;
    auto out = f.auth.process_vote(bal, 5.0);
    CHECK_FALSE(out.accepted);
    CHECK(out.reason == RejectReason::UnknownIdentity);
  }
  SUBCASE("unknown target pid") {
    auto bal = f.ballot(a, b, VoteAction::Upvote, 5.0);
    bal.target_beacon.cert.pid = Uuid::from_u64(12345);
    auto out = f.auth.process_vote(bal, 5.0);
    CHECK_FALSE(out.accepted);
    CHECK(out.reason == RejectReason::UnknownIdentity);
  }
  SUBCASE("self vote") {
    auto out = f.vote(a, a, VoteAction::Upvote, 5.0);
    CHECK_FALSE(out.accepted);
    CHECK(out.reason == RejectReason::SelfVote);
  }
  SUBCASE("stale beacon: timestamp now - 2*t_vote") {
    Seconds now = 100.0;
    auto bal = f.ballot(a, b, VoteAction::Upvote, now - 2.0 * f.auth.params().t_vote);
    auto out = f.auth.process_vote(bal, now);
    CHECK_FALSE(out.accepted);
    CHECK(out.reason == RejectReason::StaleBeacon);
  }
  SUBCASE("ide limit: voter downvoted someone 1 s ago") {
    CHECK(f.vote(a, b, VoteAction::Downvote, 10.0).accepted);
    auto out = f.vote(a, c, VoteAction::Downvote, 11.0);
    CHECK_FALSE(out.accepted);
    CHECK(out.reason == RejectReason::IdeLimit);
  }
  SUBCASE("ive limit: repeat upvote of the same pair") {
    CHECK(f.vote(a, b, VoteAction::Upvote, 10.0).accepted);
    auto out = f.vote(a, b, VoteAction::Upvote, 12.0);
    CHECK_FALSE(out.accepted);
    CHECK(out.reason == RejectReason::IveLimit);
    // A different voter is unaffected.
    CHECK(f.vote(c, b, VoteAction::Upvote, 12.0).accepted);
  }
  SUBCASE("untrusted voter") {
    // Demote a with two downvotes in one window.
    CHECK(f.vote(b, a, VoteAction::Downvote, 10.0).accepted);
    CHECK(f.vote(c, a, VoteAction::Downvote, 11.0).accepted);
    CHECK(f.auth.record(a).trust_state == TrustState::Untrusted);
    auto out = f.vote(a, b, VoteAction::Upvote, 12.0);
    CHECK_FALSE(out.accepted);
    CHECK(out.reason == RejectReason::VoterNotTrusted);
  }
}

TEST_CASE("two downvotes from distinct voters demote to Untrusted") {
  Fixture f;
  auto a = f.add(1), b = f.add(2), t = f.add(3);
  // Same flagging window: no ban, only demotion.
  auto o1 = f.vote(a, t, VoteAction::Downvote, 10.0);
  CHECK(o1.accepted);
  CHECK(o1.target_state == TrustState::Trusted);  // 0.999 > 0.998
  CHECK(o1.flag_event == FlagEvent::YellowIssued);

  auto o2 = f.vote(b, t, VoteAction::Downvote, 11.0);
  CHECK(o2.accepted);
  CHECK(o2.target_state == TrustState::Untrusted);  // 0.998 <= 0.998
  CHECK(o2.flag_event == FlagEvent::NoChange);
  CHECK(f.auth.record(t).flag.kind == Flag::Kind::Yellow);
}

TEST_CASE("downvote in a later window escalates yellow to red and bans") {
  Fixture f;
  auto a = f.add(1), b = f.add(2), t = f.add(3);

  auto o1 = f.vote(a, t, VoteAction::Downvote, 1718.0);
  CHECK(o1.flag_event == FlagEvent::YellowIssued);
  CHECK(f.auth.flag_clock().window_of(1718.0) == 85);

  auto o2 = f.vote(b, t, VoteAction::Downvote, 1755.0);
  CHECK(f.auth.flag_clock().window_of(1755.0) == 87);
  CHECK(o2.accepted);
  CHECK(o2.flag_event == FlagEvent::RedIssuedBan);
  CHECK(o2.target_state == TrustState::Banned);

  const auto& rec = f.auth.record(t);
  CHECK(rec.trust_state == TrustState::Banned);
  CHECK(rec.score == f.auth.params().score_min);
  CHECK(rec.ban_count == 1);
  // Red flag uses the pre-increment timeout; next ban would use 14 d.
  CHECK(rec.flag.kind == Flag::Kind::Red);
  CHECK(rec.flag.expires_at == doctest::Approx(1755.0 + 7.0 * kDay));
  CHECK(rec.tti_current == doctest::Approx(14.0 * kDay));

  // Certificates revoked: votes against the banned target are rejected,
  // and its known pid is on the revocation list.
  CHECK(f.auth.ca().revocation_list().is_revoked(f.latest_cert.at(t).cert.pid));
  auto o3 = f.vote(a, t, VoteAction::Upvote, 1760.0);
  CHECK_FALSE(o3.accepted);
  CHECK(o3.reason == RejectReason::TargetBanned);

  REQUIRE(f.auth.ban_events().size() == 1);
  CHECK(f.auth.ban_events()[0].vid == t);
  CHECK(f.auth.ban_events()[0].yellow_voter == a);
  CHECK(f.auth.ban_events()[0].red_voter == b);
}

TEST_CASE("same-window downvotes never escalate") {
  Fixture f;
  auto a = f.add(1), b = f.add(2), c = f.add(3), t = f.add(4);
  Seconds w = 200.0;  // window 10 with t_fw = 20
  CHECK(f.vote(a, t, VoteAction::Downvote, w + 1.0).flag_event == FlagEvent::YellowIssued);
  CHECK(f.vote(b, t, VoteAction::Downvote, w + 5.0).flag_event == FlagEvent::NoChange);
  CHECK(f.vote(c, t, VoteAction::Downvote, w + 19.0).flag_event == FlagEvent::NoChange);
  CHECK(f.auth.record(t).trust_state == TrustState::Untrusted);
  CHECK(f.auth.record(t).flag.kind == Flag::Kind::Yellow);
}

TEST_CASE("expire_flags removes lapsed yellows; re-downvote yields yellow again") {
  Fixture f;
  auto a = f.add(1), b = f.add(2), t = f.add(3);
  CHECK(f.vote(a, t, VoteAction::Downvote, 100.0).flag_event == FlagEvent::YellowIssued);
  Seconds expiry = 100.0 + f.auth.params().t_ti_base;

  CHECK(f.auth.expire_flags(expiry - 1.0).empty());
  CHECK(f.auth.record(t).flag.kind == Flag::Kind::Yellow);

  auto lapsed = f.auth.expire_flags(expiry);
  REQUIRE(lapsed.size() == 1);
  CHECK(lapsed[0] == t);
  CHECK(f.auth.record(t).flag.kind == Flag::Kind::None);

  // A later-window downvote after the lapse starts a fresh yellow, not red.
  auto out = f.vote(b, t, VoteAction::Downvote, expiry + 5.0);
  CHECK(out.flag_event == FlagEvent::YellowIssued);
  CHECK(f.auth.record(t).trust_state != TrustState::Banned);
}

TEST_CASE("self_certify honors the red flag expiry and keeps ban_count") {
  AuthorityParams p;
  Fixture f(p);
  auto a = f.add(1), b = f.add(2), t = f.add(3);
  f.vote(a, t, VoteAction::Downvote, 100.0);
  f.vote(b, t, VoteAction::Downvote, 130.0);
  REQUIRE(f.auth.record(t).trust_state == TrustState::Banned);
  Seconds expiry = 130.0 + p.t_ti_base;

  auto early = f.auth.self_certify(t, expiry - 1.0);
  CHECK_FALSE(early.ok);
  CHECK(f.auth.record(t).trust_state == TrustState::Banned);

  auto ok = f.auth.self_certify(t, expiry);
  CHECK(ok.ok);
  CHECK(ok.state == TrustState::Untrusted);
  const auto& rec = f.auth.record(t);
  CHECK(rec.score == p.score_min);
  CHECK(rec.ban_count == 1);

  // Fresh Untrusted certs issued.
  f.refresh_certs();
  CHECK(f.latest_cert.at(t).cert.trust_state == pki::CertTrust::Untrusted);
}

TEST_CASE("recovery to Trusted takes 999 accepted upvotes") {
  AuthorityParams p;
  Fixture f(p);
  auto a = f.add(1), b = f.add(2), t = f.add(3);
  f.vote(a, t, VoteAction::Downvote, 100.0);
  f.vote(b, t, VoteAction::Downvote, 130.0);
  Seconds now = 130.0 + p.t_ti_base;
  REQUIRE(f.auth.self_certify(t, now).ok);

  // Distinct voters sidestep T_IVE; each upvote is accepted.
  for (int i = 0; i < 998; ++i) {
    auto v = f.add(100 + i, now);
    now += 2.0;
    REQUIRE(f.vote(v, t, VoteAction::Upvote, now).accepted);
  }
  CHECK(f.auth.record(t).trust_state == TrustState::Untrusted);
  CHECK(f.auth.record(t).score == doctest::Approx(0.998));

  auto v = f.add(99999, now);
  now += 2.0;
  auto out = f.vote(v, t, VoteAction::Upvote, now);
  CHECK(out.accepted);
  CHECK(out.target_state == TrustState::Trusted);
  f.refresh_certs();
  CHECK(f.latest_cert.at(t).cert.trust_state == pki::CertTrust::Trusted);
}

TEST_CASE("re_certify restores full trust immediately and resets the counter") {
  AuthorityParams p;
  Fixture f(p);
  auto a = f.add(1), b = f.add(2), t = f.add(3);
  f.vote(a, t, VoteAction::Downvote, 100.0);
  f.vote(b, t, VoteAction::Downvote, 130.0);
  REQUIRE(f.auth.record(t).trust_state == TrustState::Banned);
  CHECK(f.auth.record(t).ban_count == 1);

  f.auth.re_certify(t, 131.0);
  const auto& rec = f.auth.record(t);
  CHECK(rec.trust_state == TrustState::Trusted);
  CHECK(rec.score == 1.0);
  CHECK(rec.ban_count == 0);
  CHECK(rec.flag.kind == Flag::Kind::None);
  CHECK(rec.tti_current == doctest::Approx(p.t_ti_base));

  // Subsequent first re-ban uses the base timeout again.
  auto c = f.add(4), d = f.add(5);
  f.vote(c, t, VoteAction::Downvote, 200.0);
  f.vote(d, t, VoteAction::Downvote, 230.0);
  CHECK(f.auth.record(t).trust_state == TrustState::Banned);
  CHECK(f.auth.record(t).flag.expires_at == doctest::Approx(230.0 + p.t_ti_base));
}

TEST_CASE("scale_tide doubles on same-target repeats and decays to base") {
  AuthorityParams p;
  Fixture f(p);
  auto v = f.add(1), t1 = f.add(2), t2 = f.add(3);
  (void)t2;

  // Direct unit exercise of the scaling rule (process_vote rate limits
  // make back-to-back accepted downvotes impossible in live runs).
  Seconds base = p.t_ide_base;
  CHECK(f.auth.scale_tide(v, t1, 10.0) == doctest::Approx(base));
  CHECK(f.auth.scale_tide(v, t1, 20.0) == doctest::Approx(2.0 * base));
  CHECK(f.auth.scale_tide(v, t1, 30.0) == doctest::Approx(4.0 * base));
  CHECK(f.auth.scale_tide(v, t1, 40.0) == doctest::Approx(8.0 * base));

  // Different target: no scaling.
  CHECK(f.auth.scale_tide(v, t2, 50.0) == doctest::Approx(8.0 * base));

  // After one full tide with no downvote, decay back to base.
  CHECK(f.auth.scale_tide(v, t1, 50.0 + 8.0 * base) == doctest::Approx(base));
}

TEST_CASE("issue_trust_update rotates certs on transitions") {
  Fixture f;
  auto a = f.add(1), b = f.add(2), t = f.add(3);
  f.refresh_certs();
  Uuid old_pid = f.latest_cert.at(t).cert.pid;

  // Trusted -> Untrusted.
  f.vote(a, t, VoteAction::Downvote, 10.0);
  f.vote(b, t, VoteAction::Downvote, 11.0);
  REQUIRE(f.auth.record(t).trust_state == TrustState::Untrusted);
  f.refresh_certs();
  CHECK(f.latest_cert.at(t).cert.trust_state == pki::CertTrust::Untrusted);
  CHECK(f.latest_cert.at(t).cert.pid != old_pid);
  CHECK(f.auth.ca().revocation_list().is_revoked(old_pid));

  // Untrusted -> Trusted via upvotes.
  auto c = f.add(4), d = f.add(5);
  f.vote(c, t, VoteAction::Upvote, 12.0);
  f.vote(d, t, VoteAction::Upvote, 13.0);
  REQUIRE(f.auth.record(t).trust_state == TrustState::Trusted);
  f.refresh_certs();
  CHECK(f.latest_cert.at(t).cert.trust_state == pki::CertTrust::Trusted);

  // Banned: no issuance.
  auto e1 = f.add(6), e2 = f.add(7);
  f.vote(e1, t, VoteAction::Downvote, 100.0);
  f.vote(e2, t, VoteAction::Downvote, 130.0);
  REQUIRE(f.auth.record(t).trust_state == TrustState::Banned);
  CHECK_THROWS_AS(f.auth.issue_trust_update(t, 131.0), pki::BannedVehicle);
}

TEST_CASE("a single voter can never ban under default parameters") {
  // Property: with t_ide_base > t_ti_base, a lone downvoter's next
  // accepted downvote always finds the previous yellow lapsed.
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 50; ++trial) {
    Fixture f({}, 1000 + trial);
    auto v = f.add(1), t = f.add(2);
    Seconds now = 0.0;
    for (int i = 0; i < 20; ++i) {
      now += std::uniform_real_distribution<double>(1.0, 30.0 * kDay)(rng);
      f.auth.expire_flags(now);
      auto out = f.vote(v, t, VoteAction::Downvote, now);
      if (out.accepted) {
        CHECK(out.flag_event != FlagEvent::RedIssuedBan);
      }
      REQUIRE(f.auth.record(t).trust_state != TrustState::Banned);
    }
  }
}

TEST_CASE("accepted votes replay cleanly against the rate-limit invariants") {
  // Alg. 1 conformance over the ledger: replay the audit log and check
  // per-pair and per-voter spacing of accepted votes.
  Fixture f;
  std::vector<Uuid> vs;
  for (int i = 0; i < 5; ++i) vs.push_back(f.add(i + 1));
  std::mt19937_64 rng(99);
  Seconds now = 0.0;
  for (int i = 0; i < 400; ++i) {
    now += std::uniform_real_distribution<double>(0.1, 2.0 * kDay)(rng);
    f.auth.expire_flags(now);
    auto voter = vs[rng() % vs.size()];
    auto target = vs[rng() % vs.size()];
    if (f.auth.record(target).trust_state == TrustState::Banned) continue;
    auto action = (rng() % 2) ? VoteAction::Upvote : VoteAction::Downvote;
    f.vote(voter, target, action, now);
  }

  std::map<std::pair<std::string, std::string>, Seconds> last_up, last_down;
  std::map<std::string, Seconds> last_voter_down;
  for (const auto& e : f.auth.audit_log()) {
    if (!e.accepted) continue;
    auto key = std::make_pair(e.voter.to_string(), e.target.to_string());
    if (e.action == VoteAction::Upvote) {
      auto it = last_up.find(key);
      if (it != last_up.end()) CHECK(e.time - it->second >= f.auth.params().t_ive);
      last_up[key] = e.time;
    } else {
      auto it = last_down.find(key);
      if (it != last_down.end()) CHECK(e.time - it->second >= f.auth.params().t_ive);
      last_down[key] = e.time;
      auto vit = last_voter_down.find(key.first);
      // Spacing at least the base epoch (per-voter tide only grows).
      if (vit != last_voter_down.end())
        CHECK(e.time - vit->second >= f.auth.params().t_ide_base);
      last_voter_down[key.first] = e.time;
    }
  }
}

TEST_CASE("identical ballot streams produce identical audit logs") {
  auto run = [] {
    Fixture f({}, 55);
    std::vector<Uuid> vs;
    for (int i = 0; i < 4; ++i) vs.push_back(f.add(i + 1));
    std::mt19937_64 rng(5);
    Seconds now = 0.0;
    for (int i = 0; i < 200; ++i) {
      now += std::uniform_real_distribution<double>(0.1, kDay)(rng);
      auto voter = vs[rng() % vs.size()];
      auto target = vs[rng() % vs.size()];
      if (f.auth.record(target).trust_state == TrustState::Banned) continue;
      f.vote(voter, target, (rng() % 2) ? VoteAction::Upvote : VoteAction::Downvote, now);
    }
    return f.auth.audit_csv();
  };
  CHECK(run() == run());
}

TEST_CASE("audit CSV has the expected header and rows") {
  Fixture f;
  auto a = f.add(1), b = f.add(2);
  f.vote(a, b, VoteAction::Upvote, 5.0);
  auto csv = f.auth.audit_csv();
  CHECK(csv.rfind("time,voter,target,action,outcome,reason\n", 0) == 0);
  CHECK(csv.find("Upvote,accepted") != std::string::npos);
}
