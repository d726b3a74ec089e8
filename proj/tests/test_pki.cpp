#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <memory>

#include "cats/pki.hpp"
#include "cats/wire.hpp"

using namespace cats;
using namespace cats::pki;

namespace {

std::shared_ptr<crypto::SignatureScheme> fake() { return crypto::make_fake_scheme(42); }

Uuid vid(std::uint64_t n) { return Uuid::from_u64(n); }

}  // namespace

TEST_CASE("issue_vic registers once per vid") {
  CertificateAuthority ca(fake());
  auto keys = crypto::make_fake_scheme(1)->generate_keypair();

  auto id = ca.issue_vic(vid(1), keys.public_key, 100.0);
  CHECK(id.vid == vid(1));
  CHECK(id.provisioned_at == 100.0);
  CHECK(ca.is_registered(vid(1)));

  CHECK_THROWS_AS(ca.issue_vic(vid(1), keys.public_key, 101.0), DuplicateIdentity);

  auto id2 = ca.issue_vic(vid(2), keys.public_key, 102.0);
  CHECK(id2.vid == vid(2));
  CHECK(ca.identity(vid(1)).vid == vid(1));
  CHECK(ca.identity(vid(2)).vid == vid(2));
}

TEST_CASE("issue_vpc_batch issues fresh SA-signed certs") {
  auto scheme = fake();
  CertificateAuthority ca(scheme);
  auto keys = scheme->generate_keypair();
  ca.issue_vic(vid(1), keys.public_key, 0.0);

  auto batch = ca.issue_vpc_batch(vid(1), CertTrust::Trusted, 5, 10.0);
  REQUIRE(batch.size() == 5);
  std::unordered_set<Uuid> pids;
  for (const auto& ic : batch) {
    CHECK(pids.insert(ic.cert.pid).second);
    CHECK(ic.cert.trust_state == CertTrust::Trusted);
    CHECK(ic.cert.not_before == 10.0);
    CHECK(ic.cert.not_after == 10.0 + kMaxCertValidity);
    CHECK(verify_cert(*scheme, ca.sa_public_key(), ic.cert));
    CHECK(ca.owner_of(ic.cert.pid) == vid(1));
  }

  auto u = ca.issue_vpc_batch(vid(1), CertTrust::Untrusted, 1, 20.0);
  CHECK(decode_cert(encode_cert(u[0].cert)).trust_state == CertTrust::Untrusted);

  CHECK_THROWS_AS(ca.issue_vpc_batch(vid(9), CertTrust::Trusted, 1, 0.0), UnknownVehicle);
  ca.issue_vic(vid(3), keys.public_key, 0.0);
  ca.set_banned(vid(3), true);
  CHECK_THROWS_AS(ca.issue_vpc_batch(vid(3), CertTrust::Trusted, 1, 0.0), BannedVehicle);
}

TEST_CASE("revoke_vpcs counts live certs and is idempotent") {
  auto scheme = fake();
  CertificateAuthority ca(scheme);
  ca.issue_vic(vid(1), scheme->generate_keypair().public_key, 0.0);
  auto batch = ca.issue_vpc_batch(vid(1), CertTrust::Trusted, 5, 0.0);

  CHECK(ca.revoke_vpcs(vid(1), 1.0) == 5);
  CHECK(ca.revoke_vpcs(vid(1), 2.0) == 0);
  for (const auto& ic : batch) CHECK(ca.revocation_list().is_revoked(ic.cert.pid));
  CHECK(ca.revoke_vpcs(vid(2), 3.0) == 0);  // never issued
}

TEST_CASE("revocation list CSV export") {
  RevocationList rl;
  rl.revoke(vid(5), 12.5);
  rl.revoke(vid(5), 13.0);  // monotone: second revoke ignored
  CHECK(rl.size() == 1);
  auto csv = rl.to_csv();
  CHECK(csv.rfind("pid,revoked_at\n", 0) == 0);
  CHECK(csv.find(vid(5).to_string()) != std::string::npos);
}

TEST_CASE("sign_message verify round trip") {
  auto scheme = fake();
  CertificateAuthority ca(scheme);
  ca.issue_vic(vid(1), scheme->generate_keypair().public_key, 0.0);
  auto ic = ca.issue_vpc_batch(vid(1), CertTrust::Trusted, 2, 0.0);

  std::vector<ObjectReport> payload = {{7, 1.5, -2.5, 5.0}, {8, 3.0, 4.0, 5.0}};
  auto msg = sign_message(*scheme, ic[0].private_key, ic[0].cert.pid, 5.0, payload);

  CertCache cache;
  cache.put(ic[0].cert);
  cache.put(ic[1].cert);
  RevocationList rl;

  CHECK(verify_message(*scheme, msg, cache, rl, 5.1, 2.0) == VerifyResult::trusted());

  SUBCASE("payload tamper fails") {
    auto bad = msg;
    bad.payload[0].x += 1.0;
    CHECK(verify_message(*scheme, bad, cache, rl, 5.1, 2.0) ==
          VerifyResult::drop(DropReason::BadSignature));
  }
  SUBCASE("wrong cert fails") {
    auto bad = msg;
    bad.pid = ic[1].cert.pid;  // signed with cert 0's key
    CHECK(verify_message(*scheme, bad, cache, rl, 5.1, 2.0) ==
          VerifyResult::drop(DropReason::BadSignature));
  }
}

TEST_CASE("verify_message routing and drop reasons") {
  auto scheme = fake();
  CertificateAuthority ca(scheme);
  ca.issue_vic(vid(1), scheme->generate_keypair().public_key, 0.0);
  auto tc = ca.issue_vpc_batch(vid(1), CertTrust::Trusted, 1, 0.0)[0];
  auto uc = ca.issue_vpc_batch(vid(1), CertTrust::Untrusted, 1, 0.0)[0];

  CertCache cache;
  cache.put(tc.cert);
  cache.put(uc.cert);
  RevocationList rl;
  std::vector<ObjectReport> payload = {{1, 0.0, 0.0, 100.0}};

  auto tmsg = sign_message(*scheme, tc.private_key, tc.cert.pid, 100.0, payload);
  auto umsg = sign_message(*scheme, uc.private_key, uc.cert.pid, 100.0, payload);

  CHECK(verify_message(*scheme, tmsg, cache, rl, 100.5, 2.0) == VerifyResult::trusted());
  CHECK(verify_message(*scheme, umsg, cache, rl, 100.5, 2.0) == VerifyResult::untrusted());

  SUBCASE("unknown pid") {
    auto m = tmsg;
    m.pid = vid(999);
    CHECK(verify_message(*scheme, m, cache, rl, 100.5, 2.0) ==
          VerifyResult::drop(DropReason::UnknownPid));
  }
  SUBCASE("revoked") {
    rl.revoke(tc.cert.pid, 100.0);
    CHECK(verify_message(*scheme, tmsg, cache, rl, 100.5, 2.0) ==
          VerifyResult::drop(DropReason::Revoked));
  }
  SUBCASE("stale: timestamp now - 2*t_freshness") {
    auto m = sign_message(*scheme, tc.private_key, tc.cert.pid, 100.0 - 4.0, payload);
    CHECK(verify_message(*scheme, m, cache, rl, 100.0, 2.0) ==
          VerifyResult::drop(DropReason::Stale));
  }
  SUBCASE("expired cert") {
    Seconds late = tc.cert.not_after + 10.0;
    auto m = sign_message(*scheme, tc.private_key, tc.cert.pid, late, payload);
    // Fresh cache entry (expired entries are evicted on lookup).
    CertCache c2;
    c2.put(tc.cert);
    auto res = verify_message(*scheme, m, c2, rl, late + 0.1, 2.0);
    CHECK(res.kind == VerifyResult::Kind::Drop);
    CHECK((res.reason == DropReason::Expired || res.reason == DropReason::UnknownPid));
  }
}

TEST_CASE("beacon encode/decode round trip and frame budget") {
  for (auto tier : {crypto::CurveTier::Secp224r1, crypto::CurveTier::BrainpoolP512r1}) {
    CAPTURE(crypto::curve_name(tier));
    std::shared_ptr<crypto::SignatureScheme> scheme = crypto::make_ecdsa_scheme(tier);
    CertificateAuthority ca(scheme);
    ca.issue_vic(vid(1), scheme->generate_keypair().public_key, 0.0);
    auto ic = ca.issue_vpc_batch(vid(1), CertTrust::Trusted, 1, 0.0)[0];

    Beacon b;
    b.cert = ic.cert;
    b.timestamp = 42.0;
    b.extra = {0xde, 0xad};
    b.signature = scheme->sign(ic.private_key, beacon_signed_payload(b));

    auto bytes = encode_beacon(b);
    CHECK(bytes.size() <= kMaxFrameBytes);
    CHECK(decode_beacon(bytes) == b);
    CHECK(verify_beacon(*scheme, b));

    auto truncated = bytes;
    truncated.resize(truncated.size() / 2);
    CHECK_THROWS_AS(decode_beacon(truncated), wire::MalformedInput);
  }
}

TEST_CASE("message encode/decode round trip") {
  ShareMessage m;
  m.pid = vid(77);
  m.timestamp = 9.25;
  m.payload = {{1, 2.0, 3.0, 9.0}, {2, -4.0, 5.5, 9.0}, {3, 0.0, 0.0, 9.0}};
  m.signature = {1, 2, 3};
  CHECK(decode_message(encode_message(m)) == m);

  ShareMessage empty;
  empty.pid = vid(1);
  empty.signature = {0};
  CHECK(decode_message(encode_message(empty)) == empty);
}

TEST_CASE("cert cache is LRU with expiry") {
  auto scheme = fake();
  CertificateAuthority ca(scheme);
  ca.issue_vic(vid(1), scheme->generate_keypair().public_key, 0.0);
  auto batch = ca.issue_vpc_batch(vid(1), CertTrust::Trusted, 3, 0.0);

  CertCache cache(2);
  cache.put(batch[0].cert);
  cache.put(batch[1].cert);
  CHECK(cache.lookup(batch[0].cert.pid, 1.0) != nullptr);  // refresh 0
  cache.put(batch[2].cert);                                // evicts 1
  CHECK(cache.lookup(batch[1].cert.pid, 1.0) == nullptr);
  CHECK(cache.lookup(batch[0].cert.pid, 1.0) != nullptr);
  CHECK(cache.lookup(batch[2].cert.pid, 1.0) != nullptr);

  // Expiry at not_after.
  CHECK(cache.lookup(batch[0].cert.pid, batch[0].cert.not_after + 1.0) == nullptr);
}

TEST_CASE("verification benchmark runs under budget") {
  CHECK_THROWS_AS(pki::verification_benchmark(crypto::CurveTier::Secp224r1, 0),
                  std::invalid_argument);
  double mean = pki::verification_benchmark(crypto::CurveTier::Secp224r1, 100);
  CHECK(mean > 0.0);
  CHECK(mean < 0.010);
}
