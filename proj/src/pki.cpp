#include "cats/pki.hpp"

#include <chrono>
#include <sstream>

#include "cats/wire.hpp"

namespace cats::pki {

namespace tag {
// cert
constexpr std::uint8_t kPid = 0x01;
constexpr std::uint8_t kTrust = 0x02;
constexpr std::uint8_t kNotBefore = 0x03;
constexpr std::uint8_t kNotAfter = 0x04;
constexpr std::uint8_t kPublicKey = 0x05;
constexpr std::uint8_t kSaSignature = 0x06;
// beacon / message
constexpr std::uint8_t kCert = 0x10;
constexpr std::uint8_t kTimestamp = 0x11;
constexpr std::uint8_t kExtra = 0x12;
constexpr std::uint8_t kSignature = 0x13;
constexpr std::uint8_t kPayload = 0x14;
// object report
constexpr std::uint8_t kObjectId = 0x20;
constexpr std::uint8_t kPosX = 0x21;
constexpr std::uint8_t kPosY = 0x22;
constexpr std::uint8_t kClaimedAt = 0x23;
}  // namespace tag

const char* to_string(DropReason r) {
  switch (r) {
    case DropReason::UnknownPid: return "UnknownPid";
    case DropReason::BadSignature: return "BadSignature";
    case DropReason::Revoked: return "Revoked";
    case DropReason::Expired: return "Expired";
    case DropReason::Stale: return "Stale";
  }
  return "?";
}

std::string RevocationList::to_csv() const {
  std::ostringstream out;
  out << "pid,revoked_at\n";
  for (const auto& [pid, at] : log_) out << pid.to_string() << ',' << at << '\n';
  return out.str();
}

void CertCache::put(const PseudonymCert& cert) {
  auto it = entries_.find(cert.pid);
  if (it != entries_.end()) {
    lru_.erase(it->second.lru_it);
    lru_.push_front(cert.pid);
    it->second = {cert, lru_.begin()};
    return;
  }
  if (entries_.size() >= capacity_ && !lru_.empty()) {
    entries_.erase(lru_.back());
    lru_.pop_back();
  }
  lru_.push_front(cert.pid);
  entries_.emplace(cert.pid, Entry{cert, lru_.begin()});
}

const PseudonymCert* CertCache::lookup(const Uuid& pid, Seconds now) {
  auto it = entries_.find(pid);
  if (it == entries_.end()) return nullptr;
  if (now > it->second.cert.not_after) {
    lru_.erase(it->second.lru_it);
    entries_.erase(it);
    return nullptr;
  }
  lru_.splice(lru_.begin(), lru_, it->second.lru_it);
  return &it->second.cert;
}

crypto::Bytes PseudonymCert::signed_payload() const {
  wire::Writer w;
  w.uuid(tag::kPid, pid);
  w.u8(tag::kTrust, static_cast<std::uint8_t>(trust_state));
  w.f64(tag::kNotBefore, not_before);
  w.f64(tag::kNotAfter, not_after);
  w.field(tag::kPublicKey, public_key);
  return w.take();
}

crypto::Bytes encode_cert(const PseudonymCert& cert) {
  wire::Writer w;
  w.uuid(tag::kPid, cert.pid);
  w.u8(tag::kTrust, static_cast<std::uint8_t>(cert.trust_state));
  w.f64(tag::kNotBefore, cert.not_before);
  w.f64(tag::kNotAfter, cert.not_after);
  w.field(tag::kPublicKey, cert.public_key);
  w.field(tag::kSaSignature, cert.sa_signature);
  return w.take();
}

PseudonymCert decode_cert(crypto::BytesView data) {
  wire::Reader r(data);
  PseudonymCert c;
  c.pid = r.uuid(tag::kPid);
  std::uint8_t trust = r.u8(tag::kTrust);
  if (trust > 1) throw wire::MalformedInput("bad trust state");
  c.trust_state = static_cast<CertTrust>(trust);
  c.not_before = r.f64(tag::kNotBefore);
  c.not_after = r.f64(tag::kNotAfter);
  auto pk = r.field(tag::kPublicKey);
  c.public_key.assign(pk.begin(), pk.end());
  auto sig = r.field(tag::kSaSignature);
  c.sa_signature.assign(sig.begin(), sig.end());
  r.expect_done();
  return c;
}

crypto::Bytes beacon_signed_payload(const Beacon& beacon) {
  wire::Writer w;
  w.field(tag::kCert, encode_cert(beacon.cert));
  w.f64(tag::kTimestamp, beacon.timestamp);
  w.field(tag::kExtra, beacon.extra);
  return w.take();
}

crypto::Bytes encode_beacon(const Beacon& beacon) {
  wire::Writer w;
  w.field(tag::kCert, encode_cert(beacon.cert));
  w.f64(tag::kTimestamp, beacon.timestamp);
  w.field(tag::kExtra, beacon.extra);
  w.field(tag::kSignature, beacon.signature);
  return w.take();
}

Beacon decode_beacon(crypto::BytesView data) {
  wire::Reader r(data);
  Beacon b;
  b.cert = decode_cert(r.field(tag::kCert));
  b.timestamp = r.f64(tag::kTimestamp);
  auto extra = r.field(tag::kExtra);
  b.extra.assign(extra.begin(), extra.end());
  auto sig = r.field(tag::kSignature);
  b.signature.assign(sig.begin(), sig.end());
  r.expect_done();
  return b;
}

static void encode_report(wire::Writer& w, const ObjectReport& rep) {
  wire::Writer inner;
  inner.u64(tag::kObjectId, rep.object_id);
  inner.f64(tag::kPosX, rep.x);
  inner.f64(tag::kPosY, rep.y);
  inner.f64(tag::kClaimedAt, rep.claimed_at);
  w.field(tag::kPayload, inner.bytes());
}

crypto::Bytes message_signed_payload(const ShareMessage& msg) {
  wire::Writer w;
  w.f64(tag::kTimestamp, msg.timestamp);
  for (const auto& rep : msg.payload) encode_report(w, rep);
  return w.take();
}

crypto::Bytes encode_message(const ShareMessage& msg) {
  wire::Writer w;
  w.uuid(tag::kPid, msg.pid);
  w.f64(tag::kTimestamp, msg.timestamp);
  for (const auto& rep : msg.payload) encode_report(w, rep);
  w.field(tag::kSignature, msg.signature);
  return w.take();
}

ShareMessage decode_message(crypto::BytesView data) {
  wire::Reader r(data);
  ShareMessage m;
  m.pid = r.uuid(tag::kPid);
  m.timestamp = r.f64(tag::kTimestamp);
  while (r.peek_tag() == tag::kPayload) {
    wire::Reader ir(r.field(tag::kPayload));
    ObjectReport rep;
    rep.object_id = ir.u64(tag::kObjectId);
    rep.x = ir.f64(tag::kPosX);
    rep.y = ir.f64(tag::kPosY);
    rep.claimed_at = ir.f64(tag::kClaimedAt);
    ir.expect_done();
    m.payload.push_back(rep);
  }
  auto sig = r.field(tag::kSignature);
  m.signature.assign(sig.begin(), sig.end());
  r.expect_done();
  return m;
}

ShareMessage sign_message(const crypto::SignatureScheme& scheme, crypto::BytesView vpc_private_key,
                          const Uuid& pid, Seconds timestamp, std::vector<ObjectReport> payload) {
  ShareMessage m;
  m.pid = pid;
  m.timestamp = timestamp;
  m.payload = std::move(payload);
  m.signature = scheme.sign(vpc_private_key, message_signed_payload(m));
  return m;
}

VerifyResult verify_message(const crypto::SignatureScheme& scheme, const ShareMessage& msg,
                            CertCache& cert_cache, const RevocationList& revocation_list,
                            Seconds now, Seconds t_freshness) {
  const PseudonymCert* cert = cert_cache.lookup(msg.pid, now);
  if (!cert) return VerifyResult::drop(DropReason::UnknownPid);
  if (revocation_list.is_revoked(msg.pid)) return VerifyResult::drop(DropReason::Revoked);
  if (now < cert->not_before || now > cert->not_after)
    return VerifyResult::drop(DropReason::Expired);
  if (now - msg.timestamp > t_freshness) return VerifyResult::drop(DropReason::Stale);
  if (!scheme.verify(cert->public_key, message_signed_payload(msg), msg.signature))
    return VerifyResult::drop(DropReason::BadSignature);
  return cert->trust_state == CertTrust::Trusted ? VerifyResult::trusted()
                                                 : VerifyResult::untrusted();
}

bool verify_beacon(const crypto::SignatureScheme& scheme, const Beacon& beacon) {
  return scheme.verify(beacon.cert.public_key, beacon_signed_payload(beacon), beacon.signature);
}

bool verify_cert(const crypto::SignatureScheme& scheme, crypto::BytesView sa_public_key,
                 const PseudonymCert& cert) {
  return scheme.verify(sa_public_key, cert.signed_payload(), cert.sa_signature);
}

CertificateAuthority::CertificateAuthority(std::shared_ptr<crypto::SignatureScheme> scheme)
    : scheme_(std::move(scheme)), sa_keys_(scheme_->generate_keypair()) {}

VehicleIdentity CertificateAuthority::issue_vic(const Uuid& vid, crypto::Bytes public_key,
                                                Seconds now) {
  if (identities_.contains(vid)) throw DuplicateIdentity("vid already registered");
  VehicleIdentity id{vid, std::move(public_key), now};
  identities_.emplace(vid, id);
  return id;
}

const VehicleIdentity& CertificateAuthority::identity(const Uuid& vid) const {
  auto it = identities_.find(vid);
  if (it == identities_.end()) throw UnknownVehicle("vid not registered");
  return it->second;
}

std::vector<IssuedCert> CertificateAuthority::issue_vpc_batch(const Uuid& vid, CertTrust trust,
                                                              int count, Seconds now) {
  if (!identities_.contains(vid)) throw UnknownVehicle("vid not registered");
  if (is_banned(vid)) throw BannedVehicle("red flag active, issuance refused");
  std::vector<IssuedCert> out;
  out.reserve(static_cast<std::size_t>(count));
  auto& live = live_certs_[vid];
  for (int i = 0; i < count; ++i) {
    crypto::KeyPair kp = scheme_->generate_keypair();
    PseudonymCert cert;
    cert.pid = Uuid::from_u64(pid_counter_++);
    cert.trust_state = trust;
    cert.not_before = now;
    cert.not_after = now + kMaxCertValidity;
    cert.public_key = kp.public_key;
    cert.sa_signature = scheme_->sign(sa_keys_.private_key, cert.signed_payload());
    pid_owner_.emplace(cert.pid, vid);
    live.push_back(cert);
    out.push_back({std::move(cert), std::move(kp.private_key)});
  }
  return out;
}

int CertificateAuthority::revoke_vpcs(const Uuid& vid, Seconds now) {
  auto it = live_certs_.find(vid);
  if (it == live_certs_.end()) return 0;
  int n = 0;
  for (const auto& cert : it->second) {
    if (now <= cert.not_after) {
      revocation_.revoke(cert.pid, now);
      ++n;
    }
  }
  it->second.clear();
  return n;
}

std::optional<Uuid> CertificateAuthority::owner_of(const Uuid& pid) const {
  auto it = pid_owner_.find(pid);
  if (it == pid_owner_.end()) return std::nullopt;
  return it->second;
}

double verification_benchmark(crypto::CurveTier tier, int iterations) {
  if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");
  std::shared_ptr<crypto::SignatureScheme> scheme = crypto::make_ecdsa_scheme(tier);
  CertificateAuthority ca(scheme);

  Uuid vid = Uuid::from_u64(1);
  ca.issue_vic(vid, {}, 0.0);
  auto issued = ca.issue_vpc_batch(vid, CertTrust::Trusted, 1, 0.0);
  CertCache cache;
  cache.put(issued[0].cert);

  std::vector<ObjectReport> payload = {{42, 10.0, 20.0, 1.0}, {43, -5.0, 3.5, 1.0}};
  ShareMessage msg = sign_message(*scheme, issued[0].private_key, issued[0].cert.pid, 1.0,
                                  payload);

  auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < iterations; ++i) {
    VerifyResult res =
        verify_message(*scheme, msg, cache, ca.revocation_list(), 1.0, /*t_freshness=*/5.0);
    if (res.kind != VerifyResult::Kind::TrustedData)
      throw std::runtime_error("benchmark verify failed");
  }
  auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(t1 - t0).count() / iterations;
}

}  // namespace cats::pki
