#pragma once

#include <cstdint>
#include <list>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "cats/crypto.hpp"
#include "cats/report.hpp"
#include "cats/uuid.hpp"

namespace cats::pki {

constexpr Seconds kMaxCertValidity = 24.0 * 3600.0;
constexpr std::size_t kMaxFrameBytes = 1500;

struct DuplicateIdentity : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct BannedVehicle : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnknownVehicle : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Trust attribute as encoded into pseudonym certs. The Banned state is
// SA-internal; banned vehicles simply have no valid certs.
enum class CertTrust : std::uint8_t { Trusted = 0, Untrusted = 1 };

struct VehicleIdentity {
  Uuid vid;
  crypto::Bytes vic_public_key;
  Seconds provisioned_at = 0.0;
};

// Short-lived pseudonym cert. Only pid, trust state, validity, key and
// SA signature are visible to peers; the owner vid is known to the SA.
struct PseudonymCert {
  Uuid pid;
  CertTrust trust_state = CertTrust::Trusted;
  Seconds not_before = 0.0;
  Seconds not_after = 0.0;
  crypto::Bytes public_key;
  crypto::Bytes sa_signature;

  bool operator==(const PseudonymCert&) const = default;

  // Bytes covered by sa_signature.
  crypto::Bytes signed_payload() const;
};

struct Beacon {
  PseudonymCert cert;
  Seconds timestamp = 0.0;
  crypto::Bytes extra;
  crypto::Bytes signature;  // by the VPC private key over (cert, timestamp, extra)

  bool operator==(const Beacon&) const = default;
};

struct ShareMessage {
  Uuid pid;
  Seconds timestamp = 0.0;
  std::vector<ObjectReport> payload;
  crypto::Bytes signature;  // covers timestamp + payload

  bool operator==(const ShareMessage&) const = default;
};

// Monotone set of revoked pids. Pids are never un-revoked; recovered
// vehicles get fresh certs with fresh pids.
class RevocationList {
 public:
  void revoke(const Uuid& pid, Seconds at) {
    if (revoked_.insert(pid).second) log_.push_back({pid, at});
  }
  bool is_revoked(const Uuid& pid) const { return revoked_.contains(pid); }
  std::size_t size() const { return revoked_.size(); }

  // Append-only history, in revocation order.
  const std::vector<std::pair<Uuid, Seconds>>& log() const { return log_; }

  // CSV export: header "pid,revoked_at".
  std::string to_csv() const;

 private:
  std::unordered_set<Uuid> revoked_;
  std::vector<std::pair<Uuid, Seconds>> log_;
};

// Receiver-side cert cache populated from beacons. LRU with per-entry
// expiry at cert not_after.
class CertCache {
 public:
  explicit CertCache(std::size_t capacity = 4096) : capacity_(capacity) {}

  void put(const PseudonymCert& cert);
  const PseudonymCert* lookup(const Uuid& pid, Seconds now);
  std::size_t size() const { return entries_.size(); }

 private:
  struct Entry {
    PseudonymCert cert;
    std::list<Uuid>::iterator lru_it;
  };
  std::size_t capacity_;
  std::unordered_map<Uuid, Entry> entries_;
  std::list<Uuid> lru_;  // front = most recent
};

enum class DropReason : std::uint8_t { UnknownPid, BadSignature, Revoked, Expired, Stale };

struct VerifyResult {
  enum class Kind : std::uint8_t { TrustedData, UntrustedData, Drop } kind = Kind::Drop;
  DropReason reason = DropReason::UnknownPid;  // valid when kind == Drop

  static VerifyResult trusted() { return {Kind::TrustedData, {}}; }
  static VerifyResult untrusted() { return {Kind::UntrustedData, {}}; }
  static VerifyResult drop(DropReason r) { return {Kind::Drop, r}; }
  bool operator==(const VerifyResult&) const = default;
};

const char* to_string(DropReason r);

// Wire codecs. decode_* throw wire::MalformedInput (aliased below) on
// truncated or garbled buffers.
crypto::Bytes encode_cert(const PseudonymCert& cert);
PseudonymCert decode_cert(crypto::BytesView data);
crypto::Bytes encode_beacon(const Beacon& beacon);
Beacon decode_beacon(crypto::BytesView data);
crypto::Bytes encode_message(const ShareMessage& msg);
ShareMessage decode_message(crypto::BytesView data);

// Bytes a ShareMessage signature covers.
crypto::Bytes message_signed_payload(const ShareMessage& msg);
crypto::Bytes beacon_signed_payload(const Beacon& beacon);

ShareMessage sign_message(const crypto::SignatureScheme& scheme, crypto::BytesView vpc_private_key,
                          const Uuid& pid, Seconds timestamp, std::vector<ObjectReport> payload);

VerifyResult verify_message(const crypto::SignatureScheme& scheme, const ShareMessage& msg,
                            CertCache& cert_cache, const RevocationList& revocation_list,
                            Seconds now, Seconds t_freshness);

bool verify_beacon(const crypto::SignatureScheme& scheme, const Beacon& beacon);

bool verify_cert(const crypto::SignatureScheme& scheme, crypto::BytesView sa_public_key,
                 const PseudonymCert& cert);

struct IssuedCert {
  PseudonymCert cert;
  crypto::Bytes private_key;
};

// The SA's certificate desk: identity registry, pseudonym issuance,
// pid -> vid resolution, and revocation. Trust-state decisions live in
// the authority module; it toggles the banned flag here.
class CertificateAuthority {
 public:
  explicit CertificateAuthority(std::shared_ptr<crypto::SignatureScheme> scheme);

  VehicleIdentity issue_vic(const Uuid& vid, crypto::Bytes public_key, Seconds now);
  bool is_registered(const Uuid& vid) const { return identities_.contains(vid); }
  const VehicleIdentity& identity(const Uuid& vid) const;

  std::vector<IssuedCert> issue_vpc_batch(const Uuid& vid, CertTrust trust, int count,
                                          Seconds now);
  int revoke_vpcs(const Uuid& vid, Seconds now);

  std::optional<Uuid> owner_of(const Uuid& pid) const;

  void set_banned(const Uuid& vid, bool banned) { banned_[vid] = banned; }
  bool is_banned(const Uuid& vid) const {
    auto it = banned_.find(vid);
    return it != banned_.end() && it->second;
  }

  const RevocationList& revocation_list() const { return revocation_; }
  const crypto::SignatureScheme& scheme() const { return *scheme_; }
  crypto::BytesView sa_public_key() const { return sa_keys_.public_key; }

 private:
  std::shared_ptr<crypto::SignatureScheme> scheme_;
  crypto::KeyPair sa_keys_;
  std::unordered_map<Uuid, VehicleIdentity> identities_;
  std::unordered_map<Uuid, std::vector<PseudonymCert>> live_certs_;  // per vid
  std::unordered_map<Uuid, Uuid> pid_owner_;
  std::unordered_map<Uuid, bool> banned_;
  RevocationList revocation_;
  std::uint64_t pid_counter_ = 1;
};

// Mean wall-clock seconds of the full in-band verify pipeline
// (signature check + revocation lookup + trust decode) on one message.
double verification_benchmark(crypto::CurveTier tier, int iterations);

}  // namespace cats::pki
