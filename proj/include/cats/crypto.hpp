#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace cats::crypto {

using Bytes = std::vector<std::uint8_t>;
using BytesView = std::span<const std::uint8_t>;

// Strength tiers benchmarked for in-band verification. Ordered weakest
// to strongest.
enum class CurveTier {
  Secp224r1,
  BrainpoolP256r1,
  Secp384r1,
  BrainpoolP512r1,
};

const char* curve_name(CurveTier tier);

struct KeyPair {
  Bytes public_key;
  Bytes private_key;
};

// Signature backend. Certificates and messages are signed through this
// interface so the simulator can swap the EC implementation for a cheap
// keyed-hash one on large runs.
class SignatureScheme {
 public:
  virtual ~SignatureScheme() = default;

  virtual KeyPair generate_keypair() = 0;
  virtual Bytes sign(BytesView private_key, BytesView message) const = 0;
  virtual bool verify(BytesView public_key, BytesView message, BytesView signature) const = 0;

  // Upper bound on encoded signature size, for frame budgeting.
  virtual std::size_t max_signature_size() const = 0;
  virtual std::string name() const = 0;
};

// Real elliptic-curve backend (ECDSA over the given named curve).
std::unique_ptr<SignatureScheme> make_ecdsa_scheme(CurveTier tier);

// Deterministic keyed-hash backend for large simulations. Key pairs are
// symmetric (public == private); signatures are 16-byte MACs. Not
// cryptographically sound, only protocol-sound.
std::unique_ptr<SignatureScheme> make_fake_scheme(std::uint64_t seed);

}  // namespace cats::crypto
