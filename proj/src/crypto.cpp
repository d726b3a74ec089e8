#include "cats/crypto.hpp"

#include <openssl/decoder.h>
#include <openssl/ec.h>
#include <openssl/encoder.h>
#include <openssl/evp.h>

#include <algorithm>
#include <cstring>
#include <stdexcept>

namespace cats::crypto {

const char* curve_name(CurveTier tier) {
  switch (tier) {
    case CurveTier::Secp224r1: return "secp224r1";
    case CurveTier::BrainpoolP256r1: return "brainpoolP256r1";
    case CurveTier::Secp384r1: return "secp384r1";
    case CurveTier::BrainpoolP512r1: return "brainpoolP512r1";
  }
  return "unknown";
}

namespace {

[[noreturn]] void ssl_fail(const char* what) {
  throw std::runtime_error(std::string("openssl: ") + what);
}

struct EvpKey {
  EVP_PKEY* p = nullptr;
  EvpKey() = default;
  EvpKey(const EvpKey&) = delete;
  EvpKey& operator=(const EvpKey&) = delete;
  EvpKey(EvpKey&& o) noexcept : p(o.p) { o.p = nullptr; }
  EvpKey& operator=(EvpKey&& o) noexcept {
    if (this != &o) {
      if (p) EVP_PKEY_free(p);
      p = o.p;
      o.p = nullptr;
    }
    return *this;
  }
  ~EvpKey() {
    if (p) EVP_PKEY_free(p);
  }
};

class EcdsaScheme final : public SignatureScheme {
 public:
  explicit EcdsaScheme(CurveTier tier) : tier_(tier) {}

  KeyPair generate_keypair() override {
    EvpKey key;
    key.p = EVP_EC_gen(curve_name(tier_));
    if (!key.p) ssl_fail("EVP_EC_gen");

    KeyPair kp;
    kp.private_key = encode_key(key.p, /*private_part=*/true);
    kp.public_key = encode_key(key.p, /*private_part=*/false);
    return kp;
  }

  Bytes sign(BytesView private_key, BytesView message) const override {
    EvpKey key = decode_key(private_key, /*private_part=*/true);
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx) ssl_fail("EVP_MD_CTX_new");
    Bytes sig;
    size_t sig_len = 0;
    if (EVP_DigestSignInit(ctx, nullptr, EVP_sha256(), nullptr, key.p) == 1 &&
        EVP_DigestSign(ctx, nullptr, &sig_len, message.data(), message.size()) == 1) {
      sig.resize(sig_len);
      if (EVP_DigestSign(ctx, sig.data(), &sig_len, message.data(), message.size()) != 1) {
        EVP_MD_CTX_free(ctx);
        ssl_fail("EVP_DigestSign");
      }
      sig.resize(sig_len);
    } else {
      EVP_MD_CTX_free(ctx);
      ssl_fail("EVP_DigestSignInit");
    }
    EVP_MD_CTX_free(ctx);
    return sig;
  }

  bool verify(BytesView public_key, BytesView message, BytesView signature) const override {
    EvpKey key;
    try {
      key = decode_key(public_key, /*private_part=*/false);
    } catch (const std::runtime_error&) {
      return false;
    }
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx) ssl_fail("EVP_MD_CTX_new");
    bool ok = EVP_DigestVerifyInit(ctx, nullptr, EVP_sha256(), nullptr, key.p) == 1 &&
              EVP_DigestVerify(ctx, signature.data(), signature.size(), message.data(),
                               message.size()) == 1;
    EVP_MD_CTX_free(ctx);
    return ok;
  }

  std::size_t max_signature_size() const override {
    switch (tier_) {
      case CurveTier::Secp224r1: return 64;
      case CurveTier::BrainpoolP256r1: return 72;
      case CurveTier::Secp384r1: return 104;
      case CurveTier::BrainpoolP512r1: return 139;
    }
    return 139;
  }

  std::string name() const override { return std::string("ecdsa/") + curve_name(tier_); }

 private:
  static Bytes encode_key(EVP_PKEY* key, bool private_part) {
    int sel = private_part ? EVP_PKEY_KEYPAIR : EVP_PKEY_PUBLIC_KEY;
    OSSL_ENCODER_CTX* ectx = OSSL_ENCODER_CTX_new_for_pkey(key, sel, "DER",
                                                           private_part ? "PrivateKeyInfo"
                                                                        : "SubjectPublicKeyInfo",
                                                           nullptr);
    if (!ectx) ssl_fail("OSSL_ENCODER_CTX_new_for_pkey");
    unsigned char* der = nullptr;
    size_t der_len = 0;
    if (OSSL_ENCODER_to_data(ectx, &der, &der_len) != 1) {
      OSSL_ENCODER_CTX_free(ectx);
      ssl_fail("OSSL_ENCODER_to_data");
    }
    Bytes out(der, der + der_len);
    OPENSSL_free(der);
    OSSL_ENCODER_CTX_free(ectx);
    return out;
  }

  EvpKey decode_key(BytesView der, bool private_part) const {
    EvpKey key;
    int sel = private_part ? EVP_PKEY_KEYPAIR : EVP_PKEY_PUBLIC_KEY;
    OSSL_DECODER_CTX* dctx = OSSL_DECODER_CTX_new_for_pkey(&key.p, "DER",
                                                           private_part ? "PrivateKeyInfo"
                                                                        : "SubjectPublicKeyInfo",
                                                           "EC", sel, nullptr, nullptr);
    if (!dctx) ssl_fail("OSSL_DECODER_CTX_new_for_pkey");
    const unsigned char* p = der.data();
    size_t len = der.size();
    int ok = OSSL_DECODER_from_data(dctx, &p, &len);
    OSSL_DECODER_CTX_free(dctx);
    if (ok != 1 || !key.p) ssl_fail("OSSL_DECODER_from_data");
    return key;
  }

  CurveTier tier_;
};

// SplitMix64-based MAC, good enough to make flipped bytes fail.
std::uint64_t mix64(std::uint64_t x) {
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class FakeScheme final : public SignatureScheme {
 public:
  explicit FakeScheme(std::uint64_t seed) : state_(mix64(seed ^ 0xc2b2ae3d27d4eb4fULL)) {}

  KeyPair generate_keypair() override {
    Bytes key(16);
    std::uint64_t a = state_ = mix64(state_ + 0x9e3779b97f4a7c15ULL);
    std::uint64_t b = state_ = mix64(state_ + 0x9e3779b97f4a7c15ULL);
    std::memcpy(key.data(), &a, 8);
    std::memcpy(key.data() + 8, &b, 8);
    return {key, key};
  }

  Bytes sign(BytesView private_key, BytesView message) const override {
    std::uint64_t h0 = 0x6a09e667f3bcc908ULL;
    std::uint64_t h1 = 0xbb67ae8584caa73bULL;
    auto absorb = [&](BytesView data) {
      std::size_t i = 0;
      while (i < data.size()) {
        std::uint64_t w = 0;
        std::size_t n = std::min<std::size_t>(8, data.size() - i);
        std::memcpy(&w, data.data() + i, n);
        h0 = mix64(h0 ^ w);
        h1 = mix64(h1 + w + h0);
        i += n;
      }
      h0 = mix64(h0 ^ data.size());
    };
    absorb(private_key);
    absorb(message);
    Bytes sig(16);
    std::memcpy(sig.data(), &h0, 8);
    std::memcpy(sig.data() + 8, &h1, 8);
    return sig;
  }

  bool verify(BytesView public_key, BytesView message, BytesView signature) const override {
    Bytes expect = sign(public_key, message);
    return signature.size() == expect.size() &&
           std::memcmp(signature.data(), expect.data(), expect.size()) == 0;
  }

  std::size_t max_signature_size() const override { return 16; }
  std::string name() const override { return "fake/keyed-hash"; }

 private:
  std::uint64_t state_;
};

}  // namespace

std::unique_ptr<SignatureScheme> make_ecdsa_scheme(CurveTier tier) {
  return std::make_unique<EcdsaScheme>(tier);
}

std::unique_ptr<SignatureScheme> make_fake_scheme(std::uint64_t seed) {
  return std::make_unique<FakeScheme>(seed);
}

}  // namespace cats::crypto
