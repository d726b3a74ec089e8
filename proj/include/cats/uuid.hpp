#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <functional>
#include <string>

namespace cats {

// 16-byte identifier used for both vehicle identities (vid) and
// pseudonym certificates (pid).
struct Uuid {
  std::array<std::uint8_t, 16> bytes{};

  bool operator==(const Uuid&) const = default;
  auto operator<=>(const Uuid&) const = default;

  bool is_nil() const {
    for (auto b : bytes)
      if (b != 0) return false;
    return true;
  }

  std::string to_string() const;
  static Uuid from_string(const std::string& s);  // throws std::invalid_argument

  // Deterministic UUID from a 64-bit counter, for simulation fleets.
  static Uuid from_u64(std::uint64_t v);
};

struct UuidHash {
  std::size_t operator()(const Uuid& u) const {
    std::uint64_t a, b;
    std::memcpy(&a, u.bytes.data(), 8);
    std::memcpy(&b, u.bytes.data() + 8, 8);
    a ^= b * 0x9e3779b97f4a7c15ULL;
    a ^= a >> 29;
    a *= 0xbf58476d1ce4e5b9ULL;
    a ^= a >> 32;
    return static_cast<std::size_t>(a);
  }
};

}  // namespace cats

template <>
struct std::hash<cats::Uuid> {
  std::size_t operator()(const cats::Uuid& u) const { return cats::UuidHash{}(u); }
};
