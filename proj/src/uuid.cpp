#include "cats/uuid.hpp"

#include <stdexcept>

namespace cats {

static constexpr char kHex[] = "0123456789abcdef";

std::string Uuid::to_string() const {
  // 8-4-4-4-12 layout
  std::string out;
  out.reserve(36);
  for (int i = 0; i < 16; ++i) {
    if (i == 4 || i == 6 || i == 8 || i == 10) out.push_back('-');
    out.push_back(kHex[bytes[i] >> 4]);
    out.push_back(kHex[bytes[i] & 0xf]);
  }
  return out;
}

static int hex_val(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

Uuid Uuid::from_string(const std::string& s) {
  Uuid u;
  int bi = 0;
  int hi = -1;
  for (char c : s) {
    if (c == '-') continue;
    int v = hex_val(c);
    if (v < 0 || bi >= 16) throw std::invalid_argument("malformed uuid: " + s);
    if (hi < 0) {
      hi = v;
    } else {
      u.bytes[bi++] = static_cast<std::uint8_t>((hi << 4) | v);
      hi = -1;
    }
  }
  if (bi != 16 || hi >= 0) throw std::invalid_argument("malformed uuid: " + s);
  return u;
}

Uuid Uuid::from_u64(std::uint64_t v) {
  Uuid u;
  // splitmix64 fill so nearby counters do not share prefixes
  std::uint64_t x = v + 0x9e3779b97f4a7c15ULL;
  for (int w = 0; w < 2; ++w) {
    std::uint64_t z = x += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    z ^= z >> 31;
    std::memcpy(u.bytes.data() + w * 8, &z, 8);
  }
  return u;
}

}  // namespace cats
