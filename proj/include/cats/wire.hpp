#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <vector>

#include "cats/uuid.hpp"

namespace cats::wire {

// Canonical field encoding: 1 tag byte, 2-byte big-endian length, value.
// Field order is fixed per structure, so encodings are deterministic and
// signable.

struct MalformedInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class Writer {
 public:
  void field(std::uint8_t tag, std::span<const std::uint8_t> value) {
    if (value.size() > 0xffff) throw MalformedInput("field too long");
    buf_.push_back(tag);
    buf_.push_back(static_cast<std::uint8_t>(value.size() >> 8));
    buf_.push_back(static_cast<std::uint8_t>(value.size() & 0xff));
    buf_.insert(buf_.end(), value.begin(), value.end());
  }

  void u8(std::uint8_t tag, std::uint8_t v) { field(tag, {&v, 1}); }

  void u64(std::uint8_t tag, std::uint64_t v) {
    std::uint8_t b[8];
    for (int i = 7; i >= 0; --i) {
      b[i] = static_cast<std::uint8_t>(v & 0xff);
      v >>= 8;
    }
    field(tag, b);
  }

  void f64(std::uint8_t tag, double v) { u64(tag, std::bit_cast<std::uint64_t>(v)); }

  void uuid(std::uint8_t tag, const Uuid& u) { field(tag, u.bytes); }

  const std::vector<std::uint8_t>& bytes() const { return buf_; }
  std::vector<std::uint8_t> take() { return std::move(buf_); }

 private:
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

  bool done() const { return pos_ == data_.size(); }

  // Tag of the next field, without consuming it. -1 when exhausted.
  int peek_tag() const {
    if (pos_ >= data_.size()) return -1;
    return data_[pos_];
  }

  // Reads the next field; the tag must match.
  std::span<const std::uint8_t> field(std::uint8_t expected_tag) {
    if (pos_ + 3 > data_.size()) throw MalformedInput("truncated field header");
    std::uint8_t tag = data_[pos_];
    if (tag != expected_tag) throw MalformedInput("unexpected field tag");
    std::size_t len = (static_cast<std::size_t>(data_[pos_ + 1]) << 8) | data_[pos_ + 2];
    pos_ += 3;
    if (pos_ + len > data_.size()) throw MalformedInput("truncated field value");
    auto out = data_.subspan(pos_, len);
    pos_ += len;
    return out;
  }

  std::uint8_t u8(std::uint8_t tag) {
    auto v = field(tag);
    if (v.size() != 1) throw MalformedInput("bad u8 length");
    return v[0];
  }

  std::uint64_t u64(std::uint8_t tag) {
    auto v = field(tag);
    if (v.size() != 8) throw MalformedInput("bad u64 length");
    std::uint64_t out = 0;
    for (auto b : v) out = (out << 8) | b;
    return out;
  }

  double f64(std::uint8_t tag) { return std::bit_cast<double>(u64(tag)); }

  Uuid uuid(std::uint8_t tag) {
    auto v = field(tag);
    if (v.size() != 16) throw MalformedInput("bad uuid length");
    Uuid u;
    std::memcpy(u.bytes.data(), v.data(), 16);
    return u;
  }

  void expect_done() const {
    if (!done()) throw MalformedInput("trailing bytes");
  }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

}  // namespace cats::wire
