#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "nerv/error.hpp"

namespace nerv {

/// Little-endian byte sink.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void bytes(std::span<const std::uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }
  void raw(const std::string& s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
  /// u32 length prefix plus bytes.
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s);
  }

  std::size_t size() const { return buf_.size(); }
  std::vector<std::uint8_t>& buffer() { return buf_; }
  std::vector<std::uint8_t> take() { return std::move(buf_); }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> buf_;
};

/// Little-endian byte source; every read past the end throws CorruptStream
/// carrying the offending offset.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }

  std::span<const std::uint8_t> bytes(std::size_t n) {
    require(n, "byte run");
    auto out = data_.subspan(pos_, n);
    pos_ += n;
    return out;
  }
  std::string raw(std::size_t n) {
    auto b = bytes(n);
    return std::string(b.begin(), b.end());
  }
  std::string str(std::size_t max_len = 1 << 20) {
    const std::size_t at = pos_;
    const std::uint32_t n = u32();
    if (n > max_len) throw CorruptStream("string length " + std::to_string(n) + " too large", at);
    return raw(n);
  }

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }

  [[noreturn]] void fail(const std::string& what) const { throw CorruptStream(what, pos_); }
  [[noreturn]] void fail_at(const std::string& what, std::size_t at) const {
    throw CorruptStream(what, at);
  }

 private:
  void require(std::size_t n, const char* what) const {
    if (n > remaining()) {
      throw CorruptStream(std::string("truncated stream reading ") + what, pos_);
    }
  }
  std::uint64_t get(int n) {
    require(static_cast<std::size_t>(n), "integer");
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += n;
    return v;
  }

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

}  // namespace nerv
