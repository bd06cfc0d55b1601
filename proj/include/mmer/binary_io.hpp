#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mmer/errors.hpp"

namespace mmer::binio {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

/// Appends little-endian encodings to a byte buffer.
class Writer {
 public:
  void bytes(std::string_view raw) { buf_.insert(buf_.end(), raw.begin(), raw.end()); }
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u16(std::uint16_t v) { put(v); }
  void u32(std::uint32_t v) { put(v); }
  void f32(float v) { put(std::bit_cast<std::uint32_t>(v)); }

  const std::vector<char>& buffer() const { return buf_; }

 private:
  template <typename U>
  void put(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  std::vector<char> buf_;
};

/// Bounds-checked little-endian cursor; every failure reports its byte offset.
class Reader {
 public:
  explicit Reader(std::span<const char> data) : data_(data) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }

  void expect_magic(std::string_view magic, std::string_view format) {
    require(magic.size(), std::string(format) + " magic");
    if (std::memcmp(data_.data() + pos_, magic.data(), magic.size()) != 0) {
      throw ParseError(std::string(format) + ": bad magic, expected \"" + std::string(magic) + "\"", pos_);
    }
    pos_ += magic.size();
  }
  std::string bytes(std::size_t n, std::string_view what) {
    require(n, what);
    std::string out(data_.data() + pos_, n);
    pos_ += n;
    return out;
  }
  std::uint8_t u8(std::string_view what) { return get<std::uint8_t>(what); }
  std::uint16_t u16(std::string_view what) { return get<std::uint16_t>(what); }
  std::uint32_t u32(std::string_view what) { return get<std::uint32_t>(what); }
  float f32(std::string_view what) { return std::bit_cast<float>(get<std::uint32_t>(what)); }

  /// Fails with expected vs actual byte counts when fewer than n bytes remain.
  void require(std::size_t n, std::string_view what) const {
    if (remaining() < n) {
      throw ParseError("truncated " + std::string(what) + ": expected " + std::to_string(n) +
                           " bytes, found " + std::to_string(remaining()),
                       pos_);
    }
  }

 private:
  template <typename U>
  U get(std::string_view what) {
    require(sizeof(U), what);
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<U>(static_cast<U>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i));
    }
    pos_ += sizeof(U);
    return v;
  }

  std::span<const char> data_;
  std::size_t pos_ = 0;
};

std::vector<char> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const char> bytes);

}  // namespace mmer::binio
