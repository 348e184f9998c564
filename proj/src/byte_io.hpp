#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "vtreid/error.hpp"

#include "vtreid/io.hpp"

namespace vtreid::detail {

// Little-endian encoder for the packed file formats.
class ByteWriter {
 public:
  void raw(std::string_view bytes) { buf_.insert(buf_.end(), bytes.begin(), bytes.end()); }
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u16(std::uint16_t v) { le(v, 2); }
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str16(std::string_view s);

  const std::string& bytes() const noexcept { return buf_; }

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  std::string buf_;
};

class ByteReader {
 public:
  // Running past the end raises `overrun`.
  ByteReader(std::string_view bytes, Errc overrun) : bytes_(bytes), overrun_(overrun) {}

  std::string_view raw(std::size_t n);
  std::uint8_t u8() { return static_cast<std::uint8_t>(le(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(le(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str16();

  std::size_t remaining() const noexcept { return bytes_.size() - at_; }

 private:
  std::uint64_t le(int n);
  std::string_view bytes_;
  std::size_t at_ = 0;
  Errc overrun_;
};

std::string read_file(const std::filesystem::path& path);

using vtreid::write_file_atomic;

std::uint32_t crc32(std::string_view bytes);

}  // namespace vtreid::detail
