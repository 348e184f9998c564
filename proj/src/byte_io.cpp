#include "byte_io.hpp"

#include "vtreid/io.hpp"

#include <zlib.h>

#include <fstream>
#include <sstream>
#include <system_error>

namespace vtreid::detail {

void ByteWriter::str16(std::string_view s) {
  if (s.size() > 0xffff) throw Error(Errc::InvalidConfig, "string too long for u16 length");
  u16(static_cast<std::uint16_t>(s.size()));
  raw(s);
}

std::string_view ByteReader::raw(std::size_t n) {
  if (n > remaining()) throw Error(overrun_, "unexpected end of data");
  auto out = bytes_.substr(at_, n);
  at_ += n;
  return out;
}

std::string ByteReader::str16() {
  const std::uint16_t n = u16();
  return std::string(raw(n));
}

std::uint64_t ByteReader::le(int n) {
  const auto b = raw(static_cast<std::size_t>(n));
  std::uint64_t v = 0;
  for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[i])) << (8 * i);
  return v;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

std::uint32_t crc32(std::string_view bytes) {
  uLong c = ::crc32(0L, Z_NULL, 0);
  c = ::crc32(c, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(c);
}

}  // namespace vtreid::detail

namespace vtreid {

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::IoError, "cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(Errc::IoError, "short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(Errc::IoError, "rename to " + path.string() + ": " + ec.message());
}

}  // namespace vtreid
