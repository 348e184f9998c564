#include "vtreid/checkpoint.hpp"

#include "byte_io.hpp"
#include "vtreid/error.hpp"

namespace vtreid {

namespace {

constexpr std::string_view kMagic = "VTCK";
constexpr std::uint16_t kVersion = 1;

using detail::ByteReader;
using detail::ByteWriter;

void put_doubles(ByteWriter& w, std::span<const double> v) {
  w.u64(v.size());
  for (double x : v) w.f64(x);
}

Vec64 get_doubles(ByteReader& r) {
  const std::uint64_t n = r.u64();
  if (n > r.remaining() / 8) throw Error(Errc::ChecksumMismatch, "vector length exceeds file");
  Vec64 v(n);
  for (double& x : v) x = r.f64();
  return v;
}

void put_mat(ByteWriter& w, const Mat64& m) {
  w.u64(m.rows());
  w.u64(m.cols());
  for (double x : m.values()) w.f64(x);
}

Mat64 get_mat(ByteReader& r) {
  const std::uint64_t rows = r.u64();
  const std::uint64_t cols = r.u64();
  if (cols != 0 && rows > r.remaining() / 8 / cols) {
    throw Error(Errc::ChecksumMismatch, "matrix size exceeds file");
  }
  Vec64 v(rows * cols);
  for (double& x : v) x = r.f64();
  return Mat64(rows, cols, std::move(v));
}

void put_encoder(ByteWriter& w, const EncoderParams& p) {
  w.u32(static_cast<std::uint32_t>(p.layers().size()));
  for (const auto& layer : p.layers()) {
    put_mat(w, layer.weight);
    put_doubles(w, layer.bias);
  }
}

EncoderParams get_encoder(ByteReader& r) {
  const std::uint32_t n = r.u32();
  std::vector<DenseLayer> layers;
  for (std::uint32_t i = 0; i < n; ++i) {
    Mat64 w = get_mat(r);
    Vec64 b = get_doubles(r);
    layers.push_back({std::move(w), std::move(b)});
  }
  return EncoderParams(std::move(layers));
}

void put_moments(ByteWriter& w, const AdamMoments& m) {
  w.u64(m.steps);
  put_doubles(w, m.m);
  put_doubles(w, m.v);
}

AdamMoments get_moments(ByteReader& r) {
  AdamMoments m;
  m.steps = r.u64();
  m.m = get_doubles(r);
  m.v = get_doubles(r);
  return m;
}

}  // namespace

std::string encode_checkpoint(const TrainState& s) {
  ByteWriter w;
  w.raw(kMagic);
  w.u16(kVersion);
  w.f64(s.visual.momentum);
  put_encoder(w, s.visual.query);
  put_encoder(w, s.visual.key);
  put_encoder(w, s.text);
  w.f64(s.clusters.alpha);
  put_mat(w, s.clusters.centers);
  w.u64(s.queue.capacity());
  w.u64(s.queue.dim());
  w.u64(s.queue.size());
  for (const auto& k : s.queue.entries()) {
    for (double x : k) w.f64(x);
  }
  put_moments(w, s.visual_moments);
  put_moments(w, s.text_moments);
  put_moments(w, s.center_moments);
  w.u64(s.iteration);
  std::string bytes = w.bytes();
  ByteWriter crc;
  crc.u32(detail::crc32(bytes));
  return bytes + crc.bytes();
}

TrainState decode_checkpoint(const std::string& bytes) {
  constexpr std::size_t kHeader = 4 + 2;
  if (bytes.size() >= kMagic.size() && bytes.compare(0, kMagic.size(), kMagic) != 0) {
    throw Error(Errc::IoError, "not a checkpoint file");
  }
  if (bytes.size() < kHeader + 4) throw Error(Errc::ChecksumMismatch, "checkpoint truncated");
  ByteReader header(std::string_view(bytes).substr(kMagic.size(), 2), Errc::ChecksumMismatch);
  const std::uint16_t version = header.u16();
  if (version != kVersion) {
    throw Error(Errc::VersionMismatch, "checkpoint version " + std::to_string(version) +
                                           ", expected " + std::to_string(kVersion));
  }
  const std::string_view body = std::string_view(bytes).substr(0, bytes.size() - 4);
  ByteReader tail(std::string_view(bytes).substr(bytes.size() - 4), Errc::ChecksumMismatch);
  if (tail.u32() != detail::crc32(body)) {
    throw Error(Errc::ChecksumMismatch, "checkpoint CRC does not match contents");
  }

  ByteReader r(body.substr(kHeader), Errc::ChecksumMismatch);
  TrainState s;
  s.visual.momentum = r.f64();
  s.visual.query = get_encoder(r);
  s.visual.key = get_encoder(r);
  s.text = get_encoder(r);
  s.clusters.alpha = r.f64();
  s.clusters.centers = get_mat(r);
  const std::uint64_t capacity = r.u64();
  const std::uint64_t dim = r.u64();
  const std::uint64_t count = r.u64();
  s.queue = KeyQueue(capacity, dim);
  if (count > capacity || (dim != 0 && count > r.remaining() / 8 / dim)) {
    throw Error(Errc::ChecksumMismatch, "queue size exceeds file");
  }
  std::vector<Vec64> keys(count, Vec64(dim));
  for (auto& k : keys) {
    for (double& x : k) x = r.f64();
  }
  s.queue.push(keys);
  s.visual_moments = get_moments(r);
  s.text_moments = get_moments(r);
  s.center_moments = get_moments(r);
  s.iteration = r.u64();
  if (r.remaining() != 0) throw Error(Errc::ChecksumMismatch, "trailing bytes in checkpoint");
  return s;
}

void save_checkpoint(const TrainState& state, const std::filesystem::path& path) {
  detail::write_file_atomic(path, encode_checkpoint(state));
}

TrainState load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(detail::read_file(path));
}

}  // namespace vtreid
