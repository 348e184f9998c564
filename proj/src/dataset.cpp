#include "vtreid/dataset.hpp"

#include <algorithm>
#include <cmath>
#include "json.hpp"
#include <set>
#include <sstream>

#include "byte_io.hpp"
#include "vtreid/error.hpp"
#include "vtreid/rng.hpp"

namespace vtreid {

namespace {

constexpr std::string_view kDatasetMagic = "VTRD";
constexpr std::uint16_t kDatasetVersion = 1;

std::string at_line(std::size_t line) { return "line " + std::to_string(line) + ": "; }

Modality parse_modality(const std::string& s, std::size_t line) {
  if (s == "visual") return Modality::visual;
  if (s == "text") return Modality::text;
  throw Error(Errc::ParseError, at_line(line) + "unknown modality '" + s + "'");
}

// Tracks per-modality dims and id uniqueness while records stream in.
class RecordChecker {
 public:
  void check(const FeatureRecord& r, const std::string& where) {
    if (r.id.empty()) throw Error(Errc::ParseError, where + "empty id");
    if (r.vector.empty()) throw Error(Errc::ParseError, where + "empty vector");
    if (!all_finite(r.vector)) throw Error(Errc::ParseError, where + "non-finite vector entry");
    if (r.identity < 1) throw Error(Errc::ParseError, where + "identity labels start at 1");
    auto& dim = dims_[static_cast<int>(r.modality)];
    if (dim == 0) {
      dim = r.vector.size();
    } else if (dim != r.vector.size()) {
      throw Error(Errc::DimInconsistent, where + std::string(modality_name(r.modality)) +
                                             " vector has " + std::to_string(r.vector.size()) +
                                             " entries, earlier rows have " + std::to_string(dim));
    }
    if (!seen_[static_cast<int>(r.modality)].insert(r.id).second) {
      throw Error(Errc::DuplicateId, where + "duplicate " + std::string(modality_name(r.modality)) +
                                         " id '" + r.id + "'");
    }
  }

 private:
  std::size_t dims_[2] = {0, 0};
  std::set<std::string> seen_[2];
};

}  // namespace

std::string_view modality_name(Modality m) noexcept {
  return m == Modality::visual ? "visual" : "text";
}

FeatureDataset::FeatureDataset(std::vector<FeatureRecord> records, SplitRule rule)
    : records_(std::move(records)) {
  if (records_.empty()) throw Error(Errc::EmptyDataset, "dataset has no records");
  RecordChecker checker;
  std::set<int> identities;
  std::set<int> cameras;
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& r = records_[i];
    checker.check(r, "record " + std::to_string(i) + ": ");
    identities.insert(r.identity);
    cameras.insert(r.camera);
    (r.modality == Modality::visual ? visual_dim_ : text_dim_) = r.vector.size();

    auto [it, fresh] = samples_.try_emplace(r.id, Sample{r.id, r.identity, r.camera, {}, {}});
    Sample& s = it->second;
    if (!fresh && (s.identity != r.identity || s.camera != r.camera)) {
      throw Error(Errc::ParseError, "records of sample '" + r.id + "' disagree on identity/camera");
    }
    (r.modality == Modality::visual ? s.visual : s.text) = i;
  }
  identity_count_ = static_cast<std::size_t>(*identities.rbegin());
  camera_count_ = cameras.size();
  splits_ = make_splits(samples_, rule);
}

const Sample& FeatureDataset::sample(const std::string& id) const {
  auto it = samples_.find(id);
  if (it == samples_.end()) throw Error(Errc::EmptyDataset, "no sample '" + id + "'");
  return it->second;
}

const Vec64& FeatureDataset::vector(const std::string& sample_id, Modality m) const {
  const Sample& s = sample(sample_id);
  const auto& idx = m == Modality::visual ? s.visual : s.text;
  if (!idx) {
    throw Error(Errc::ModeDataMismatch,
                "sample '" + sample_id + "' has no " + std::string(modality_name(m)) + " record");
  }
  return records_[*idx].vector;
}

DatasetSplits make_splits(const std::map<std::string, Sample>& samples, const SplitRule& rule) {
  if (!(rule.train_identity_fraction >= 0.0 && rule.train_identity_fraction <= 1.0)) {
    throw Error(Errc::InvalidConfig, "train identity fraction must lie in [0, 1]");
  }
  std::map<int, std::vector<std::string>> by_identity;  // ids come out sorted
  for (const auto& [id, s] : samples) by_identity[s.identity].push_back(id);

  const auto n_train = static_cast<std::size_t>(
      std::ceil(rule.train_identity_fraction * static_cast<double>(by_identity.size())));
  DatasetSplits splits;
  std::size_t index = 0;
  for (const auto& [identity, ids] : by_identity) {
    if (index++ < n_train) {
      splits.train.insert(splits.train.end(), ids.begin(), ids.end());
      continue;
    }
    const std::size_t nq = std::min(rule.queries_per_identity, ids.size() - 1);
    splits.query.insert(splits.query.end(), ids.begin(), ids.begin() + nq);
    splits.gallery.insert(splits.gallery.end(), ids.begin() + nq, ids.end());
  }
  return splits;
}

std::vector<FeatureRecord> parse_jsonl(const std::string& text) {
  std::vector<FeatureRecord> out;
  RecordChecker checker;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = at_line(lineno);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::ParseError, where + e.what());
    }
    FeatureRecord r;
    try {
      r.id = j.at("id").get<std::string>();
      r.identity = j.at("identity").get<int>();
      r.camera = j.at("camera").get<int>();
      r.modality = parse_modality(j.at("modality").get<std::string>(), lineno);
      for (const auto& v : j.at("vector")) {
        if (!v.is_number()) throw Error(Errc::ParseError, where + "vector entries must be numbers");
        r.vector.push_back(v.get<double>());
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::ParseError, where + e.what());
    }
    checker.check(r, where);
    out.push_back(std::move(r));
  }
  return out;
}

FeatureDataset load_dataset(const std::filesystem::path& path, SplitRule rule) {
  const std::string bytes = detail::read_file(path);
  if (bytes.compare(0, kDatasetMagic.size(), kDatasetMagic) != 0) {
    return FeatureDataset(parse_jsonl(bytes), rule);
  }
  detail::ByteReader in(bytes, Errc::ParseError);
  in.raw(kDatasetMagic.size());
  const std::uint16_t version = in.u16();
  if (version != kDatasetVersion) {
    throw Error(Errc::VersionMismatch, "dataset version " + std::to_string(version));
  }
  const std::uint32_t count = in.u32();
  std::vector<FeatureRecord> records;
  records.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    FeatureRecord r;
    r.id = in.str16();
    r.identity = in.i32();
    r.camera = in.i32();
    const std::uint8_t m = in.u8();
    if (m > 1) throw Error(Errc::ParseError, "record " + std::to_string(i) + ": bad modality");
    r.modality = static_cast<Modality>(m);
    const std::uint32_t dim = in.u32();
    if (dim > in.remaining() / 8) throw Error(Errc::ParseError, "record " + std::to_string(i) + ": truncated");
    r.vector.resize(dim);
    for (double& v : r.vector) v = in.f64();
    records.push_back(std::move(r));
  }
  if (in.remaining() != 0) throw Error(Errc::ParseError, "trailing bytes after records");
  return FeatureDataset(std::move(records), rule);
}

void save_dataset_jsonl(const FeatureDataset& ds, const std::filesystem::path& path) {
  std::string out;
  for (const auto& r : ds.records()) {
    nlohmann::ordered_json j;
    j["id"] = r.id;
    j["identity"] = r.identity;
    j["camera"] = r.camera;
    j["modality"] = modality_name(r.modality);
    j["vector"] = r.vector;
    out += j.dump();
    out += '\n';
  }
  detail::write_file_atomic(path, out);
}

void save_dataset_binary(const FeatureDataset& ds, const std::filesystem::path& path) {
  detail::ByteWriter w;
  w.raw(kDatasetMagic);
  w.u16(kDatasetVersion);
  w.u32(static_cast<std::uint32_t>(ds.records().size()));
  for (const auto& r : ds.records()) {
    w.str16(r.id);
    w.i32(r.identity);
    w.i32(r.camera);
    w.u8(static_cast<std::uint8_t>(r.modality));
    w.u32(static_cast<std::uint32_t>(r.vector.size()));
    for (double v : r.vector) w.f64(v);
  }
  detail::write_file_atomic(path, w.bytes());
}

FeatureDataset synth_generate(const SynthSpec& spec, SplitRule rule) {
  if (spec.identities < 2) throw Error(Errc::BadSpec, "need at least two identities");
  if (spec.samples_per_identity < 1) throw Error(Errc::BadSpec, "need at least one sample per identity");
  if (spec.visual_dim < 1 || spec.text_dim < 1) throw Error(Errc::BadSpec, "dims must be positive");
  if (!(spec.cluster_spread > 0.0) || !(spec.noise >= 0.0) || !std::isfinite(spec.cluster_spread) ||
      !std::isfinite(spec.noise)) {
    throw Error(Errc::BadSpec, "spread must be positive and noise non-negative");
  }
  Rng proto_rng = Rng::stream(spec.seed, "synth-prototypes");
  Rng sample_rng = Rng::stream(spec.seed, "synth-samples");

  // Text prototypes are a fixed random linear image of the visual prototypes
  // plus an identity-specific residual, so the modalities are correlated but
  // not redundant.
  const double proj_scale = 1.0 / std::sqrt(static_cast<double>(spec.visual_dim));
  Mat64 projection(spec.text_dim, spec.visual_dim);
  for (double& v : projection.values()) v = proto_rng.normal(0.0, proj_scale);

  std::vector<FeatureRecord> records;
  records.reserve(2 * spec.identities * spec.samples_per_identity);
  char id[48];
  for (std::size_t p = 0; p < spec.identities; ++p) {
    Vec64 visual_proto(spec.visual_dim);
    for (double& v : visual_proto) v = proto_rng.normal(0.0, spec.cluster_spread);
    Vec64 text_proto(spec.text_dim);
    for (std::size_t r = 0; r < spec.text_dim; ++r) {
      text_proto[r] = 0.5 * dot(projection.row(r), visual_proto) +
                      proto_rng.normal(0.0, 0.5 * spec.cluster_spread);
    }
    const int identity = static_cast<int>(p + 1);
    for (std::size_t s = 0; s < spec.samples_per_identity; ++s) {
      std::snprintf(id, sizeof id, "p%04zu_s%03zu", p + 1, s);
      FeatureRecord vis{id, identity, 1, Modality::visual, visual_proto};
      for (double& v : vis.vector) v += sample_rng.normal(0.0, 1.0) * spec.noise;
      FeatureRecord txt{id, identity, 1, Modality::text, text_proto};
      for (double& v : txt.vector) v += sample_rng.normal(0.0, 1.0) * spec.noise;
      records.push_back(std::move(vis));
      records.push_back(std::move(txt));
    }
  }
  return FeatureDataset(std::move(records), rule);
}

}  // namespace vtreid
