#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vtreid/numerics.hpp"

namespace vtreid {

enum class Modality : std::uint8_t { visual = 0, text = 1 };

std::string_view modality_name(Modality m) noexcept;

/// One feature vector. A visual record and a text record of the same sample
/// share `id`; ids are unique within a modality.
struct FeatureRecord {
  std::string id;
  int identity = 0;
  int camera = 0;
  Modality modality = Modality::visual;
  Vec64 vector;

  bool operator==(const FeatureRecord&) const = default;
};

/// A sample pairs the visual and text record that share an id.
struct Sample {
  std::string id;
  int identity = 0;
  int camera = 0;
  std::optional<std::size_t> visual;  // index into records
  std::optional<std::size_t> text;
};

/// Sample ids per role. Train identities are disjoint from query/gallery
/// identities; query and gallery share identities but not samples.
struct DatasetSplits {
  std::vector<std::string> train;
  std::vector<std::string> query;
  std::vector<std::string> gallery;
};

struct SplitRule {
  double train_identity_fraction = 0.5;
  std::size_t queries_per_identity = 5;
};

class FeatureDataset {
 public:
  FeatureDataset() = default;
  /// Validates records (finite vectors, labels in range, per-modality dims,
  /// unique ids per modality) and assigns splits with `rule`.
  explicit FeatureDataset(std::vector<FeatureRecord> records, SplitRule rule = {});

  const std::vector<FeatureRecord>& records() const noexcept { return records_; }
  const std::map<std::string, Sample>& samples() const noexcept { return samples_; }
  const Sample& sample(const std::string& id) const;
  const DatasetSplits& splits() const noexcept { return splits_; }

  std::size_t identity_count() const noexcept { return identity_count_; }
  std::size_t camera_count() const noexcept { return camera_count_; }
  std::size_t visual_dim() const noexcept { return visual_dim_; }
  std::size_t text_dim() const noexcept { return text_dim_; }
  bool has(Modality m) const noexcept { return m == Modality::visual ? visual_dim_ : text_dim_; }

  /// Vector of a sample in one modality; throws ModeDataMismatch when absent.
  const Vec64& vector(const std::string& sample_id, Modality m) const;

 private:
  std::vector<FeatureRecord> records_;
  std::map<std::string, Sample> samples_;
  DatasetSplits splits_;
  std::size_t identity_count_ = 0;
  std::size_t camera_count_ = 0;
  std::size_t visual_dim_ = 0;
  std::size_t text_dim_ = 0;
};

/// Splits identities in ascending order: the first fraction (rounded up)
/// train, the rest evaluate. Per evaluation identity the first
/// queries_per_identity samples by id are queries (at most count - 1).
DatasetSplits make_splits(const std::map<std::string, Sample>& samples, const SplitRule& rule);

/// Reads either the JSON-lines format or the packed "VTRD" binary format,
/// detected by the leading magic bytes.
FeatureDataset load_dataset(const std::filesystem::path& path, SplitRule rule = {});

/// One JSON object per line: {"id","identity","camera","modality","vector"}.
void save_dataset_jsonl(const FeatureDataset& ds, const std::filesystem::path& path);

/// "VTRD", u16 version, u32 record count, then per record: u16 id length, id
/// bytes, i32 identity, i32 camera, u8 modality, u32 dim, dim x f64. All
/// little-endian.
void save_dataset_binary(const FeatureDataset& ds, const std::filesystem::path& path);

std::vector<FeatureRecord> parse_jsonl(const std::string& text);

struct SynthSpec {
  std::size_t identities = 20;
  std::size_t samples_per_identity = 10;
  std::size_t visual_dim = 32;
  std::size_t text_dim = 24;
  double cluster_spread = 1.0;
  double noise = 0.5;
  std::uint64_t seed = 0;
};

/// Seeded multimodal data: per identity a visual prototype and a text
/// prototype correlated with it; each sample is prototype + Gaussian noise in
/// both modalities.
FeatureDataset synth_generate(const SynthSpec& spec, SplitRule rule = {});

}  // namespace vtreid
