#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vtreid/dataset.hpp"
#include "vtreid/encoders.hpp"
#include "vtreid/retrieval_eval.hpp"
#include "vtreid/text_cluster_contrast.hpp"
#include "vtreid/visual_contrast.hpp"

namespace vtreid {

/// Which losses are optimized: the four rows of the ablation table.
enum class TrainMode { baseline, text_only, video_only, total };

inline constexpr std::array<TrainMode, 4> kAllModes = {TrainMode::baseline, TrainMode::text_only,
                                                       TrainMode::video_only, TrainMode::total};

std::string_view mode_name(TrainMode m) noexcept;
TrainMode parse_mode(std::string_view s);

inline bool uses_video(TrainMode m) noexcept {
  return m == TrainMode::video_only || m == TrainMode::total;
}
inline bool uses_text(TrainMode m) noexcept {
  return m == TrainMode::text_only || m == TrainMode::total;
}

struct TrainConfig {
  std::size_t iterations = 180;
  std::size_t batch_size = 64;
  double tau = 0.07;
  double eta = 10.0;
  double tau_instance = 0.5;
  double momentum = 0.999;
  std::size_t queue_capacity = 4096;
  double learning_rate = 1e-3;
  double weight_decay_visual = 1e-5;
  double weight_decay_text = 1e-7;
  std::uint64_t seed = 0;
  TrainMode mode = TrainMode::total;
  std::size_t clusters = 0;  // 0: number of training identities
  std::size_t hidden_dim = 64;
  std::size_t embed_dim = 32;
  double aug_sigma = 0.1;
  double aug_dropout = 0.1;
  // In total mode, optimize only the text loss for this many iterations first.
  std::size_t text_warmup_iterations = 0;
  double fusion_weight = 0.5;

  /// Throws InvalidConfig on any out-of-range field.
  void validate() const;
};

struct AdamMoments {
  Vec64 m;
  Vec64 v;
  std::uint64_t steps = 0;

  bool operator==(const AdamMoments&) const = default;
};

struct AdamHyper {
  double learning_rate = 1e-3;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// One Adam update at step t (1-based). Decoupled weight decay
/// p <- p - lr * wd * p is applied before the moment update.
void adam_step(std::span<double> params, std::span<const double> grads, AdamMoments& moments,
               const AdamHyper& hyper, std::uint64_t t);

/// L_total = L_video + L_text. Throws NonFinite.
double total_loss(double visual_loss, double text_loss);

struct TrainState {
  EncoderPair visual;
  EncoderParams text;
  ClusterState clusters;
  KeyQueue queue{1, 1};
  AdamMoments visual_moments;
  AdamMoments text_moments;
  AdamMoments center_moments;
  std::uint64_t iteration = 0;  // completed iterations

  bool operator==(const TrainState&) const = default;
};

struct LossRecord {
  std::uint64_t iteration = 0;  // 1-based
  double video = 0.0;
  double text = 0.0;
  double total = 0.0;

  bool operator==(const LossRecord&) const = default;
};

struct TrainResult {
  TrainState state;
  std::vector<LossRecord> trace;
};

/// Encoders from seeded init, centers from k-means over the initial text
/// embeddings of the training split, empty queue and zero moments.
TrainState init_state(const TrainConfig& config, const FeatureDataset& dataset);

/// Runs iterations (state.iteration, config.iterations]. With no start state,
/// begins from init_state.
TrainResult train(const TrainConfig& config, const FeatureDataset& dataset);
TrainResult train(const TrainConfig& config, const FeatureDataset& dataset, TrainState start);

/// Fused query/gallery embeddings for the evaluation split.
struct EvalSet {
  std::vector<GalleryItem> queries;
  std::vector<GalleryItem> gallery;
};

EvalSet embed_eval_split(const TrainState& state, const FeatureDataset& dataset,
                         double fusion_weight);

/// Same split embedded by normalizing the raw feature vectors instead.
EvalSet raw_eval_split(const FeatureDataset& dataset, double fusion_weight);

/// Same-camera filtering is on whenever the dataset has more than one camera.
RankProtocol default_protocol(const FeatureDataset& dataset);

Metrics evaluate_state(const TrainState& state, const FeatureDataset& dataset, double fusion_weight);
Metrics evaluate_raw(const FeatureDataset& dataset, double fusion_weight);

struct AblationRow {
  TrainMode mode;
  Metrics metrics;
};

/// Trains every mode from the same seed and evaluates each on the
/// evaluation split; baseline is the untrained initialization.
std::vector<AblationRow> ablate(const TrainConfig& base, const FeatureDataset& dataset);

inline constexpr std::string_view kMetricsCsvHeader = "mode,mAP,rank1,rank5,rank10\n";

std::string loss_trace_csv(std::span<const LossRecord> trace);
std::string metrics_csv_row(std::string_view label, const Metrics& m);
std::string metrics_csv(std::span<const AblationRow> rows);
std::string metrics_table(std::span<const AblationRow> rows);

}  // namespace vtreid
