#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vtreid/augmentation.hpp"
#include "vtreid/encoders.hpp"
#include "vtreid/numerics.hpp"
#include "vtreid/rng.hpp"

namespace vtreid {

/// Cluster centers (K x d) and the Student-t degrees of freedom.
struct ClusterState {
  Mat64 centers;
  double alpha = 1.0;

  std::size_t clusters() const noexcept { return centers.rows(); }
  std::size_t dim() const noexcept { return centers.cols(); }

  bool operator==(const ClusterState&) const = default;
};

struct TextLossConfig {
  double eta = 10.0;          // weight of the instance-contrastive term
  double tau_instance = 0.5;  // instance-contrastive temperature
  std::size_t batch_size = 64;
};

/// Student-t soft assignment of z to each center:
/// q_k ∝ (1 + ||z - mu_k||^2 / alpha)^(-(alpha + 1) / 2).
Vec64 soft_assign(std::span<const double> z, const ClusterState& state);

/// Rows of soft assignments for each row of `embeddings`.
Mat64 soft_assign_rows(const Mat64& embeddings, const ClusterState& state);

/// Sharpened target p_jk = (q_jk^2 / f_k) / sum_k' (q_jk'^2 / f_k'), where
/// f_k = sum_j q_jk. Throws DegenerateColumn when some f_k is zero.
Mat64 target_distribution(const Mat64& q);

/// Mean over rows of KL(P_j || Q_j).
double kl_divergence_loss(const Mat64& p, const Mat64& q);

struct ClusteringLossResult {
  double loss = 0.0;
  Mat64 q;                  // soft assignments of the embeddings
  Mat64 grad_embeddings;    // M x d
  Mat64 grad_centers;       // K x d
};

/// Mean KL(P_j || Q_j) where Q comes from soft-assigning each embedding row.
/// P is a constant target; gradients flow into the embeddings and centers.
ClusteringLossResult clustering_loss(const Mat64& p, const Mat64& embeddings,
                                     const ClusterState& state);

struct InstanceLossResult {
  double loss = 0.0;
  std::vector<Vec64> grads;  // one per view
};

/// Normalized-temperature cross-entropy over 2M views, where view i pairs
/// with view i + M (mod 2M). Each view's partition excludes itself. Loss is
/// the mean over all 2M views.
InstanceLossResult instance_cl_loss(std::span<const Vec64> views, double tau);

struct TextLossResult {
  double loss = 0.0;
  double clustering = 0.0;
  double instance = 0.0;
  Mat64 target;
  EncoderParams encoder_grads;
  Mat64 center_grads;
};

/// Combined text objective: clustering term on the un-augmented embeddings
/// plus eta times the instance-contrastive term on two augmented views per
/// sample. The target distribution is recomputed from this batch.
TextLossResult text_loss(std::span<const Vec64> raw_batch, const EncoderParams& encoder,
                         const ClusterState& state, const TextLossConfig& cfg,
                         const Augmentation& aug, Rng& rng);

/// text_loss with a caller-supplied target held constant.
TextLossResult text_loss_against(std::span<const Vec64> raw_batch, const EncoderParams& encoder,
                                 const ClusterState& state, const Mat64& target,
                                 const TextLossConfig& cfg, const Augmentation& aug, Rng& rng);

/// k-means++ seeding followed by 50 Lloyd iterations.
ClusterState init_centers(std::span<const Vec64> embeddings, std::size_t k, std::uint64_t seed,
                          double alpha = 1.0);

}  // namespace vtreid
