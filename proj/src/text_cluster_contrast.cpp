#include "vtreid/text_cluster_contrast.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>

#include "vtreid/error.hpp"
#include "vtreid/visual_contrast.hpp"

namespace vtreid {

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

void check_state(const ClusterState& state) {
  if (state.clusters() < 2) throw Error(Errc::InvalidConfig, "need at least two clusters");
  if (!(state.alpha > 0.0)) throw Error(Errc::InvalidConfig, "alpha must be positive");
}

Mat64 rows_to_mat(std::span<const Vec64> rows) {
  const std::size_t d = rows.empty() ? 0 : rows.front().size();
  Mat64 m(rows.size(), d);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != d) throw Error(Errc::DimMismatch, "ragged embedding rows");
    std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
  }
  return m;
}

}  // namespace

Vec64 soft_assign(std::span<const double> z, const ClusterState& state) {
  check_state(state);
  if (z.size() != state.dim()) {
    throw Error(Errc::DimMismatch, "embedding dim " + std::to_string(z.size()) +
                                       " vs center dim " + std::to_string(state.dim()));
  }
  const double power = -(state.alpha + 1.0) / 2.0;
  Vec64 log_kernel(state.clusters());
  for (std::size_t k = 0; k < state.clusters(); ++k) {
    log_kernel[k] = power * std::log1p(squared_distance(z, state.centers.row(k)) / state.alpha);
  }
  return softmax(log_kernel);
}

Mat64 soft_assign_rows(const Mat64& embeddings, const ClusterState& state) {
  Mat64 q(embeddings.rows(), state.clusters());
  for (std::size_t j = 0; j < embeddings.rows(); ++j) {
    const Vec64 row = soft_assign(embeddings.row(j), state);
    std::copy(row.begin(), row.end(), q.row(j).begin());
  }
  return q;
}

Mat64 target_distribution(const Mat64& q) {
  const std::size_t n = q.rows();
  const std::size_t k = q.cols();
  if (n == 0 || k == 0) throw Error(Errc::EmptyInput, "empty assignment matrix");
  Vec64 f(k, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t c = 0; c < k; ++c) f[c] += q(j, c);
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (!(f[c] > 0.0)) {
      throw Error(Errc::DegenerateColumn, "cluster " + std::to_string(c) + " has zero mass");
    }
  }
  Mat64 p(n, k);
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      p(j, c) = q(j, c) * q(j, c) / f[c];
      s += p(j, c);
    }
    for (std::size_t c = 0; c < k; ++c) p(j, c) /= s;
  }
  return p;
}

double kl_divergence_loss(const Mat64& p, const Mat64& q) {
  if (p.rows() != q.rows() || p.cols() != q.cols()) {
    throw Error(Errc::ShapeMismatch, "P and Q shapes differ");
  }
  if (p.rows() == 0) throw Error(Errc::EmptyInput, "empty assignment matrix");
  double total = 0.0;
  for (std::size_t j = 0; j < p.rows(); ++j) {
    for (std::size_t c = 0; c < p.cols(); ++c) {
      const double pj = p(j, c);
      if (pj > 0.0) total += pj * std::log(pj / q(j, c));
    }
  }
  return total / static_cast<double>(p.rows());
}

ClusteringLossResult clustering_loss(const Mat64& p, const Mat64& embeddings,
                                     const ClusterState& state) {
  check_state(state);
  if (embeddings.cols() != state.dim()) {
    throw Error(Errc::DimMismatch, "embeddings and centers differ in dim");
  }
  if (p.rows() != embeddings.rows() || p.cols() != state.clusters()) {
    throw Error(Errc::ShapeMismatch, "target shape does not match embeddings x clusters");
  }
  const std::size_t m = embeddings.rows();
  const std::size_t d = state.dim();
  ClusteringLossResult out;
  out.q = soft_assign_rows(embeddings, state);
  out.loss = kl_divergence_loss(p, out.q);
  out.grad_embeddings = Mat64(m, d);
  out.grad_centers = Mat64(state.clusters(), d);

  // dL_j/dtheta = sum_k (q_jk - p_jk) dlog t_jk/dtheta, with
  // dlog t_jk/dz_j = -(alpha + 1)/alpha * (z_j - mu_k) / (1 + d_jk/alpha).
  const double a = state.alpha;
  const double inv_m = 1.0 / static_cast<double>(m);
  for (std::size_t j = 0; j < m; ++j) {
    const auto z = embeddings.row(j);
    auto gz = out.grad_embeddings.row(j);
    for (std::size_t k = 0; k < state.clusters(); ++k) {
      const auto mu = state.centers.row(k);
      const double dist = squared_distance(z, mu);
      const double coef =
          inv_m * (out.q(j, k) - p(j, k)) * (a + 1.0) / a / (1.0 + dist / a);
      auto gmu = out.grad_centers.row(k);
      for (std::size_t i = 0; i < d; ++i) {
        const double diff = z[i] - mu[i];
        gz[i] -= coef * diff;
        gmu[i] += coef * diff;
      }
    }
  }
  return out;
}

InstanceLossResult instance_cl_loss(std::span<const Vec64> views, double tau) {
  if (!(tau > 0.0)) throw Error(Errc::InvalidConfig, "temperature must be positive");
  if (views.empty() || views.size() % 2 != 0) {
    throw Error(Errc::OddCount, "instance loss needs an even, nonzero number of views, got " +
                                    std::to_string(views.size()));
  }
  const std::size_t n = views.size();
  const std::size_t half = n / 2;
  const std::size_t d = views.front().size();
  for (const auto& v : views) {
    if (v.size() != d) throw Error(Errc::DimMismatch, "views differ in dim");
    if (!is_unit(v, kUnitTolerance)) throw Error(Errc::NotNormalized, "view is not unit norm");
  }

  Mat64 sim(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = i; k < n; ++k) sim(i, k) = sim(k, i) = dot(views[i], views[k]) / tau;
  }

  InstanceLossResult out;
  out.grads.assign(n, Vec64(d, 0.0));
  const double inv_n = 1.0 / static_cast<double>(n);
  Vec64 logits;
  logits.reserve(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t pos = i < half ? i + half : i - half;
    logits.clear();
    for (std::size_t k = 0; k < n; ++k) {
      if (k != i) logits.push_back(sim(i, k));
    }
    out.loss += (log_sum_exp(logits) - sim(i, pos)) * inv_n;

    // d l_i / d s_ik = p_ik - [k == pos]; s_ik = v_i.v_k / tau
    const Vec64 prob = softmax(logits);
    std::size_t at = 0;
    for (std::size_t k = 0; k < n; ++k) {
      if (k == i) continue;
      const double w = (prob[at++] - (k == pos ? 1.0 : 0.0)) * inv_n / tau;
      axpy(w, views[k], out.grads[i]);
      axpy(w, views[i], out.grads[k]);
    }
  }
  return out;
}

TextLossResult text_loss_against(std::span<const Vec64> raw_batch, const EncoderParams& encoder,
                                 const ClusterState& state, const Mat64& target,
                                 const TextLossConfig& cfg, const Augmentation& aug, Rng& rng) {
  if (raw_batch.empty()) throw Error(Errc::EmptyInput, "text batch is empty");
  if (!(cfg.eta >= 0.0)) throw Error(Errc::InvalidConfig, "eta must be non-negative");
  const std::size_t m = raw_batch.size();

  std::vector<ForwardTrace> plain;
  plain.reserve(m);
  Mat64 z(m, encoder.output_dim());
  for (std::size_t j = 0; j < m; ++j) {
    plain.push_back(forward_trace(encoder, raw_batch[j]));
    std::copy(plain[j].output.begin(), plain[j].output.end(), z.row(j).begin());
  }

  // Views 0..M-1 are the first augmentations, M..2M-1 the second.
  std::vector<Vec64> raw_views(2 * m);
  for (std::size_t j = 0; j < m; ++j) {
    raw_views[j] = aug(raw_batch[j], rng);
    raw_views[j + m] = aug(raw_batch[j], rng);
  }
  std::vector<ForwardTrace> view_traces;
  std::vector<Vec64> views;
  view_traces.reserve(2 * m);
  views.reserve(2 * m);
  for (const auto& rv : raw_views) {
    view_traces.push_back(forward_trace(encoder, rv));
    views.push_back(view_traces.back().output);
  }

  const ClusteringLossResult cl = clustering_loss(target, z, state);
  const InstanceLossResult il = instance_cl_loss(views, cfg.tau_instance);

  TextLossResult out;
  out.clustering = cl.loss;
  out.instance = il.loss;
  out.loss = cl.loss + cfg.eta * il.loss;
  out.target = target;
  out.center_grads = cl.grad_centers;
  out.encoder_grads = encoder.zeros_like();
  for (std::size_t j = 0; j < m; ++j) {
    backward(encoder, plain[j], cl.grad_embeddings.row(j), out.encoder_grads);
  }
  if (cfg.eta != 0.0) {
    for (std::size_t i = 0; i < views.size(); ++i) {
      Vec64 g = il.grads[i];
      for (double& v : g) v *= cfg.eta;
      backward(encoder, view_traces[i], g, out.encoder_grads);
    }
  }
  return out;
}

TextLossResult text_loss(std::span<const Vec64> raw_batch, const EncoderParams& encoder,
                         const ClusterState& state, const TextLossConfig& cfg,
                         const Augmentation& aug, Rng& rng) {
  if (raw_batch.empty()) throw Error(Errc::EmptyInput, "text batch is empty");
  std::vector<Vec64> z;
  z.reserve(raw_batch.size());
  for (const auto& x : raw_batch) z.push_back(forward(encoder, x));
  const Mat64 target = target_distribution(soft_assign_rows(rows_to_mat(z), state));
  return text_loss_against(raw_batch, encoder, state, target, cfg, aug, rng);
}

ClusterState init_centers(std::span<const Vec64> embeddings, std::size_t k, std::uint64_t seed,
                          double alpha) {
  if (k < 2) throw Error(Errc::InvalidConfig, "need at least two clusters");
  const std::set<Vec64> distinct(embeddings.begin(), embeddings.end());
  if (distinct.size() < k) {
    throw Error(Errc::TooFewSamples, "need " + std::to_string(k) + " distinct embeddings, got " +
                                         std::to_string(distinct.size()));
  }
  const std::size_t n = embeddings.size();
  const std::size_t d = embeddings.front().size();
  for (const auto& e : embeddings) {
    if (e.size() != d) throw Error(Errc::DimMismatch, "ragged embeddings");
  }
  Rng rng = Rng::stream(seed, "kmeans-init");

  // k-means++ seeding
  Mat64 centers(k, d);
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  std::size_t pick = rng.below(n);
  for (std::size_t c = 0; c < k; ++c) {
    std::copy(embeddings[pick].begin(), embeddings[pick].end(), centers.row(c).begin());
    if (c + 1 == k) break;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], squared_distance(embeddings[i], centers.row(c)));
      total += nearest[i];
    }
    double r = rng.uniform(0.0, total);
    pick = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (nearest[i] <= 0.0) continue;
      pick = i;
      if (r < nearest[i]) break;
      r -= nearest[i];
    }
  }

  // Lloyd iterations; an empty cluster keeps its previous center.
  std::vector<std::size_t> assign(n, 0);
  for (int iter = 0; iter < 50; ++iter) {
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double dist = squared_distance(embeddings[i], centers.row(c));
        if (dist < best) {
          best = dist;
          assign[i] = c;
        }
      }
    }
    Mat64 sums(k, d);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      axpy(1.0, embeddings[i], sums.row(assign[i]));
      ++counts[assign[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      auto row = centers.row(c);
      for (std::size_t i = 0; i < d; ++i) row[i] = sums(c, i) / static_cast<double>(counts[c]);
    }
  }
  return {std::move(centers), alpha};
}

}  // namespace vtreid
