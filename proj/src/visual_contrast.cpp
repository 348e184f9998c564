#include "vtreid/visual_contrast.hpp"

#include <cmath>
#include <string>

#include "vtreid/error.hpp"

namespace vtreid {

namespace {

void check_key(std::span<const double> v, std::size_t dim, const char* what) {
  if (v.size() != dim) {
    throw Error(Errc::DimMismatch, std::string(what) + " has dim " + std::to_string(v.size()) +
                                       ", expected " + std::to_string(dim));
  }
  if (!is_unit(v, kUnitTolerance)) {
    throw Error(Errc::NotNormalized, std::string(what) + " is not unit norm");
  }
}

template <typename Keys>
LossAndGrad info_nce_impl(std::span<const double> q, std::span<const double> k_plus,
                          const Keys& negatives, const VisualLossConfig& cfg,
                          bool negatives_validated) {
  if (!(cfg.tau > 0.0)) throw Error(Errc::InvalidConfig, "temperature must be positive");
  const std::size_t d = q.size();
  check_key(q, d, "query");
  check_key(k_plus, d, "positive key");
  if (!negatives_validated) {
    for (const auto& k : negatives) check_key(k, d, "negative key");
  }

  Vec64 logits;
  logits.reserve(negatives.size() + 1);
  logits.push_back(dot(q, k_plus) / cfg.tau);
  for (const auto& k : negatives) logits.push_back(dot(q, k) / cfg.tau);

  LossAndGrad out;
  out.loss = log_sum_exp(logits) - logits[0];
  // d/dq = (sum_j p_j k_j - k+) / tau
  const Vec64 p = softmax(logits);
  out.grad.assign(d, 0.0);
  axpy(p[0] - 1.0, k_plus, out.grad);
  std::size_t j = 1;
  for (const auto& k : negatives) axpy(p[j++], k, out.grad);
  for (double& g : out.grad) g /= cfg.tau;
  return out;
}

}  // namespace

KeyQueue::KeyQueue(std::size_t capacity, std::size_t dim) : capacity_(capacity), dim_(dim) {
  if (capacity == 0 || dim == 0) {
    throw Error(Errc::InvalidConfig, "queue capacity and dim must be positive");
  }
}

void KeyQueue::push(std::span<const Vec64> keys) {
  for (const auto& k : keys) check_key(k, dim_, "queued key");
  for (const auto& k : keys) entries_.push_back(k);
  while (entries_.size() > capacity_) entries_.pop_front();
}

KeyQueue enqueue_dequeue(KeyQueue queue, std::span<const Vec64> batch_keys) {
  queue.push(batch_keys);
  return queue;
}

LossAndGrad info_nce(std::span<const double> q, std::span<const double> k_plus,
                     std::span<const Vec64> negatives, const VisualLossConfig& cfg) {
  return info_nce_impl(q, k_plus, negatives, cfg, false);
}

LossAndGrad info_nce(std::span<const double> q, std::span<const double> k_plus,
                     const KeyQueue& negatives, const VisualLossConfig& cfg) {
  if (negatives.dim() != q.size()) {
    throw Error(Errc::DimMismatch, "queue dim differs from query dim");
  }
  // push() already checked every entry.
  return info_nce_impl(q, k_plus, negatives.entries(), cfg, true);
}

VisualStepResult visual_step(const EncoderPair& pair, const KeyQueue& queue,
                             std::span<const Vec64> batch, const Augmentation& aug,
                             const VisualLossConfig& cfg, Rng& rng) {
  if (batch.empty()) throw Error(Errc::EmptyInput, "visual batch is empty");
  if (queue.dim() != pair.query.output_dim()) {
    throw Error(Errc::DimMismatch, "queue dim differs from encoder output dim");
  }

  VisualStepResult out{0.0, pair.query.zeros_like(), queue, pair, {}};
  out.keys.reserve(batch.size());
  const double inv_n = 1.0 / static_cast<double>(batch.size());

  for (const auto& x : batch) {
    const Vec64 view_q = aug(x, rng);
    const Vec64 view_k = aug(x, rng);
    const ForwardTrace trace = forward_trace(pair.query, view_q);
    Vec64 k = forward(pair.key, view_k);

    LossAndGrad l = info_nce(trace.output, k, queue, cfg);
    out.loss += l.loss * inv_n;
    for (double& g : l.grad) g *= inv_n;
    backward(pair.query, trace, l.grad, out.query_grads);
    out.keys.push_back(std::move(k));
  }

  out.pair = momentum_update(pair);
  out.queue.push(out.keys);
  return out;
}

}  // namespace vtreid
