#pragma once

#include <cstddef>
#include <deque>
#include <span>
#include <vector>

#include "vtreid/augmentation.hpp"
#include "vtreid/encoders.hpp"
#include "vtreid/numerics.hpp"
#include "vtreid/rng.hpp"

namespace vtreid {

// Tolerance for "unit norm" checks on keys and queries.
inline constexpr double kUnitTolerance = 1e-6;

/// Fixed-capacity FIFO dictionary of unit-norm key embeddings. The front is
/// the oldest entry.
class KeyQueue {
 public:
  KeyQueue(std::size_t capacity, std::size_t dim);

  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  const std::deque<Vec64>& entries() const noexcept { return entries_; }

  /// Appends keys in order and drops the oldest entries beyond capacity.
  /// Throws DimMismatch or NotNormalized; on error the queue is unchanged.
  void push(std::span<const Vec64> keys);

  bool operator==(const KeyQueue&) const = default;

 private:
  std::size_t capacity_;
  std::size_t dim_;
  std::deque<Vec64> entries_;
};

KeyQueue enqueue_dequeue(KeyQueue queue, std::span<const Vec64> batch_keys);

struct VisualLossConfig {
  double tau = 0.07;
};

struct LossAndGrad {
  double loss = 0.0;
  Vec64 grad;
};

/// InfoNCE of one query against its positive key and a list of negatives:
/// -q.k+/tau + logsumexp over {q.k+/tau, q.k_i/tau}. grad is d loss / d q.
LossAndGrad info_nce(std::span<const double> q, std::span<const double> k_plus,
                     std::span<const Vec64> negatives, const VisualLossConfig& cfg);

/// Same as info_nce with the negatives taken from a queue, oldest first.
LossAndGrad info_nce(std::span<const double> q, std::span<const double> k_plus,
                     const KeyQueue& negatives, const VisualLossConfig& cfg);

struct VisualStepResult {
  double loss = 0.0;
  EncoderParams query_grads;
  KeyQueue queue;
  EncoderPair pair;
  std::vector<Vec64> keys;  // key embeddings of the batch, in batch order
};

/// One momentum-contrast step over a batch of raw visual features. Two views
/// per sample; the query encoder embeds view A, the key encoder view B. The
/// loss is the batch mean of InfoNCE against the current queue. Afterwards the
/// key encoder is momentum-updated and the batch keys are enqueued.
VisualStepResult visual_step(const EncoderPair& pair, const KeyQueue& queue,
                             std::span<const Vec64> batch, const Augmentation& aug,
                             const VisualLossConfig& cfg, Rng& rng);

}  // namespace vtreid
