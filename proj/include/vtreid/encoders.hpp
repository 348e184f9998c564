#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vtreid/numerics.hpp"

namespace vtreid {

/// One affine layer; weight is out x in.
struct DenseLayer {
  Mat64 weight;
  Vec64 bias;

  bool operator==(const DenseLayer&) const = default;
};

/// Small MLP encoder: affine layers with tanh between them, linear last
/// layer, and an L2 normalization on the output.
class EncoderParams {
 public:
  EncoderParams() = default;
  explicit EncoderParams(std::vector<DenseLayer> layers);

  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  std::vector<DenseLayer>& layers() noexcept { return layers_; }

  std::size_t input_dim() const noexcept;
  std::size_t output_dim() const noexcept;
  std::size_t param_count() const noexcept;
  std::vector<std::size_t> dims() const;

  /// Parameters in layer order, weight then bias.
  Vec64 flatten() const;
  void assign(std::span<const double> flat);

  bool same_shape(const EncoderParams& other) const noexcept;
  EncoderParams zeros_like() const;

  bool operator==(const EncoderParams&) const = default;

 private:
  std::vector<DenseLayer> layers_;
};

/// Intermediate values kept by forward_trace for backward.
struct ForwardTrace {
  std::vector<Vec64> inputs;  // input to each layer
  Vec64 pre_norm;             // last layer output before normalization
  double pre_norm_length = 0.0;
  Vec64 output;               // unit-norm embedding
};

Vec64 forward(const EncoderParams& p, std::span<const double> x);
ForwardTrace forward_trace(const EncoderParams& p, std::span<const double> x);

/// Adds dL/dparams to grads given dL/d(output). grads must match p's shape.
void backward(const EncoderParams& p, const ForwardTrace& trace, std::span<const double> grad_output,
              EncoderParams& grads);

/// Xavier-uniform weights, zero biases. dims = {input, hidden..., output}.
EncoderParams init_params(std::span<const std::size_t> dims, std::uint64_t seed);

/// Query encoder (gradient-trained) and key encoder (moving average of the
/// query encoder).
struct EncoderPair {
  EncoderParams query;
  EncoderParams key;
  double momentum = 0.999;

  bool operator==(const EncoderPair&) const = default;
};

EncoderPair make_pair(const EncoderParams& init, double momentum);

/// key <- m * key + (1 - m) * query, elementwise.
EncoderPair momentum_update(const EncoderPair& pair);

}  // namespace vtreid
