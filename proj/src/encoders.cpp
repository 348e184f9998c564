#include "vtreid/encoders.hpp"

#include <cmath>
#include <string>

#include "vtreid/error.hpp"
#include "vtreid/rng.hpp"

namespace vtreid {

EncoderParams::EncoderParams(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw Error(Errc::EmptySpec, "encoder needs at least one layer");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (layer.bias.size() != layer.weight.rows()) {
      throw Error(Errc::ShapeMismatch, "layer " + std::to_string(l) + " bias length");
    }
    if (l > 0 && layer.weight.cols() != layers_[l - 1].weight.rows()) {
      throw Error(Errc::ShapeMismatch, "layer " + std::to_string(l) + " does not chain");
    }
  }
}

std::size_t EncoderParams::input_dim() const noexcept {
  return layers_.empty() ? 0 : layers_.front().weight.cols();
}

std::size_t EncoderParams::output_dim() const noexcept {
  return layers_.empty() ? 0 : layers_.back().weight.rows();
}

std::size_t EncoderParams::param_count() const noexcept {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += layer.weight.size() + layer.bias.size();
  return n;
}

std::vector<std::size_t> EncoderParams::dims() const {
  std::vector<std::size_t> d;
  if (layers_.empty()) return d;
  d.push_back(input_dim());
  for (const auto& layer : layers_) d.push_back(layer.weight.rows());
  return d;
}

Vec64 EncoderParams::flatten() const {
  Vec64 flat;
  flat.reserve(param_count());
  for (const auto& layer : layers_) {
    flat.insert(flat.end(), layer.weight.values().begin(), layer.weight.values().end());
    flat.insert(flat.end(), layer.bias.begin(), layer.bias.end());
  }
  return flat;
}

void EncoderParams::assign(std::span<const double> flat) {
  if (flat.size() != param_count()) {
    throw Error(Errc::ShapeMismatch, "expected " + std::to_string(param_count()) +
                                         " parameters, got " + std::to_string(flat.size()));
  }
  std::size_t at = 0;
  for (auto& layer : layers_) {
    for (double& w : layer.weight.values()) w = flat[at++];
    for (double& b : layer.bias) b = flat[at++];
  }
}

bool EncoderParams::same_shape(const EncoderParams& other) const noexcept {
  if (layers_.size() != other.layers_.size()) return false;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (layers_[l].weight.rows() != other.layers_[l].weight.rows() ||
        layers_[l].weight.cols() != other.layers_[l].weight.cols()) {
      return false;
    }
  }
  return true;
}

EncoderParams EncoderParams::zeros_like() const {
  std::vector<DenseLayer> z;
  z.reserve(layers_.size());
  for (const auto& layer : layers_) {
    z.push_back({Mat64(layer.weight.rows(), layer.weight.cols()), Vec64(layer.bias.size(), 0.0)});
  }
  return EncoderParams(std::move(z));
}

ForwardTrace forward_trace(const EncoderParams& p, std::span<const double> x) {
  if (x.size() != p.input_dim()) {
    throw Error(Errc::DimMismatch, "encoder expects input dim " + std::to_string(p.input_dim()) +
                                       ", got " + std::to_string(x.size()));
  }
  ForwardTrace t;
  const auto& layers = p.layers();
  t.inputs.reserve(layers.size());
  Vec64 h(x.begin(), x.end());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    Vec64 out(layer.bias);
    for (std::size_t r = 0; r < layer.weight.rows(); ++r) {
      out[r] += dot(layer.weight.row(r), h);
    }
    t.inputs.push_back(std::move(h));
    if (l + 1 < layers.size()) {
      for (double& v : out) v = std::tanh(v);
    }
    h = std::move(out);
  }
  t.pre_norm = std::move(h);
  t.pre_norm_length = norm(t.pre_norm);
  t.output = l2_normalize(t.pre_norm);
  return t;
}

Vec64 forward(const EncoderParams& p, std::span<const double> x) {
  return forward_trace(p, x).output;
}

void backward(const EncoderParams& p, const ForwardTrace& trace, std::span<const double> grad_output,
              EncoderParams& grads) {
  const auto& layers = p.layers();
  if (grad_output.size() != p.output_dim() || !grads.same_shape(p)) {
    throw Error(Errc::ShapeMismatch, "backward gradient buffers do not match encoder");
  }
  // d/du of u/|u| applied to g: (g - y (y.g)) / |u|
  const Vec64& y = trace.output;
  const double yg = dot(y, grad_output);
  Vec64 delta(grad_output.size());
  for (std::size_t i = 0; i < delta.size(); ++i) {
    delta[i] = (grad_output[i] - y[i] * yg) / trace.pre_norm_length;
  }

  for (std::size_t l = layers.size(); l-- > 0;) {
    const auto& layer = layers[l];
    auto& g = grads.layers()[l];
    const Vec64& in = trace.inputs[l];
    for (std::size_t r = 0; r < layer.weight.rows(); ++r) {
      g.bias[r] += delta[r];
      auto grow = g.weight.row(r);
      for (std::size_t c = 0; c < in.size(); ++c) grow[c] += delta[r] * in[c];
    }
    if (l == 0) break;
    // in = tanh(pre) for every layer but the first, so tanh' = 1 - in^2.
    Vec64 prev(in.size(), 0.0);
    for (std::size_t r = 0; r < layer.weight.rows(); ++r) {
      axpy(delta[r], layer.weight.row(r), prev);
    }
    for (std::size_t c = 0; c < prev.size(); ++c) prev[c] *= 1.0 - in[c] * in[c];
    delta = std::move(prev);
  }
}

EncoderParams init_params(std::span<const std::size_t> dims, std::uint64_t seed) {
  if (dims.size() < 2) throw Error(Errc::EmptySpec, "encoder dims need input and output");
  for (std::size_t d : dims) {
    if (d == 0) throw Error(Errc::EmptySpec, "encoder dims must be positive");
  }
  Rng rng = Rng::stream(seed, "encoder-init");
  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const std::size_t fan_in = dims[l];
    const std::size_t fan_out = dims[l + 1];
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Mat64 w(fan_out, fan_in);
    for (double& v : w.values()) v = rng.uniform(-a, a);
    layers.push_back({std::move(w), Vec64(fan_out, 0.0)});
  }
  return EncoderParams(std::move(layers));
}

EncoderPair make_pair(const EncoderParams& init, double momentum) {
  if (!(momentum >= 0.0 && momentum <= 1.0)) {
    throw Error(Errc::InvalidConfig, "momentum must lie in [0, 1]");
  }
  return {init, init, momentum};
}

EncoderPair momentum_update(const EncoderPair& pair) {
  if (!pair.query.same_shape(pair.key)) {
    throw Error(Errc::ShapeMismatch, "query and key encoders differ in shape");
  }
  const double m = pair.momentum;
  EncoderPair out = pair;
  auto blend = [m](std::span<const double> q, std::span<double> k) {
    for (std::size_t i = 0; i < k.size(); ++i) k[i] = m * k[i] + (1.0 - m) * q[i];
  };
  for (std::size_t l = 0; l < out.key.layers().size(); ++l) {
    const auto& q = pair.query.layers()[l];
    auto& k = out.key.layers()[l];
    blend(q.weight.values(), k.weight.values());
    blend(q.bias, k.bias);
  }
  return out;
}

}  // namespace vtreid
