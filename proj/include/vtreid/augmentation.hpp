#pragma once

#include <functional>
#include <span>

#include "vtreid/numerics.hpp"
#include "vtreid/rng.hpp"

namespace vtreid {

/// Produces one augmented view of a raw feature vector.
using Augmentation = std::function<Vec64(std::span<const double>, Rng&)>;

/// Feature-space augmentation: each coordinate is zeroed with probability
/// `dropout`, then Gaussian noise with std `sigma` is added.
struct FeatureNoise {
  double sigma = 0.1;
  double dropout = 0.1;

  Vec64 operator()(std::span<const double> x, Rng& rng) const {
    Vec64 out(x.begin(), x.end());
    for (double& v : out) {
      if (dropout > 0.0 && rng.bernoulli(dropout)) v = 0.0;
      if (sigma > 0.0) v += rng.normal(0.0, sigma);
    }
    return out;
  }
};

inline Vec64 identity_view(std::span<const double> x, Rng&) { return Vec64(x.begin(), x.end()); }

}  // namespace vtreid
