#include "vtreid/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vtreid/error.hpp"

namespace vtreid {

Mat64::Mat64(std::size_t rows, std::size_t cols, Vec64 values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows_ * cols_) {
    throw Error(Errc::ShapeMismatch, "matrix " + std::to_string(rows_) + "x" +
                                         std::to_string(cols_) + " given " +
                                         std::to_string(values_.size()) + " values");
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(Errc::DimMismatch,
                "dot of " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

bool all_finite(std::span<const double> v) noexcept {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

Vec64 l2_normalize(std::span<const double> v) {
  const double n = norm(v);
  if (!(n >= kZeroNormFloor)) throw Error(Errc::ZeroVector, "cannot normalize a zero vector");
  Vec64 out(v.begin(), v.end());
  for (double& x : out) x /= n;
  return out;
}

bool is_unit(std::span<const double> v, double tol) { return std::abs(norm(v) - 1.0) <= tol; }

double log_sum_exp(std::span<const double> xs) {
  if (xs.empty()) throw Error(Errc::EmptyInput, "log_sum_exp of an empty list");
  const double m = *std::max_element(xs.begin(), xs.end());
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

Vec64 softmax(std::span<const double> xs) {
  if (xs.empty()) throw Error(Errc::EmptyInput, "softmax of an empty list");
  const double m = *std::max_element(xs.begin(), xs.end());
  Vec64 out(xs.size());
  double s = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    out[i] = std::exp(xs[i] - m);
    s += out[i];
  }
  for (double& p : out) p /= s;
  return out;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  if (x.size() != y.size()) {
    throw Error(Errc::DimMismatch,
                "axpy of " + std::to_string(x.size()) + " into " + std::to_string(y.size()));
  }
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

Vec64 finite_diff_grad(const ScalarField& f, std::span<const double> x, double eps) {
  if (!(eps > 0.0)) throw Error(Errc::InvalidConfig, "finite difference step must be positive");
  Vec64 probe(x.begin(), x.end());
  Vec64 grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = probe[i];
    probe[i] = xi + eps;
    const double up = f(probe);
    probe[i] = xi - eps;
    const double down = f(probe);
    probe[i] = xi;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw Error(Errc::NonFiniteEvaluation, "probe at coordinate " + std::to_string(i));
    }
    grad[i] = (up - down) / (2.0 * eps);
  }
  return grad;
}

double relative_error(std::span<const double> a, std::span<const double> b, double floor) {
  if (a.size() != b.size()) throw Error(Errc::DimMismatch, "relative_error operands");
  double diff = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) diff += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(diff) / std::max({norm(a), norm(b), floor});
}

}  // namespace vtreid
