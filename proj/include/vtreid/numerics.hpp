#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace vtreid {

/// Dense vector of 64-bit floats. Embeddings, raw features and flattened
/// parameter blocks all use this type.
using Vec64 = std::vector<double>;

/// Row-major dense matrix.
class Mat64 {
 public:
  Mat64() = default;
  Mat64(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}
  Mat64(std::size_t rows, std::size_t cols, Vec64 values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return values_.size(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return values_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {values_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {values_.data() + r * cols_, cols_};
  }

  Vec64& values() noexcept { return values_; }
  const Vec64& values() const noexcept { return values_; }

  bool operator==(const Mat64&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  Vec64 values_;
};

// Norms below this are treated as exactly zero.
inline constexpr double kZeroNormFloor = 1e-30;

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> v);
bool all_finite(std::span<const double> v) noexcept;

/// Returns v / ||v||. Throws Errc::ZeroVector when ||v|| < 1e-30.
Vec64 l2_normalize(std::span<const double> v);

/// True when | ||v|| - 1 | <= tol.
bool is_unit(std::span<const double> v, double tol);

/// ln(sum exp(x_i)) evaluated with a max shift. Throws Errc::EmptyInput.
double log_sum_exp(std::span<const double> xs);

/// Softmax with the same max shift as log_sum_exp.
Vec64 softmax(std::span<const double> xs);

/// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);

using ScalarField = std::function<double(std::span<const double>)>;

/// Central-difference gradient (f(x + eps e_i) - f(x - eps e_i)) / 2eps.
/// Throws Errc::NonFiniteEvaluation if any probe is NaN or Inf.
Vec64 finite_diff_grad(const ScalarField& f, std::span<const double> x, double eps);

/// ||a - b|| / max(||a||, ||b||, floor); the comparison metric used by all
/// gradient checks.
double relative_error(std::span<const double> a, std::span<const double> b, double floor = 1e-8);

}  // namespace vtreid
