#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace tabattn {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);
  static Matrix from_rows(const std::vector<Vector>& rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  std::string shape_string() const;

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Accumulation runs over the inner index in ascending order.
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
Vector matvec(const Matrix& a, std::span<const double> x);

double dot(std::span<const double> a, std::span<const double> b);

/// Numerically safe softmax: the maximum is subtracted before exponentiation,
/// so scores of several hundred do not overflow.
Vector softmax(std::span<const double> v);

double relu(double x) noexcept;
double sigmoid(double x) noexcept;
double tanh_act(double x) noexcept;

Vector relu(std::span<const double> v);
Vector sigmoid(std::span<const double> v);
Vector tanh_act(std::span<const double> v);

bool all_finite(std::span<const double> v) noexcept;

/// Central-difference gradient of `f` at `x`. Throws a Domain error when any
/// evaluation is non-finite.
Vector finite_diff_grad(const std::function<double(const Vector&)>& f, const Vector& x,
                        double eps = 1e-5);

/// Seedable splitmix64 generator. Copying a RandomSource forks an identical
/// stream, which the gradient checker relies on to replay dropout masks.
class RandomSource {
 public:
  static constexpr const char* kAlgorithm = "splitmix64";

  explicit RandomSource(std::uint64_t seed = 0) noexcept : state_(seed) {}

  std::uint64_t next_u64() noexcept;
  /// Uniform double in [0, 1) with 53 random bits.
  double next_unit() noexcept;
  /// Uniform integer in [0, n). n must be positive.
  std::size_t next_index(std::size_t n);

  std::uint64_t state() const noexcept { return state_; }

 private:
  std::uint64_t state_;
};

double uniform(RandomSource& rng, double lo, double hi);
double gaussian(RandomSource& rng, double mean, double stddev);

/// Fisher-Yates shuffle driven by `rng`.
template <class T>
void shuffle(std::vector<T>& items, RandomSource& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::size_t j = rng.next_index(i);
    std::swap(items[i - 1], items[j]);
  }
}

/// Formats with 17 significant digits (exact round trip for doubles).
std::string format_double(double x);

}  // namespace tabattn
