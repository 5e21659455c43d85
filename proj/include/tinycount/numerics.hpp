#pragma once

// Small dense linear algebra in 64-bit floating point. Everything here is
// sized for desk-scale models (d, p <= 256, L <= 64), so there is no blocking
// or vectorization beyond what the compiler does on its own.

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tinycount/error.hpp"

namespace tinycount {

using Vector = std::vector<double>;

/// Row-major dense matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw InvalidInput("matrix data length " + std::to_string(data_.size()) +
                         " does not match " + std::to_string(rows_) + "x" +
                         std::to_string(cols_));
    }
  }

  static Matrix identity(std::size_t n, double scale = 1.0) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = scale;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) {
    assert(r < rows_ && c < cols_);
    return data_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    assert(r < rows_ && c < cols_);
    return data_[r * cols_ + c];
  }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

/// a * b
inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ConfigError("matmul shape mismatch: " + std::to_string(a.rows()) + "x" +
                      std::to_string(a.cols()) + " * " + std::to_string(b.rows()) + "x" +
                      std::to_string(b.cols()));
  }
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto o = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto br = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) o[j] += aik * br[j];
    }
  }
  return out;
}

/// a^T * b
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw ConfigError("matmul_tn shape mismatch");
  Matrix out(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    auto ar = a.row(k);
    auto br = b.row(k);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = ar[i];
      if (aki == 0.0) continue;
      auto o = out.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) o[j] += aki * br[j];
    }
  }
  return out;
}

/// a * b^T
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw ConfigError("matmul_nt shape mismatch");
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) out(i, j) = dot(a.row(i), b.row(j));
  }
  return out;
}

inline Matrix transpose(const Matrix& m) {
  Matrix t(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) t(j, i) = m(i, j);
  return t;
}

/// Numerically stable softmax of one row into `out`; scores are scaled by
/// `inv_temperature` before exponentiation.
inline void softmax_into(std::span<const double> in, std::span<double> out,
                         double inv_temperature = 1.0) {
  assert(in.size() == out.size() && !in.empty());
  double mx = in[0];
  for (double x : in) mx = std::max(mx, x);
  double sum = 0.0;
  for (std::size_t i = 0; i < in.size(); ++i) {
    out[i] = std::exp(inv_temperature * (in[i] - mx));
    sum += out[i];
  }
  for (double& x : out) x /= sum;
}

inline Matrix softmax_rows(const Matrix& m, double inv_temperature = 1.0) {
  if (!(inv_temperature > 0.0) || !std::isfinite(inv_temperature)) {
    throw InvalidInput("softmax_rows: inverse temperature must be positive and finite");
  }
  if (!all_finite(m.values())) throw InvalidInput("softmax_rows: non-finite input");
  Matrix out(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) softmax_into(m.row(r), out.row(r), inv_temperature);
  return out;
}

/// Index of the largest entry; ties resolve to the lowest index.
inline std::size_t argmax_index(std::span<const double> v) {
  if (v.empty()) throw InvalidInput("argmax_index: empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

inline Vector relu(std::span<const double> v) {
  Vector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] > 0.0 ? v[i] : 0.0;
  return out;
}

/// log(sum(exp(v))) without overflow.
inline double log_sum_exp(std::span<const double> v) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : v) mx = std::max(mx, x);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, descending.
inline Vector symmetric_eigenvalues(Matrix a, double tol = 1e-15, int max_sweeps = 100) {
  const std::size_t n = a.rows();
  if (a.cols() != n) throw InvalidInput("symmetric_eigenvalues: matrix is not square");
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0, total = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        total += a(i, j) * a(i, j);
        if (i != j) off += a(i, j) * a(i, j);
      }
    if (off <= tol * tol * std::max(total, std::numeric_limits<double>::min())) break;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  Vector ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = a(i, i);
  std::sort(ev.begin(), ev.end(), std::greater<>());
  return ev;
}

}  // namespace tinycount
