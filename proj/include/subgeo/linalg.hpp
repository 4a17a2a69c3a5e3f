#pragma once

// Small dense matrices generic over the scalar kind (double or nested jets).
// Dimensions here are chart dimensions, so everything is O(m^3) with m <= ~6.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "jet.hpp"

namespace subgeo {

template <class S>
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), a_(rows * cols, S(0.0)) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<S> flat) : rows_(rows), cols_(cols), a_(std::move(flat)) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = S(1.0);
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  S& operator()(std::size_t i, std::size_t j) { return a_[i * cols_ + j]; }
  const S& operator()(std::size_t i, std::size_t j) const { return a_[i * cols_ + j]; }

  std::vector<S> column(std::size_t j) const {
    std::vector<S> c(rows_);
    for (std::size_t i = 0; i < rows_; ++i) c[i] = (*this)(i, j);
    return c;
  }

  const std::vector<S>& data() const { return a_; }
  std::vector<S>& data() { return a_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<S> a_;
};

template <class S>
Matrix<S> transpose(const Matrix<S>& a) {
  Matrix<S> t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

template <class S>
Matrix<S> operator*(const Matrix<S>& a, const Matrix<S>& b) {
  Matrix<S> c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const S& aik = a(i, k);
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

template <class S>
std::vector<S> operator*(const Matrix<S>& a, std::span<const S> x) {
  std::vector<S> y(a.rows(), S(0.0));
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) y[i] += a(i, j) * x[j];
  return y;
}

template <class S>
std::vector<S> operator*(const Matrix<S>& a, const std::vector<S>& x) {
  return a * std::span<const S>(x);
}

template <class S>
Matrix<S> operator-(const Matrix<S>& a, const Matrix<S>& b) {
  Matrix<S> c(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) c(i, j) = a(i, j) - b(i, j);
  return c;
}

/// u^T G v
template <class S>
S inner(const Matrix<S>& g, std::span<const S> u, std::span<const S> v) {
  S acc(0.0);
  for (std::size_t i = 0; i < g.rows(); ++i) {
    S row(0.0);
    for (std::size_t j = 0; j < g.cols(); ++j) row += g(i, j) * v[j];
    acc += u[i] * row;
  }
  return acc;
}

template <class S>
S inner(const Matrix<S>& g, const std::vector<S>& u, const std::vector<S>& v) {
  return inner(g, std::span<const S>(u), std::span<const S>(v));
}

template <class S>
S dot(std::span<const S> u, std::span<const S> v) {
  S acc(0.0);
  for (std::size_t i = 0; i < u.size(); ++i) acc += u[i] * v[i];
  return acc;
}

template <class S>
std::vector<S> axpy(const S& a, const std::vector<S>& x, const std::vector<S>& y) {
  std::vector<S> out(y);
  for (std::size_t i = 0; i < y.size(); ++i) out[i] += a * x[i];
  return out;
}

template <class S>
std::vector<S> operator+(const std::vector<S>& a, const std::vector<S>& b) {
  std::vector<S> c(a);
  for (std::size_t i = 0; i < a.size(); ++i) c[i] += b[i];
  return c;
}

template <class S>
std::vector<S> operator-(const std::vector<S>& a, const std::vector<S>& b) {
  std::vector<S> c(a);
  for (std::size_t i = 0; i < a.size(); ++i) c[i] -= b[i];
  return c;
}

template <class S>
std::vector<S> scaled(const std::vector<S>& a, const S& s) {
  std::vector<S> c(a);
  for (auto& x : c) x *= s;
  return c;
}

/// Raised when a matrix that must be symmetric positive definite is not.
class NotPositiveDefinite : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inverse of a symmetric positive-definite matrix by an LDL^T sweep.
/// Uses only field operations, so it differentiates through any jet kind.
template <class S>
Matrix<S> spd_inverse(const Matrix<S>& a, double rel_pivot_floor = 1e-13) {
  const std::size_t n = a.rows();
  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, std::abs(primal(a(i, i))));
  Matrix<S> l = Matrix<S>::identity(n);
  std::vector<S> d(n);
  for (std::size_t j = 0; j < n; ++j) {
    S dj = a(j, j);
    for (std::size_t k = 0; k < j; ++k) dj -= l(j, k) * l(j, k) * d[k];
    if (!(primal(dj) > rel_pivot_floor * std::max(scale, 1e-300)))
      throw NotPositiveDefinite("matrix is not positive definite (pivot " + std::to_string(primal(dj)) +
                                " at index " + std::to_string(j) + ")");
    d[j] = dj;
    for (std::size_t i = j + 1; i < n; ++i) {
      S lij = a(i, j);
      for (std::size_t k = 0; k < j; ++k) lij -= l(i, k) * l(j, k) * d[k];
      l(i, j) = lij / dj;
    }
  }
  // Solve L D L^T X = I column by column.
  Matrix<S> inv(n, n);
  for (std::size_t c = 0; c < n; ++c) {
    std::vector<S> y(n, S(0.0));
    for (std::size_t i = 0; i < n; ++i) {
      S s = (i == c) ? S(1.0) : S(0.0);
      for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * y[k];
      y[i] = s;
    }
    for (std::size_t i = 0; i < n; ++i) y[i] = y[i] / d[i];
    for (std::size_t ii = n; ii-- > 0;) {
      S s = y[ii];
      for (std::size_t k = ii + 1; k < n; ++k) s -= l(k, ii) * inv(k, c);
      inv(ii, c) = s;
    }
  }
  return inv;
}

/// Orthonormal basis of the null space of a (rows x cols, rows < cols) by
/// Householder QR of a^T with fixed column order. Each returned vector is
/// sign-normalized so its largest-magnitude entry is positive.
inline std::vector<std::vector<double>> null_space(const Matrix<double>& a, double rank_tol = 1e-10) {
  const std::size_t n = a.rows();
  const std::size_t m = a.cols();
  Matrix<double> r = transpose(a);  // m x n
  Matrix<double> q = Matrix<double>::identity(m);
  double scale = 0.0;
  for (double x : r.data()) scale = std::max(scale, std::abs(x));
  for (std::size_t k = 0; k < n; ++k) {
    double norm = 0.0;
    for (std::size_t i = k; i < m; ++i) norm += r(i, k) * r(i, k);
    norm = std::sqrt(norm);
    if (norm <= rank_tol * std::max(scale, 1e-300))
      throw std::domain_error("rank-deficient matrix (column " + std::to_string(k) + ")");
    std::vector<double> v(m, 0.0);
    double alpha = r(k, k) >= 0.0 ? -norm : norm;
    for (std::size_t i = k; i < m; ++i) v[i] = r(i, k);
    v[k] -= alpha;
    double vnorm2 = 0.0;
    for (std::size_t i = k; i < m; ++i) vnorm2 += v[i] * v[i];
    if (vnorm2 == 0.0) continue;
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t i = k; i < m; ++i) s += v[i] * r(i, j);
      s = 2.0 * s / vnorm2;
      for (std::size_t i = k; i < m; ++i) r(i, j) -= s * v[i];
    }
    // Q <- Q H_k
    for (std::size_t row = 0; row < m; ++row) {
      double s = 0.0;
      for (std::size_t i = k; i < m; ++i) s += q(row, i) * v[i];
      s = 2.0 * s / vnorm2;
      for (std::size_t i = k; i < m; ++i) q(row, i) -= s * v[i];
    }
  }
  std::vector<std::vector<double>> basis;
  for (std::size_t j = n; j < m; ++j) {
    auto c = q.column(j);
    std::size_t big = 0;
    for (std::size_t i = 1; i < m; ++i)
      if (std::abs(c[i]) > std::abs(c[big]) + 1e-14) big = i;
    if (c[big] < 0.0)
      for (auto& x : c) x = -x;
    basis.push_back(std::move(c));
  }
  return basis;
}

}  // namespace subgeo
