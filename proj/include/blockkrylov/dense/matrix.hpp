#pragma once

// Dense row-major matrices and vectors. Everything is value-semantic and
// immutable once handed to a solver; sizes stay small (n <= 2000) so plain
// triple loops are fast enough and easy to trust.

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace blockkrylov {

struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct NonFiniteError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

namespace detail {
inline void require(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}
inline void check_finite(std::span<const double> entries, const char* who) {
  for (double v : entries)
    if (!std::isfinite(v)) throw NonFiniteError(std::string(who) + ": non-finite entry");
}
}  // namespace detail

class Vector {
 public:
  Vector() = default;
  explicit Vector(std::size_t n, double fill = 0.0) : e_(n, fill) {
    if (!std::isfinite(fill)) throw NonFiniteError("Vector: non-finite fill");
  }
  Vector(std::initializer_list<double> init) : e_(init) {
    detail::check_finite(e_, "Vector");
  }
  explicit Vector(std::vector<double> entries) : e_(std::move(entries)) {
    detail::check_finite(e_, "Vector");
  }

  static Vector unit(std::size_t n, std::size_t i) {
    Vector v(n);
    v[i] = 1.0;
    return v;
  }

  std::size_t size() const { return e_.size(); }
  double operator[](std::size_t i) const { return e_[i]; }
  double& operator[](std::size_t i) { return e_[i]; }
  const double* data() const { return e_.data(); }
  double* data() { return e_.data(); }
  auto begin() const { return e_.begin(); }
  auto end() const { return e_.end(); }
  const std::vector<double>& entries() const { return e_; }

  Vector& operator+=(const Vector& o) {
    detail::require(size() == o.size(), "Vector +=: size mismatch");
    for (std::size_t i = 0; i < e_.size(); ++i) e_[i] += o.e_[i];
    return *this;
  }
  Vector& operator-=(const Vector& o) {
    detail::require(size() == o.size(), "Vector -=: size mismatch");
    for (std::size_t i = 0; i < e_.size(); ++i) e_[i] -= o.e_[i];
    return *this;
  }
  Vector& operator*=(double s) {
    for (double& v : e_) v *= s;
    return *this;
  }

 private:
  std::vector<double> e_;
};

inline Vector operator+(Vector a, const Vector& b) { return a += b; }
inline Vector operator-(Vector a, const Vector& b) { return a -= b; }
inline Vector operator*(double s, Vector v) { return v *= s; }

inline double dot(const Vector& a, const Vector& b) {
  detail::require(a.size() == b.size(), "dot: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// y += alpha*x
inline void axpy(double alpha, const Vector& x, Vector& y) {
  detail::require(x.size() == y.size(), "axpy: size mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), e_(rows * cols, fill) {
    if (!std::isfinite(fill)) throw NonFiniteError("Matrix: non-finite fill");
  }
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> entries)
      : rows_(rows), cols_(cols), e_(std::move(entries)) {
    detail::require(e_.size() == rows_ * cols_, "Matrix: entry count != rows*cols");
    detail::check_finite(e_, "Matrix");
  }
  Matrix(std::initializer_list<std::initializer_list<double>> init) {
    rows_ = init.size();
    cols_ = rows_ ? init.begin()->size() : 0;
    e_.reserve(rows_ * cols_);
    for (const auto& row : init) {
      detail::require(row.size() == cols_, "Matrix: ragged initializer");
      e_.insert(e_.end(), row.begin(), row.end());
    }
    detail::check_finite(e_, "Matrix");
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
  static Matrix diagonal(const Vector& d) {
    Matrix m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool square() const { return rows_ == cols_; }

  double operator()(std::size_t i, std::size_t j) const { return e_[i * cols_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return e_[i * cols_ + j]; }
  std::span<const double> row_span(std::size_t i) const {
    return {e_.data() + i * cols_, cols_};
  }
  const std::vector<double>& entries() const { return e_; }

  Vector apply(const Vector& v) const {
    detail::require(v.size() == cols_, "Matrix::apply: size mismatch");
    Vector out(rows_);
    for (std::size_t i = 0; i < rows_; ++i) {
      const double* r = e_.data() + i * cols_;
      double s = 0.0;
      for (std::size_t j = 0; j < cols_; ++j) s += r[j] * v[j];
      out[i] = s;
    }
    return out;
  }

  Vector apply_transpose(const Vector& v) const {
    detail::require(v.size() == rows_, "Matrix::apply_transpose: size mismatch");
    Vector out(cols_);
    for (std::size_t i = 0; i < rows_; ++i) {
      const double* r = e_.data() + i * cols_;
      const double vi = v[i];
      for (std::size_t j = 0; j < cols_; ++j) out[j] += r[j] * vi;
    }
    return out;
  }

  Vector col(std::size_t j) const {
    Vector out(rows_);
    for (std::size_t i = 0; i < rows_; ++i) out[i] = (*this)(i, j);
    return out;
  }
  void set_col(std::size_t j, const Vector& v) {
    detail::require(v.size() == rows_, "Matrix::set_col: size mismatch");
    for (std::size_t i = 0; i < rows_; ++i) (*this)(i, j) = v[i];
  }

  Matrix transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  Matrix& operator+=(const Matrix& o) {
    detail::require(rows_ == o.rows_ && cols_ == o.cols_, "Matrix +=: shape mismatch");
    for (std::size_t i = 0; i < e_.size(); ++i) e_[i] += o.e_[i];
    return *this;
  }
  Matrix& operator-=(const Matrix& o) {
    detail::require(rows_ == o.rows_ && cols_ == o.cols_, "Matrix -=: shape mismatch");
    for (std::size_t i = 0; i < e_.size(); ++i) e_[i] -= o.e_[i];
    return *this;
  }
  Matrix& operator*=(double s) {
    for (double& v : e_) v *= s;
    return *this;
  }

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> e_;
};

inline Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
inline Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
inline Matrix operator*(double s, Matrix m) { return m *= s; }

/// Dense product, cache-friendly i-k-j order.
inline Matrix matmul(const Matrix& a, const Matrix& b) {
  detail::require(a.cols() == b.rows(), "matmul: inner dimensions differ");
  Matrix c(a.rows(), b.cols());
  const std::size_t n = a.rows(), m = b.cols(), k = a.cols();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a(i, p);
      if (aip == 0.0) continue;
      for (std::size_t j = 0; j < m; ++j) c(i, j) += aip * b(p, j);
    }
  }
  return c;
}

inline Matrix operator*(const Matrix& a, const Matrix& b) { return matmul(a, b); }
inline Vector operator*(const Matrix& a, const Vector& v) { return a.apply(v); }

/// d-th matrix power by repeated multiplication (d >= 0).
inline Matrix matrix_power(const Matrix& a, std::size_t d) {
  detail::require(a.square(), "matrix_power: matrix not square");
  Matrix out = Matrix::identity(a.rows());
  for (std::size_t i = 0; i < d; ++i) out = matmul(out, a);
  return out;
}

}  // namespace blockkrylov
