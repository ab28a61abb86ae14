#pragma once

// LU factorization with partial pivoting, combined L\U storage.
// Realizes every exact inverse action in the project; a pivot smaller than
// 1e-14 times the row magnitude of the input is treated as singular.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "blockkrylov/dense/matrix.hpp"

namespace blockkrylov {

struct SingularMatrixError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class LuFactors {
 public:
  LuFactors() = default;

  std::size_t size() const { return lu_.rows(); }

  Vector solve(const Vector& b) const {
    detail::require(b.size() == size(), "LuFactors::solve: size mismatch");
    const std::size_t n = size();
    Vector x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = b[perm_[i]];
    // forward substitution, unit lower triangle
    for (std::size_t i = 1; i < n; ++i) {
      double s = x[i];
      for (std::size_t j = 0; j < i; ++j) s -= lu_(i, j) * x[j];
      x[i] = s;
    }
    // back substitution
    for (std::size_t ii = n; ii-- > 0;) {
      double s = x[ii];
      for (std::size_t j = ii + 1; j < n; ++j) s -= lu_(ii, j) * x[j];
      x[ii] = s / lu_(ii, ii);
    }
    return x;
  }

  /// Columnwise solve: X with A*X = B.
  Matrix solve_matrix(const Matrix& b) const {
    detail::require(b.rows() == size(), "LuFactors::solve_matrix: size mismatch");
    Matrix x(b.rows(), b.cols());
    for (std::size_t j = 0; j < b.cols(); ++j) x.set_col(j, solve(b.col(j)));
    return x;
  }

  Matrix inverse() const { return solve_matrix(Matrix::identity(size())); }

  friend LuFactors lu_factor(const Matrix& a);

 private:
  Matrix lu_;
  std::vector<std::size_t> perm_;
};

inline LuFactors lu_factor(const Matrix& a) {
  detail::require(a.square(), "lu_factor: matrix not square");
  const std::size_t n = a.rows();
  LuFactors f;
  f.lu_ = a;
  f.perm_.resize(n);
  for (std::size_t i = 0; i < n; ++i) f.perm_[i] = i;

  double max_row_magnitude = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      max_row_magnitude = std::max(max_row_magnitude, std::abs(a(i, j)));
  const double pivot_floor = 1e-14 * max_row_magnitude;

  Matrix& lu = f.lu_;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    double best = std::abs(lu(k, k));
    for (std::size_t i = k + 1; i < n; ++i) {
      const double v = std::abs(lu(i, k));
      if (v > best) {
        best = v;
        p = i;
      }
    }
    if (best <= pivot_floor)
      throw SingularMatrixError("lu_factor: matrix singular to working precision");
    if (p != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(lu(k, j), lu(p, j));
      std::swap(f.perm_[k], f.perm_[p]);
    }
    const double inv_piv = 1.0 / lu(k, k);
    for (std::size_t i = k + 1; i < n; ++i) {
      const double m = lu(i, k) * inv_piv;
      lu(i, k) = m;
      if (m == 0.0) continue;
      for (std::size_t j = k + 1; j < n; ++j) lu(i, j) -= m * lu(k, j);
    }
  }
  return f;
}

inline Vector lu_solve(const Matrix& a, const Vector& b) { return lu_factor(a).solve(b); }

/// X with A*X = B for dense B.
inline Matrix lu_solve_matrix(const Matrix& a, const Matrix& b) {
  return lu_factor(a).solve_matrix(b);
}

inline Matrix lu_inverse(const Matrix& a) { return lu_factor(a).inverse(); }

inline bool is_singular(const Matrix& a) {
  try {
    lu_factor(a);
    return false;
  } catch (const SingularMatrixError&) {
    return true;
  }
}

}  // namespace blockkrylov
