#pragma once

// Vector p-norms and the operator 2-norm. The 2-norm runs power iteration
// on A^T A from a deterministic start so repeated calls agree to the bit.

#include <cmath>
#include <cstddef>
#include <limits>

#include "blockkrylov/dense/matrix.hpp"
#include "blockkrylov/dense/rng.hpp"

namespace blockkrylov {

enum class NormKind { One, Two, Inf };

inline double vec_norm(const Vector& v, NormKind p = NormKind::Two) {
  double s = 0.0;
  switch (p) {
    case NormKind::One:
      for (double x : v) s += std::abs(x);
      return s;
    case NormKind::Two:
      for (double x : v) s += x * x;
      return std::sqrt(s);
    case NormKind::Inf:
      for (double x : v) s = std::max(s, std::abs(x));
      return s;
  }
  return s;
}

inline double norm2(const Vector& v) { return vec_norm(v, NormKind::Two); }

/// Largest singular value by power iteration on A^T A, relative tolerance
/// 1e-10. Zero matrices return 0.
inline double two_norm(const Matrix& a) {
  if (a.rows() == 0 || a.cols() == 0) return 0.0;
  double frob = 0.0;
  for (double v : a.entries()) frob += v * v;
  if (frob == 0.0) return 0.0;

  Rng rng(0x5EEDF00DULL);  // fixed internal seed, independent of caller state
  Vector v = rng.normal_vector(a.cols());
  double nv = norm2(v);
  if (nv == 0.0) v = Vector::unit(a.cols(), 0), nv = 1.0;
  v *= 1.0 / nv;

  double sigma = 0.0;
  const std::size_t max_iter = 20000;
  for (std::size_t it = 0; it < max_iter; ++it) {
    Vector w = a.apply(v);
    const double s = norm2(w);
    if (s == 0.0) return 0.0;
    Vector z = a.apply_transpose(w);
    const double nz = norm2(z);
    if (nz == 0.0) return s;
    z *= 1.0 / nz;
    if (std::abs(s - sigma) <= 1e-10 * s) return s;
    sigma = s;
    v = z;
  }
  return sigma;
}

/// Matrix-induced vector norm sqrt(v^T W v); W must be symmetric positive
/// semidefinite for this to be a norm (clamps tiny negative roundoff).
inline double matrix_norm(const Vector& v, const Matrix& w) {
  const double q = dot(v, w.apply(v));
  return std::sqrt(std::max(q, 0.0));
}

}  // namespace blockkrylov
