#pragma once

// Deterministic problem generators: the tridiagonal stagnation pair, a
// nilpotent-shift surrogate, seeded random/saddle/SPD block systems, and a
// finite-difference Oseen-like system (two-component upwind
// advection-diffusion momentum block, forward-difference gradient,
// backward-difference divergence, -eps*I pressure stabilization block).
// Every generator is bit-reproducible for a fixed spec and seed.

#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>

#include "blockkrylov/block_system.hpp"
#include "blockkrylov/dense/lu.hpp"
#include "blockkrylov/dense/norms.hpp"
#include "blockkrylov/dense/rng.hpp"

namespace blockkrylov {

struct Problem {
  std::string id;
  std::optional<BlockSystem2x2> system;  // set for block-structured problems
  std::optional<Matrix> monolithic;      // set for plain-matrix problems
  Vector rhs;

  Matrix matrix() const { return system ? system->assemble() : *monolithic; }
  std::size_t size() const { return rhs.size(); }
};

// ---------------------------------------------------------------------------
// Tridiagonal stagnation pair
// ---------------------------------------------------------------------------

/// blkdiag(I_500, tridiag[-1, center, -1]_500) with b = (1,...,1000)/1000.
/// center = 2 gives the slow matrix, center = 2.0025 the fast one.
inline Problem tridiagonal_pair_member(double center) {
  const std::size_t half = 500;
  Matrix d(half, half);
  for (std::size_t i = 0; i < half; ++i) {
    d(i, i) = center;
    if (i + 1 < half) {
      d(i, i + 1) = -1.0;
      d(i + 1, i) = -1.0;
    }
  }
  Vector b(2 * half);
  for (std::size_t i = 0; i < 2 * half; ++i) b[i] = static_cast<double>(i + 1) / 1000.0;

  Problem p;
  std::ostringstream id;
  id << "example11-" << (center == 2.0 ? "a1" : "a2");
  p.id = id.str();
  p.system = BlockSystem2x2(Matrix::identity(half), Matrix(half, half), Matrix(half, half),
                            std::move(d));
  p.rhs = std::move(b);
  return p;
}

inline Problem example11_a1() { return tridiagonal_pair_member(2.0); }
inline Problem example11_a2() { return tridiagonal_pair_member(2.0025); }

// ---------------------------------------------------------------------------
// Nilpotent shift surrogate
// ---------------------------------------------------------------------------

/// A = I - N with N the shift on the bandwidth-th subdiagonal; rhs = e1.
inline Problem nilpotent_shift(std::size_t n, std::size_t bandwidth = 1) {
  detail::require(n >= 2 && bandwidth >= 1 && bandwidth < n,
                  "nilpotent_shift: need n >= 2 and 1 <= bandwidth < n");
  Matrix a = Matrix::identity(n);
  for (std::size_t i = bandwidth; i < n; ++i) a(i, i - bandwidth) = -1.0;
  Problem p;
  std::ostringstream id;
  id << "nilpotent:n=" << n << ",bandwidth=" << bandwidth;
  p.id = id.str();
  p.monolithic = std::move(a);
  p.rhs = Vector::unit(n, 0);
  return p;
}

// ---------------------------------------------------------------------------
// Seeded random block systems
// ---------------------------------------------------------------------------

namespace detail {

/// Random orthogonal matrix via Householder QR of a Gaussian matrix.
inline Matrix random_orthogonal(std::size_t n, Rng& rng) {
  Matrix g = rng.normal_matrix(n, n);
  Matrix q = Matrix::identity(n);
  // Householder sweep applied to g, accumulating the reflections in q.
  for (std::size_t k = 0; k < n; ++k) {
    Vector v(n - k);
    double norm_x = 0.0;
    for (std::size_t i = k; i < n; ++i) {
      v[i - k] = g(i, k);
      norm_x += g(i, k) * g(i, k);
    }
    norm_x = std::sqrt(norm_x);
    if (norm_x == 0.0) continue;
    const double alpha = v[0] >= 0.0 ? -norm_x : norm_x;
    v[0] -= alpha;
    double vv = 0.0;
    for (double x : v) vv += x * x;
    if (vv == 0.0) continue;
    const double scale = 2.0 / vv;
    auto reflect = [&](Matrix& m) {
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t i = k; i < n; ++i) s += v[i - k] * m(i, j);
        s *= scale;
        for (std::size_t i = k; i < n; ++i) m(i, j) -= s * v[i - k];
      }
    };
    reflect(g);
    reflect(q);
  }
  return q.transpose();  // accumulated product applied to the identity
}

/// Nonsingular matrix with geometric singular-value decay 1 .. 1/cond.
inline Matrix conditioned_random(std::size_t n, double cond, Rng& rng) {
  const Matrix u = random_orthogonal(n, rng);
  const Matrix v = random_orthogonal(n, rng);
  Matrix s(n, n);
  for (std::size_t i = 0; i < n; ++i)
    s(i, i) = n > 1 ? std::pow(cond, -static_cast<double>(i) / static_cast<double>(n - 1)) : 1.0;
  return matmul(u, matmul(s, v));
}

}  // namespace detail

/// General nonsymmetric block system with nonsingular diagonal blocks and
/// Schur complements. `conditioning` scales the singular-value decay of the
/// diagonal blocks, which controls how hard the Schur problem is to
/// approximate.
inline BlockSystem2x2 random_block(std::size_t n1, std::size_t n2, std::uint64_t seed,
                                   double conditioning = 50.0) {
  for (std::uint64_t attempt = 0;; ++attempt) {
    Rng rng(seed + 0x9E37ULL * attempt);
    Matrix a11 = detail::conditioned_random(n1, conditioning, rng);
    Matrix a22 = detail::conditioned_random(n2, conditioning, rng);
    const double cpl = 0.5 / std::sqrt(static_cast<double>(std::max(n1, n2)));
    Matrix a12 = rng.normal_matrix(n1, n2);
    a12 *= cpl;
    Matrix a21 = rng.normal_matrix(n2, n1);
    a21 *= cpl;
    BlockSystem2x2 sys(std::move(a11), std::move(a12), std::move(a21), std::move(a22));
    try {
      if (!is_singular(sys.schur_complement(SchurBlock::S11)) &&
          !is_singular(sys.schur_complement(SchurBlock::S22)))
        return sys;
    } catch (const SingularMatrixError&) {
    }
  }
}

/// Saddle-point system: SPD (1,1) block, exactly zero (2,2) block,
/// full-column-rank coupling with A21 = A12^T. Requires n2 <= n1.
inline BlockSystem2x2 saddle_point(std::size_t n1, std::size_t n2, std::uint64_t seed) {
  detail::require(n2 <= n1, "saddle_point: need n2 <= n1 for a nonsingular Schur complement");
  for (std::uint64_t attempt = 0;; ++attempt) {
    Rng rng(seed + 0x51DDULL * attempt);
    Matrix g = rng.normal_matrix(n1, n1);
    Matrix b11 = matmul(g.transpose(), g);
    b11 *= 1.0 / static_cast<double>(n1);
    b11 += Matrix::identity(n1);
    Matrix b12 = rng.normal_matrix(n1, n2);
    Matrix b21 = b12.transpose();
    BlockSystem2x2 sys(std::move(b11), std::move(b12), std::move(b21), Matrix(n2, n2));
    try {
      if (!is_singular(sys.schur_complement(SchurBlock::S22))) return sys;
    } catch (const SingularMatrixError&) {
    }
  }
}

/// SPD block system: A = G^T G / n + I split at n1.
inline BlockSystem2x2 spd_block(std::size_t n1, std::size_t n2, std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t n = n1 + n2;
  Matrix g = rng.normal_matrix(n, n);
  Matrix a = matmul(g.transpose(), g);
  a *= 1.0 / static_cast<double>(n);
  a += Matrix::identity(n);
  return split_monolithic(a, n1);
}

/// Schur-complement approximation for verification runs: S_kk plus a seeded
/// relative perturbation of spectral size eta, retried until both the
/// approximation and the induced fixed-point operator are nonsingular.
inline Matrix perturbed_schur(const BlockSystem2x2& sys, SchurBlock block, double eta,
                              std::uint64_t seed) {
  const Matrix s = sys.schur_complement(block);
  const double scale = two_norm(s);
  for (std::uint64_t attempt = 0;; ++attempt) {
    Rng rng(seed + 0xA17EULL * attempt);
    Matrix r = rng.normal_matrix(s.rows(), s.cols());
    const double rn = two_norm(r);
    if (rn == 0.0) continue;
    r *= eta * scale / rn;
    Matrix shat = s + r;
    try {
      const Matrix e = Matrix::identity(s.rows()) - lu_solve_matrix(shat, s);
      if (!is_singular(e)) return shat;
    } catch (const SingularMatrixError&) {
    }
  }
}

/// SPD Schur approximation: S_kk + eta * ||S|| * normalized H^T H.
inline Matrix spd_perturbed_schur(const BlockSystem2x2& sys, SchurBlock block, double eta,
                                  std::uint64_t seed) {
  const Matrix s = sys.schur_complement(block);
  Rng rng(seed);
  Matrix h = rng.normal_matrix(s.rows(), s.cols());
  Matrix hh = matmul(h.transpose(), h);
  const double hn = two_norm(hh);
  hh *= eta * two_norm(s) / hn;
  return s + hh;
}

// ---------------------------------------------------------------------------
// Finite-difference Oseen-like generator
// ---------------------------------------------------------------------------

enum class Wind { Constant, Recirculating };

struct OseenConfig {
  std::size_t m = 24;       // interior grid points per direction
  double nu = 1e-2;         // viscosity
  double eps = 1e-2;        // (2,2)-block stabilization: A22 = -eps*I
  Wind wind = Wind::Constant;
};

namespace detail {

inline void wind_at(const OseenConfig& cfg, double x, double y, double& wx, double& wy) {
  if (cfg.wind == Wind::Constant) {
    wx = wy = 1.0 / std::sqrt(2.0);
  } else {
    wx = 2.0 * (y - 0.5);
    wy = 2.0 * (0.5 - x);
  }
}

}  // namespace detail

/// Two-component advection-diffusion momentum block (centered diffusion,
/// first-order upwind advection), forward-difference pressure gradient,
/// backward-difference velocity divergence, and A22 = -eps*I. Homogeneous
/// Dirichlet boundary; rhs is A applied to a seeded unit vector so the
/// system has a known nondegenerate solution.
inline Problem oseen_fd(const OseenConfig& cfg) {
  detail::require(cfg.m >= 3, "oseen_fd: need m >= 3");
  const std::size_t m = cfg.m;
  const std::size_t np = m * m;   // pressure unknowns
  const std::size_t nv = 2 * np;  // velocity unknowns (two components)
  const double h = 1.0 / static_cast<double>(m + 1);
  const double ih = 1.0 / h;
  const double ih2 = ih * ih;

  auto idx = [m](std::size_t i, std::size_t j) { return j * m + i; };  // x fastest

  // scalar advection-diffusion stencil, one copy per velocity component
  Matrix l(np, np);
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t row = idx(i, j);
      const double x = h * static_cast<double>(i + 1);
      const double y = h * static_cast<double>(j + 1);
      double wx = 0.0, wy = 0.0;
      detail::wind_at(cfg, x, y, wx, wy);

      l(row, row) += 4.0 * cfg.nu * ih2;
      if (i > 0) l(row, idx(i - 1, j)) -= cfg.nu * ih2;
      if (i + 1 < m) l(row, idx(i + 1, j)) -= cfg.nu * ih2;
      if (j > 0) l(row, idx(i, j - 1)) -= cfg.nu * ih2;
      if (j + 1 < m) l(row, idx(i, j + 1)) -= cfg.nu * ih2;

      if (wx >= 0.0) {
        l(row, row) += wx * ih;
        if (i > 0) l(row, idx(i - 1, j)) -= wx * ih;
      } else {
        l(row, row) -= wx * ih;
        if (i + 1 < m) l(row, idx(i + 1, j)) += wx * ih;
      }
      if (wy >= 0.0) {
        l(row, row) += wy * ih;
        if (j > 0) l(row, idx(i, j - 1)) -= wy * ih;
      } else {
        l(row, row) -= wy * ih;
        if (j + 1 < m) l(row, idx(i, j + 1)) += wy * ih;
      }
    }
  }

  Matrix a11(nv, nv);
  for (std::size_t i = 0; i < np; ++i)
    for (std::size_t j = 0; j < np; ++j) {
      if (l(i, j) == 0.0) continue;
      a11(i, j) = l(i, j);
      a11(np + i, np + j) = l(i, j);
    }

  // forward-difference gradient (pressure -> velocity rows)
  Matrix a12(nv, np);
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t row = idx(i, j);
      a12(row, row) -= ih;
      if (i + 1 < m) a12(row, idx(i + 1, j)) += ih;
      a12(np + row, row) -= ih;
      if (j + 1 < m) a12(np + row, idx(i, j + 1)) += ih;
    }
  }

  // backward-difference divergence (velocity -> pressure rows)
  Matrix a21(np, nv);
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t row = idx(i, j);
      a21(row, row) += ih;
      if (i > 0) a21(row, idx(i - 1, j)) -= ih;
      a21(row, np + row) += ih;
      if (j > 0) a21(row, np + idx(i, j - 1)) -= ih;
    }
  }

  Matrix a22(np, np);
  for (std::size_t i = 0; i < np; ++i) a22(i, i) = -cfg.eps;

  Problem p;
  std::ostringstream id;
  id << "oseen:m=" << m << ",nu=" << cfg.nu << ",eps=" << cfg.eps
     << ",wind=" << (cfg.wind == Wind::Constant ? "const" : "recirc");
  p.id = id.str();
  p.system = BlockSystem2x2(std::move(a11), std::move(a12), std::move(a21), std::move(a22));

  Rng rng(0xB10CULL);
  Vector xstar = rng.normal_vector(nv + np);
  xstar *= 1.0 / norm2(xstar);
  p.rhs = p.system->apply(xstar);
  return p;
}

// ---------------------------------------------------------------------------
// Problem spec strings (CLI surface)
// ---------------------------------------------------------------------------

struct ProblemSpec {
  std::string text;

  static ProblemSpec parse(const std::string& s) { return ProblemSpec{s}; }
};

/// Build a problem from its CLI spec string, e.g. "example11-a2",
/// "nilpotent:n=100,bandwidth=1", "random:n1=10,n2=6,seed=3,cond=50",
/// "saddle:n1=10,n2=6,seed=3", "spd:n1=10,n2=8,seed=3",
/// "oseen:m=24,nu=1e-2,eps=1e-2,wind=const". The seed argument overrides a
/// missing seed key for the random kinds.
inline Problem generate(const ProblemSpec& spec, std::uint64_t default_seed = kDefaultSeed) {
  const std::string& s = spec.text;
  const auto colon = s.find(':');
  const std::string kind = s.substr(0, colon);

  std::uint64_t seed = default_seed;
  std::size_t n1 = 10, n2 = 6, n = 100, bandwidth = 1;
  double cond = 50.0;
  OseenConfig oc;
  if (colon != std::string::npos) {
    std::istringstream rest(s.substr(colon + 1));
    std::string kv;
    while (std::getline(rest, kv, ',')) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos)
        throw std::invalid_argument("problem spec: expected key=value, got '" + kv + "'");
      const std::string key = kv.substr(0, eq);
      const std::string val = kv.substr(eq + 1);
      if (key == "n1") n1 = std::stoul(val);
      else if (key == "n2") n2 = std::stoul(val);
      else if (key == "n") n = std::stoul(val);
      else if (key == "bandwidth" || key == "bw") bandwidth = std::stoul(val);
      else if (key == "seed") seed = std::stoull(val);
      else if (key == "cond") cond = std::stod(val);
      else if (key == "m") oc.m = std::stoul(val);
      else if (key == "nu") oc.nu = std::stod(val);
      else if (key == "eps") oc.eps = std::stod(val);
      else if (key == "wind") {
        if (val == "const") oc.wind = Wind::Constant;
        else if (val == "recirc") oc.wind = Wind::Recirculating;
        else throw std::invalid_argument("problem spec: unknown wind '" + val + "'");
      } else {
        throw std::invalid_argument("problem spec: unknown key '" + key + "'");
      }
    }
  }

  auto block_problem = [&](BlockSystem2x2 sys, const char* name) {
    Problem p;
    std::ostringstream id;
    id << name << ":n1=" << n1 << ",n2=" << n2 << ",seed=" << seed;
    p.id = id.str();
    Rng rng(seed ^ 0xF00DULL);
    p.rhs = rng.normal_vector(sys.size());
    p.rhs *= 1.0 / norm2(p.rhs);
    p.system = std::move(sys);
    return p;
  };

  if (kind == "example11-a1") return example11_a1();
  if (kind == "example11-a2") return example11_a2();
  if (kind == "nilpotent") return nilpotent_shift(n, bandwidth);
  if (kind == "random") return block_problem(random_block(n1, n2, seed, cond), "random");
  if (kind == "saddle") return block_problem(saddle_point(n1, n2, seed), "saddle");
  if (kind == "spd") return block_problem(spd_block(n1, n2, seed), "spd");
  if (kind == "oseen") return oseen_fd(oc);
  throw std::invalid_argument("problem spec: unknown kind '" + kind + "'");
}

}  // namespace blockkrylov
