#pragma once

// Krylov solvers: GMRES (left/right preconditioning), flexible GMRES, CG with
// matrix-induced error norms, and stationary fixed-point iteration.
//
// GMRES uses Arnoldi with modified Gram-Schmidt plus one reorthogonalization
// pass whenever the measured loss of orthogonality exceeds 1e-8, and an
// incrementally updated Givens least-squares so residual norms come for free.
// Without restarts, residual_norms[d] is exactly the minimum of ||p(B) r0||
// over consistent polynomials p of degree d in the preconditioned operator B;
// the equivalence checkers lean on that identity, so the per-iteration
// solution snapshots (record_iterates) expose the minimizing residual vectors
// themselves.

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "blockkrylov/dense/lu.hpp"
#include "blockkrylov/dense/matrix.hpp"
#include "blockkrylov/dense/norms.hpp"

namespace blockkrylov {

template <typename T>
concept LinearOperator = requires(const T& op, const Vector& v) {
  { op.rows() } -> std::convertible_to<std::size_t>;
  { op.cols() } -> std::convertible_to<std::size_t>;
  { op.apply(v) } -> std::same_as<Vector>;
};

/// Wraps a callable as a square operator.
class FunctionOperator {
 public:
  FunctionOperator(std::size_t n, std::function<Vector(const Vector&)> fn)
      : n_(n), fn_(std::move(fn)) {}
  std::size_t rows() const { return n_; }
  std::size_t cols() const { return n_; }
  Vector apply(const Vector& v) const { return fn_(v); }

 private:
  std::size_t n_;
  std::function<Vector(const Vector&)> fn_;
};

enum class Side { Left, Right };
enum class Method { Gmres, Fgmres, Cg, FixedPoint };

struct KrylovConfig {
  Method method = Method::Gmres;
  Side side = Side::Left;
  double rel_tol = 1e-10;
  std::size_t max_iter = 100;
  std::optional<std::size_t> restart;  // no value = full (unrestarted)
  bool record_iterates = false;

  void validate() const {
    if (!(rel_tol > 0.0)) throw std::invalid_argument("KrylovConfig: rel_tol must be > 0");
    if (max_iter < 1) throw std::invalid_argument("KrylovConfig: max_iter must be >= 1");
    if (restart && *restart < 1) throw std::invalid_argument("KrylovConfig: restart must be >= 1");
    if (method == Method::Cg && side != Side::Left)
      throw std::invalid_argument("KrylovConfig: CG is left-preconditioned only");
    if (method == Method::Fgmres && side != Side::Right)
      throw std::invalid_argument("KrylovConfig: FGMRES is right-preconditioned by definition");
  }
};

struct ConvergenceHistory {
  std::vector<double> residual_norms;  // index 0 = initial
  bool converged = false;
  bool diverged = false;
  bool degraded = false;  // some inner preconditioner solve hit its cap
  std::size_t iterations = 0;

  double initial() const { return residual_norms.empty() ? 0.0 : residual_norms.front(); }
  double final_norm() const { return residual_norms.empty() ? 0.0 : residual_norms.back(); }
  double relative(std::size_t d) const {
    const double r0 = initial();
    return r0 > 0.0 ? residual_norms.at(d) / r0 : 0.0;
  }
  std::vector<double> convergence_factors() const {
    std::vector<double> f;
    for (std::size_t i = 1; i < residual_norms.size(); ++i) {
      const double prev = residual_norms[i - 1];
      f.push_back(prev > 0.0 ? residual_norms[i] / prev : 0.0);
    }
    return f;
  }
};

struct SolveResult {
  Vector x;
  ConvergenceHistory history;
  std::vector<Vector> iterates;  // filled when cfg.record_iterates; [0] = x0
};

struct PolynomialCoeffs {
  std::vector<double> alpha;  // alpha[0] + alpha[1] t + ...

  std::size_t degree() const { return alpha.empty() ? 0 : alpha.size() - 1; }
  bool consistent() const { return !alpha.empty() && alpha.front() == 1.0; }
};

/// Horner evaluation of p(op) * v.
template <LinearOperator Op>
Vector apply_consistent_polynomial(const Op& op, const PolynomialCoeffs& p, const Vector& v) {
  if (p.alpha.empty()) return Vector(v.size());
  Vector w = p.alpha.back() * v;
  for (std::size_t i = p.alpha.size() - 1; i-- > 0;) {
    w = op.apply(w);
    axpy(p.alpha[i], v, w);
  }
  return w;
}

/// Horner evaluation of p(B) for square B.
inline Matrix polynomial_matrix(const Matrix& b, const PolynomialCoeffs& p) {
  detail::require(b.square(), "polynomial_matrix: matrix not square");
  const std::size_t n = b.rows();
  if (p.alpha.empty()) return Matrix(n, n);
  Matrix w = p.alpha.back() * Matrix::identity(n);
  for (std::size_t i = p.alpha.size() - 1; i-- > 0;) {
    w = matmul(b, w);
    w += p.alpha[i] * Matrix::identity(n);
  }
  return w;
}

namespace detail {

struct IdentityPrecond {
  std::size_t n;
  std::size_t rows() const { return n; }
  std::size_t cols() const { return n; }
  Vector apply(const Vector& v) const { return v; }
};

// One unrestarted Arnoldi/Givens cycle. Appends residual norms (one per
// iteration, not counting the cycle-initial norm handled by the caller) and
// returns the updated solution. A tolerance or breakdown exit is confirmed
// against the true residual before convergence is declared; the incremental
// estimate can undershoot once the Krylov basis saturates numerically.
template <LinearOperator Op, LinearOperator Prec>
Vector gmres_cycle(const Op& a, const Prec* m, const Vector& b, Vector x, Side side,
                   bool flexible, double abs_tol, std::size_t cycle_len,
                   std::size_t& iters_left, ConvergenceHistory& hist,
                   std::vector<Vector>* iterates, bool* out_converged, bool* out_stop) {
  const std::size_t n = b.size();
  auto precondition = [&](const Vector& v) { return m ? m->apply(v) : v; };

  Vector r = b - a.apply(x);
  if (side == Side::Left) r = precondition(r);
  const double beta = norm2(r);
  if (beta == 0.0) {
    *out_converged = true;
    return x;
  }

  std::vector<Vector> basis;       // v_1 .. v_{j+1}
  std::vector<Vector> flex_basis;  // z_j = M^{-1} v_j (flexible only)
  basis.push_back((1.0 / beta) * r);

  const std::size_t kmax = std::min(cycle_len, iters_left);
  std::vector<std::vector<double>> h(kmax + 1, std::vector<double>(kmax, 0.0));
  std::vector<double> cs(kmax, 0.0), sn(kmax, 0.0);
  std::vector<double> g(kmax + 1, 0.0);
  g[0] = beta;

  auto form_solution = [&](std::size_t k) {
    // back-solve the k x k triangular system from the rotated Hessenberg
    std::vector<double> y(k, 0.0);
    for (std::size_t ii = k; ii-- > 0;) {
      double s = g[ii];
      for (std::size_t jj = ii + 1; jj < k; ++jj) s -= h[ii][jj] * y[jj];
      y[ii] = s / h[ii][ii];
    }
    Vector xk = x;
    if (flexible) {
      for (std::size_t jj = 0; jj < k; ++jj) axpy(y[jj], flex_basis[jj], xk);
    } else if (side == Side::Right && m) {
      Vector u(n);
      for (std::size_t jj = 0; jj < k; ++jj) axpy(y[jj], basis[jj], u);
      xk += m->apply(u);
    } else {
      for (std::size_t jj = 0; jj < k; ++jj) axpy(y[jj], basis[jj], xk);
    }
    return xk;
  };

  std::size_t k_done = 0;
  bool converged = false;
  for (std::size_t j = 0; j < kmax; ++j) {
    Vector w;
    if (flexible) {
      flex_basis.push_back(precondition(basis[j]));
      w = a.apply(flex_basis.back());
    } else if (side == Side::Right) {
      w = a.apply(precondition(basis[j]));
    } else {
      w = precondition(a.apply(basis[j]));
    }

    const double w_start = norm2(w);
    for (std::size_t i = 0; i <= j; ++i) {
      const double hij = dot(basis[i], w);
      h[i][j] = hij;
      axpy(-hij, basis[i], w);
    }
    // second MGS pass when the remaining component still sees the basis
    double defect = 0.0;
    const double w_now = norm2(w);
    std::vector<double> corr(j + 1);
    for (std::size_t i = 0; i <= j; ++i) {
      corr[i] = dot(basis[i], w);
      defect = std::max(defect, std::abs(corr[i]));
    }
    if (defect > 1e-8 * std::max(w_now, 1e-300 * w_start)) {
      for (std::size_t i = 0; i <= j; ++i) {
        h[i][j] += corr[i];
        axpy(-corr[i], basis[i], w);
      }
    }

    const double hnext = norm2(w);
    h[j + 1][j] = hnext;
    const bool breakdown = hnext <= 1e-14 * std::max(w_start, 1.0);
    if (!breakdown) basis.push_back((1.0 / hnext) * w);

    // apply accumulated rotations, then the new one
    for (std::size_t i = 0; i < j; ++i) {
      const double t = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
      h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
      h[i][j] = t;
    }
    const double denom = std::hypot(h[j][j], h[j + 1][j]);
    if (denom == 0.0) {
      cs[j] = 1.0;
      sn[j] = 0.0;
    } else {
      cs[j] = h[j][j] / denom;
      sn[j] = h[j + 1][j] / denom;
    }
    h[j][j] = cs[j] * h[j][j] + sn[j] * h[j + 1][j];
    h[j + 1][j] = 0.0;
    g[j + 1] = -sn[j] * g[j];
    g[j] = cs[j] * g[j];

    k_done = j + 1;
    const double estimate = std::abs(g[j + 1]);
    double recorded = estimate;
    bool stop_cycle = false;
    if (estimate <= abs_tol || breakdown) {
      const Vector xk = form_solution(k_done);
      Vector rt = b - a.apply(xk);
      if (side == Side::Left && m && !flexible) rt = precondition(rt);
      const double true_norm = norm2(rt);
      if (true_norm <= abs_tol) {
        recorded = true_norm;
        converged = true;
      } else if (breakdown) {
        // basis exhausted without true convergence; give up on this cycle
        stop_cycle = true;
        *out_stop = true;
      }
    }
    hist.residual_norms.push_back(recorded);
    hist.iterations += 1;
    iters_left -= 1;
    if (iterates) iterates->push_back(form_solution(k_done));

    if (converged || stop_cycle || iters_left == 0) break;
  }

  *out_converged = converged;
  return k_done > 0 ? form_solution(k_done) : x;
}

template <LinearOperator Op, LinearOperator Prec>
SolveResult gmres_driver(const Op& a, const Prec* m, const Vector& b, const Vector& x0,
                         const KrylovConfig& cfg, bool flexible) {
  detail::require(a.rows() == a.cols(), "gmres: operator not square");
  detail::require(b.size() == a.rows() && x0.size() == a.rows(), "gmres: size mismatch");
  cfg.validate();

  SolveResult out;
  out.x = x0;
  if (cfg.record_iterates) out.iterates.push_back(x0);

  Vector r0 = b - a.apply(x0);
  if (cfg.side == Side::Left && m) r0 = m->apply(r0);
  const double beta0 = norm2(r0);
  out.history.residual_norms.push_back(beta0);
  if (beta0 == 0.0) {
    out.history.converged = true;
    return out;
  }
  const double abs_tol = cfg.rel_tol * beta0;

  std::size_t iters_left = cfg.max_iter;
  const std::size_t cycle_len = cfg.restart.value_or(cfg.max_iter);
  while (iters_left > 0) {
    bool converged = false;
    bool stop = false;
    out.x = gmres_cycle(a, m, b, out.x, cfg.side, flexible, abs_tol, cycle_len, iters_left,
                        out.history, cfg.record_iterates ? &out.iterates : nullptr, &converged,
                        &stop);
    if (converged) {
      out.history.converged = true;
      break;
    }
    if (stop) break;
  }
  return out;
}

}  // namespace detail

template <LinearOperator Op, LinearOperator Prec>
SolveResult gmres(const Op& a, const Prec& m, const Vector& b, const Vector& x0,
                  const KrylovConfig& cfg) {
  return detail::gmres_driver(a, &m, b, x0, cfg, /*flexible=*/false);
}

template <LinearOperator Op>
SolveResult gmres(const Op& a, const Vector& b, const Vector& x0, const KrylovConfig& cfg) {
  return detail::gmres_driver<Op, detail::IdentityPrecond>(a, nullptr, b, x0, cfg,
                                                           /*flexible=*/false);
}

/// Flexible GMRES; the preconditioner may change between iterations (inner
/// iterative solves). Right preconditioning by construction.
template <LinearOperator Op, LinearOperator Prec>
SolveResult fgmres(const Op& a, const Prec& m, const Vector& b, const Vector& x0,
                   KrylovConfig cfg) {
  cfg.side = Side::Right;
  cfg.method = Method::Fgmres;
  return detail::gmres_driver(a, &m, b, x0, cfg, /*flexible=*/true);
}

struct NotSpdError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Preconditioned conjugate gradients. When `exact_solution` and
/// `error_norm_matrix` are both given (verification mode) the history records
/// ||x_d - x*|| in the matrix-induced norm; otherwise it records the l2 norm
/// of the preconditioned residual. Convergence tests against the recorded
/// quantity. Negative curvature or an indefinite preconditioner raises.
template <LinearOperator Op, LinearOperator Prec>
SolveResult cg(const Op& a, const Prec* m, const Vector& b, const Vector& x0,
               const KrylovConfig& cfg, const Matrix* error_norm_matrix = nullptr,
               const Vector* exact_solution = nullptr) {
  detail::require(a.rows() == a.cols(), "cg: operator not square");
  detail::require(b.size() == a.rows() && x0.size() == a.rows(), "cg: size mismatch");
  KrylovConfig checked = cfg;
  checked.method = Method::Cg;
  checked.side = Side::Left;
  checked.validate();
  const bool verification = error_norm_matrix != nullptr && exact_solution != nullptr;

  SolveResult out;
  out.x = x0;
  if (cfg.record_iterates) out.iterates.push_back(x0);

  auto record = [&](const Vector& x, const Vector& z) {
    if (verification) return matrix_norm(x - *exact_solution, *error_norm_matrix);
    return norm2(z);
  };

  Vector r = b - a.apply(x0);
  Vector z = m ? m->apply(r) : r;
  double rz = dot(r, z);
  if (m && rz < 0.0) throw NotSpdError("cg: preconditioner not positive definite");
  Vector p = z;

  const double e0 = record(out.x, z);
  out.history.residual_norms.push_back(e0);
  if (e0 == 0.0) {
    out.history.converged = true;
    return out;
  }
  const double abs_tol = cfg.rel_tol * e0;

  for (std::size_t it = 0; it < cfg.max_iter; ++it) {
    const Vector ap = a.apply(p);
    const double pap = dot(p, ap);
    if (pap <= 0.0) throw NotSpdError("cg: operator not positive definite");
    const double alpha = rz / pap;
    axpy(alpha, p, out.x);
    axpy(-alpha, ap, r);
    z = m ? m->apply(r) : r;
    const double rz_new = dot(r, z);
    if (m && rz_new < 0.0) throw NotSpdError("cg: preconditioner not positive definite");

    const double e = record(out.x, z);
    out.history.residual_norms.push_back(e);
    out.history.iterations += 1;
    if (cfg.record_iterates) out.iterates.push_back(out.x);
    if (e <= abs_tol) {
      out.history.converged = true;
      break;
    }
    if (rz_new == 0.0) {  // exact Krylov breakdown
      out.history.converged = e <= abs_tol;
      break;
    }
    const double beta = rz_new / rz;
    rz = rz_new;
    p = z + beta * p;
  }
  return out;
}

/// x_{k+1} = x_k + P^{-1}(b - A x_k). History records l2 residual norms.
/// Growth beyond 1e12 of the initial residual flags divergence and halts.
template <LinearOperator Prec>
SolveResult fixed_point(const Matrix& a, const Prec& p, const Vector& b, const Vector& x0,
                        const KrylovConfig& cfg) {
  detail::require(a.square(), "fixed_point: matrix not square");
  detail::require(b.size() == a.rows() && x0.size() == a.rows(), "fixed_point: size mismatch");

  SolveResult out;
  out.x = x0;
  if (cfg.record_iterates) out.iterates.push_back(x0);

  Vector r = b - a.apply(x0);
  const double r0 = norm2(r);
  out.history.residual_norms.push_back(r0);
  if (r0 == 0.0) {
    out.history.converged = true;
    return out;
  }

  for (std::size_t it = 0; it < cfg.max_iter; ++it) {
    out.x += p.apply(r);
    r = b - a.apply(out.x);
    const double rn = norm2(r);
    out.history.residual_norms.push_back(rn);
    out.history.iterations += 1;
    if (cfg.record_iterates) out.iterates.push_back(out.x);
    if (rn <= cfg.rel_tol * r0) {
      out.history.converged = true;
      break;
    }
    if (rn > 1e12 * r0) {
      out.history.diverged = true;
      break;
    }
  }
  return out;
}

}  // namespace blockkrylov
