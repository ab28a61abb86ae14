#pragma once

// Named experiments behind the CLI: the tridiagonal-pair residual curves, the
// nilpotent-shift stall curves, the Oseen preconditioner sweep, the Schur-sign
// study, and per-iteration convergence factors (staircase view). Sweeps fan
// out over a small worker pool; each grid point is independent.

#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "blockkrylov/dense/matrix_market.hpp"
#include "blockkrylov/krylov.hpp"
#include "blockkrylov/precond.hpp"
#include "blockkrylov/problems.hpp"

namespace blockkrylov {

template <class F>
void parallel_for(std::size_t n, std::size_t jobs, F&& body) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> workers;
  workers.reserve(jobs);
  for (std::size_t t = 0; t < jobs; ++t) {
    workers.emplace_back([&] {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) break;
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& w : workers) w.join();
  if (error) std::rethrow_exception(error);
}

struct ExperimentRow {
  std::string family;
  double inner_tol = 0.0;  // 0 denotes a direct (LU) inner solve
  double global_tol = 0.0;
  std::size_t iters = 0;
  bool converged = false;
};

inline std::string experiment_rows_to_csv(const std::vector<ExperimentRow>& rows) {
  std::ostringstream os;
  os << "family,inner_tol,global_tol,iters,converged\n";
  for (const auto& r : rows)
    os << r.family << ',' << detail::fmt_double(r.inner_tol) << ','
       << detail::fmt_double(r.global_tol) << ',' << r.iters << ','
       << (r.converged ? 1 : 0) << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------
// Oseen study
// ---------------------------------------------------------------------------

/// Keep only entries within `halfwidth` of the diagonal.
inline Matrix banded_part(const Matrix& a, std::size_t halfwidth) {
  Matrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      if ((i > j ? i - j : j - i) <= halfwidth) out(i, j) = a(i, j);
  return out;
}

inline Matrix diagonal_part(const Matrix& a) { return banded_part(a, 0); }

struct OseenStudy {
  Problem problem;
  Matrix schur;        // exact S22, materialized once
  Matrix schur_approx; // the Shat22 used by every preconditioner in the study
};

/// Materialize the Oseen system and its pressure Schur complement, and pick
/// the shared Schur approximation: the tridiagonal band of S22. The band
/// keeps the streamwise coupling and drops the rest, which leaves iteration
/// counts in the regime where the relative comparisons are meaningful.
inline OseenStudy prepare_oseen_study(const OseenConfig& cfg) {
  OseenStudy study{oseen_fd(cfg), Matrix(), Matrix()};
  study.schur = study.problem.system->schur_complement(SchurBlock::S22);
  study.schur_approx = banded_part(study.schur, 1);
  return study;
}

inline PreconditionerSpec oseen_spec(Family family, const Matrix& shat, double inner_tol,
                                     bool negate) {
  PreconditionerSpec spec;
  spec.family = family;
  spec.schur_block = SchurBlock::S22;
  spec.schur_kind = SchurApproxKind::UserMatrix;
  spec.user_matrix = shat;
  spec.user_source = "band(S22,1)";
  spec.negate_schur = negate;
  if (inner_tol > 0.0) {
    spec.inner = InnerSolveKind::Iterative;
    spec.inner_rel_tol = inner_tol;
  }
  return spec;
}

/// One FGMRES run of the study system under the given preconditioner spec.
inline SolveResult run_oseen(const OseenStudy& study, const PreconditionerSpec& spec,
                             double global_tol, std::size_t max_outer) {
  const Preconditioner p = build_preconditioner(*study.problem.system, spec);
  const std::size_t before = p.degraded_count();
  KrylovConfig cfg;
  cfg.rel_tol = global_tol;
  cfg.max_iter = max_outer;
  SolveResult res = fgmres(*study.problem.system, p, study.problem.rhs,
                           Vector(study.problem.size()), cfg);
  res.history.degraded = p.degraded_count() > before;
  return res;
}

/// Iteration table over (family, inner tolerance) at one global tolerance.
inline std::vector<ExperimentRow> oseen_report(const OseenStudy& study,
                                               const std::vector<Family>& families,
                                               const std::vector<double>& inner_tols,
                                               double global_tol, std::size_t max_outer,
                                               std::size_t jobs) {
  struct Task {
    Family family;
    double inner_tol;
  };
  std::vector<Task> tasks;
  for (Family f : families)
    for (double t : inner_tols) tasks.push_back({f, t});

  std::vector<ExperimentRow> rows(tasks.size());
  parallel_for(tasks.size(), jobs, [&](std::size_t i) {
    const Task& task = tasks[i];
    const SolveResult res =
        run_oseen(study, oseen_spec(task.family, study.schur_approx, task.inner_tol, false),
                  global_tol, max_outer);
    rows[i] = {family_token(task.family), task.inner_tol, global_tol,
               res.history.iterations, res.history.converged};
  });
  return rows;
}

// ---------------------------------------------------------------------------
// Sign study and staircase curves
// ---------------------------------------------------------------------------

struct SignStudyRow {
  std::string family;
  int sign = +1;
  double inner_tol = 0.0;
  std::size_t iters = 0;
  bool converged = false;
};

inline std::string sign_study_to_csv(const std::vector<SignStudyRow>& rows) {
  std::ostringstream os;
  os << "family,sign,inner_tol,iters,converged\n";
  for (const auto& r : rows)
    os << r.family << ',' << (r.sign > 0 ? "+" : "-") << ','
       << detail::fmt_double(r.inner_tol) << ',' << r.iters << ',' << (r.converged ? 1 : 0)
       << '\n';
  return os.str();
}

inline std::vector<SignStudyRow> sign_study(const OseenStudy& study,
                                            const std::vector<Family>& families,
                                            const std::vector<double>& inner_tols,
                                            double global_tol, std::size_t max_outer,
                                            std::size_t jobs) {
  struct Task {
    Family family;
    int sign;
    double inner_tol;
  };
  std::vector<Task> tasks;
  for (Family f : families)
    for (int sign : {+1, -1})
      for (double t : inner_tols) tasks.push_back({f, sign, t});

  std::vector<SignStudyRow> rows(tasks.size());
  parallel_for(tasks.size(), jobs, [&](std::size_t i) {
    const Task& task = tasks[i];
    const SolveResult res =
        run_oseen(study, oseen_spec(task.family, study.schur_approx, task.inner_tol,
                                    task.sign < 0),
                  global_tol, max_outer);
    rows[i] = {family_token(task.family), task.sign, task.inner_tol, res.history.iterations,
               res.history.converged};
  });
  return rows;
}

struct CurvePoint {
  std::string label;
  std::size_t iter = 0;
  double resnorm = 0.0;
  double factor = 0.0;  // 0 at iteration 0
};

inline std::string curves_to_csv(const std::vector<CurvePoint>& points,
                                 const std::string& label_column) {
  std::ostringstream os;
  os << label_column << ",iter,resnorm,factor\n";
  for (const auto& p : points) {
    os << p.label << ',' << p.iter << ',' << detail::fmt_double(p.resnorm) << ',';
    if (p.iter > 0) os << detail::fmt_double(p.factor);
    os << '\n';
  }
  return os.str();
}

inline void append_history_curve(std::vector<CurvePoint>& out, const std::string& label,
                                 const ConvergenceHistory& h) {
  const auto factors = h.convergence_factors();
  for (std::size_t i = 0; i < h.residual_norms.size(); ++i)
    out.push_back({label, i, h.residual_norms[i], i > 0 ? factors[i - 1] : 0.0});
}

/// Per-iteration convergence factors for block-diagonal and lower-triangular
/// preconditioning with both signs on the Schur approximation, direct inner
/// solves (the alternate-iteration stall shows up in the factors).
inline std::vector<CurvePoint> staircase_curves(const OseenStudy& study, double global_tol,
                                                std::size_t max_outer) {
  std::vector<CurvePoint> points;
  for (Family f : {Family::BlockDiagonal, Family::LowerTriangular}) {
    for (int sign : {+1, -1}) {
      const SolveResult res = run_oseen(study, oseen_spec(f, study.schur_approx, 0.0, sign < 0),
                                        global_tol, max_outer);
      std::ostringstream label;
      label << family_token(f) << (sign > 0 ? "+" : "-");
      append_history_curve(points, label.str(), res.history);
    }
  }
  return points;
}

// ---------------------------------------------------------------------------
// Residual-curve experiments
// ---------------------------------------------------------------------------

inline std::vector<CurvePoint> tridiagonal_pair_curves(std::size_t max_iter) {
  std::vector<CurvePoint> points;
  for (const Problem& p : {example11_a1(), example11_a2()}) {
    KrylovConfig cfg;
    cfg.rel_tol = 1e-300;  // run out the full iteration budget
    cfg.max_iter = max_iter;
    const SolveResult res = gmres(*p.system, p.rhs, Vector(p.size()), cfg);
    append_history_curve(points, p.id, res.history);
  }
  return points;
}

/// GMRES and Richardson curves for A = I - N. Richardson shows the exact
/// unit-residual stall until the nilpotency degree; GMRES decays slowly and
/// converges exactly once the Krylov space reaches the full shift chain.
inline std::vector<CurvePoint> nilpotent_curves(const std::vector<std::size_t>& sizes) {
  std::vector<CurvePoint> points;
  for (std::size_t n : sizes) {
    const Problem p = nilpotent_shift(n);
    KrylovConfig cfg;
    cfg.rel_tol = 1e-14;
    cfg.max_iter = n + 2;

    const SolveResult g = gmres(*p.monolithic, p.rhs, Vector(n), cfg);
    std::ostringstream gl;
    gl << "gmres:n=" << n;
    append_history_curve(points, gl.str(), g.history);

    const detail::IdentityPrecond ident{n};
    const SolveResult fp = fixed_point(*p.monolithic, ident, p.rhs, Vector(n), cfg);
    std::ostringstream fl;
    fl << "richardson:n=" << n;
    append_history_curve(points, fl.str(), fp.history);
  }
  return points;
}

}  // namespace blockkrylov
