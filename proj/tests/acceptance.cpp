// Acceptance harness: runs every acceptance criterion at its stated tolerance
// and prints one pass/fail line per criterion. Exit status is the number of
// failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "blockkrylov/blockkrylov.hpp"

using namespace blockkrylov;

namespace {

int g_failures = 0;

void report(int number, const std::string& name, bool pass, const std::string& detail,
            double seconds) {
  std::printf("[%s] criterion %2d: %s  (%s; %.1fs)\n", pass ? "PASS" : "FAIL", number,
              name.c_str(), detail.c_str(), seconds);
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

// --- criterion 1: tridiagonal pair ------------------------------------------

void criterion_1() {
  Timer timer;
  KrylovConfig cfg;
  cfg.rel_tol = 1e-300;
  cfg.max_iter = 500;
  cfg.record_iterates = true;  // judge on true residuals b - A x_d

  auto run = [&](const Problem& p, double& rel250, double& min_rel) {
    const SolveResult res = gmres(*p.system, p.rhs, Vector(p.size()), cfg);
    const Matrix a = p.matrix();
    const double r0 = norm2(p.rhs);
    min_rel = 1.0;
    for (std::size_t d = 0; d < res.iterates.size(); ++d) {
      const double rel = norm2(p.rhs - a.apply(res.iterates[d])) / r0;
      if (d == 250) rel250 = rel;
      min_rel = std::min(min_rel, rel);
    }
  };
  double rel_slow_250 = 1.0, rel_fast_250 = 1.0, min_slow = 1.0, min_fast = 1.0;
  run(example11_a1(), rel_slow_250, min_slow);
  run(example11_a2(), rel_fast_250, min_fast);

  const bool pass = rel_fast_250 <= 1e-4 && rel_slow_250 >= 1e-1 && min_slow > 1e-12 &&
                    min_fast > 1e-12;
  std::ostringstream detail;
  detail << "rel@250: slow=" << fmt(rel_slow_250) << " fast=" << fmt(rel_fast_250)
         << ", min rel@500: slow=" << fmt(min_slow) << " fast=" << fmt(min_fast);
  report(1, "tridiagonal pair: fast/slow split at iteration 250, no convergence by 500", pass,
         detail.str(), timer.elapsed());
}

// --- criteria driven by the verification suites -----------------------------

void criterion_from_suite(int number, const std::string& name, const VerifyOutcome& outcome,
                          double seconds) {
  std::size_t rows = 0, failed = 0;
  for (const auto& r : outcome.reports)
    for (const auto& row : r.rows) {
      ++rows;
      if (!row.pass) ++failed;
    }
  std::ostringstream detail;
  detail << rows - failed << "/" << rows << " checks";
  report(number, name, failed == 0 && rows > 0, detail.str(), seconds);
}

void criterion_2() {
  Timer timer;
  VerifyOptions opt;
  opt.systems = 10;
  const VerifyOutcome outcome = suite_fixed_point_two_step(opt);
  criterion_from_suite(2, "fixed point with exact-Schur triangular preconditioner: 2 iterations",
                       outcome, timer.elapsed());
}

void criterion_3() {
  Timer timer;
  VerifyOptions opt;
  opt.systems = 10;
  const VerifyOutcome outcome = suite_closed_forms(opt);
  criterion_from_suite(3, "closed-form propagation powers match direct powers (14 selectors)",
                       outcome, timer.elapsed());
}

void criterion_4() {
  Timer timer;
  VerifyOptions opt;
  opt.systems = 10;
  opt.polynomials = 20;
  const VerifyOutcome outcome = suite_similarity(opt);
  criterion_from_suite(4, "triangular/LDU similarity and change-of-basis defects below 1e-9",
                       outcome, timer.elapsed());
}

void criterion_5() {
  Timer timer;
  VerifyOptions opt;
  opt.systems = 5;
  const VerifyOutcome outcome = suite_saddle_periodicity(opt);
  criterion_from_suite(5, "saddle block-diagonal fixed point: period two, never converges",
                       outcome, timer.elapsed());
}

void criterion_6() {
  Timer timer;
  VerifyOptions opt;
  opt.systems = 20;
  opt.residuals = 3;
  VerifyOutcome all = suite_ldu_gmres(opt);
  VerifyOutcome left = suite_left_triangular(opt);
  VerifyOutcome right = suite_right_triangular(opt);
  for (auto& r : left.reports) all.reports.push_back(std::move(r));
  for (auto& r : right.reports) all.reports.push_back(std::move(r));

  // asserted: every upper bound and every left-side lower bound; the
  // right-LDU lower value is an observation (the 2x2 run may legitimately
  // beat the Schur problem on this side), counted rather than asserted.
  // Estimate-based norm-level reports ride along in the suite but are not
  // per-residual chains, so they are excluded from this criterion's tally.
  std::size_t rows = 0, failed = 0, observed = 0, observed_total = 0;
  for (const auto& rep : all.reports) {
    if (rep.multiplicative_slack) continue;
    for (const auto& row : rep.rows) {
      ++rows;
      if (!row.pass) ++failed;
    }
    if (!rep.lower_asserted) {
      observed += rep.schur_faster_observed;
      observed_total += rep.rows.size();
    }
  }
  std::ostringstream detail;
  detail << rows - failed << "/" << rows << " asserted checks; right-LDU runs beat the "
         << "recorded Schur lower value on " << observed << "/" << observed_total
         << " rows (recorded, not asserted)";
  report(6, "per-residual GMRES chains (LDU, left/right triangular), d=1..15", failed == 0,
         detail.str(), timer.elapsed());
}

void criterion_7() {
  Timer timer;
  VerifyOptions opt;
  opt.systems = 10;
  opt.residuals = 1;
  VerifyOutcome outcome = suite_ldu_cg(opt);

  // off-diagonal independence: flipping the sign of the coupling blocks
  // leaves S22, and therefore both bounds, unchanged
  bool independence = true;
  for (std::uint64_t seed : {2u, 12u}) {
    const BlockSystem2x2 sys = spd_block(9, 9, seed);
    const BlockSystem2x2 flipped(sys.a11(), -1.0 * sys.a12(), -1.0 * sys.a21(), sys.a22());
    const Matrix shat = spd_perturbed_schur(sys, SchurBlock::S22, 0.3, seed + 5);
    Rng rng(seed);
    const BlockVector e{rng.normal_vector(9), rng.normal_vector(9)};
    std::vector<std::size_t> degrees{1, 2, 3, 4, 5, 6, 7, 8};
    const BoundReport a = check_ldu_cg(sys, shat, e, SchurBlock::S22, degrees);
    const BoundReport b = check_ldu_cg(flipped, shat, e, SchurBlock::S22, degrees);
    if (!a.all_pass() || !b.all_pass()) independence = false;
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
      const double scale = std::max({a.rows[i].lower, a.rows[i].upper, 1e-12});
      if (std::abs(a.rows[i].lower - b.rows[i].lower) > 1e-9 * scale) independence = false;
      if (std::abs(a.rows[i].upper - b.rows[i].upper) > 1e-9 * scale) independence = false;
    }
  }

  std::size_t rows = 0, failed = 0;
  for (const auto& r : outcome.reports)
    for (const auto& row : r.rows) {
      ++rows;
      if (!row.pass) ++failed;
    }
  std::ostringstream detail;
  detail << rows - failed << "/" << rows << " chain checks, off-diagonal independence "
         << (independence ? "holds" : "violated");
  report(7, "CG energy-norm chains on SPD systems, d=1..8", failed == 0 && independence,
         detail.str(), timer.elapsed());
}

void criterion_8() {
  Timer timer;
  VerifyOptions opt;
  opt.systems = 10;
  opt.samples = 200;
  const VerifyOutcome outcome = suite_jacobi_ideal(opt);
  criterion_from_suite(8,
                       "block-Jacobi ideal-norm chains at multiplicative slack 1.1 "
                       "(estimate-based)",
                       outcome, timer.elapsed());
}

void criterion_9() {
  Timer timer;
  bool pass = true;
  std::ostringstream detail;
  for (std::size_t n : {std::size_t(50), std::size_t(100)}) {
    const Problem p = nilpotent_shift(n);
    KrylovConfig cfg;
    cfg.rel_tol = 1e-13;
    cfg.max_iter = n + 2;
    const SolveResult res = gmres(*p.monolithic, p.rhs, Vector(n), cfg);
    bool stalled = true;
    for (std::size_t d = 0; d <= n - 2; ++d)
      if (std::abs(res.history.relative(d) - 1.0) > 1e-12) stalled = false;
    const bool converged_at_nm1 = res.history.relative(std::min<std::size_t>(
                                      n - 1, res.history.residual_norms.size() - 1)) <= 1e-12;
    if (!(stalled && converged_at_nm1)) pass = false;
    detail << "n=" << n << ": rel@1=" << fmt(res.history.relative(1))
           << " rel@" << n - 1 << "=" << fmt(res.history.relative(std::min<std::size_t>(
                                        n - 1, res.history.residual_norms.size() - 1)))
           << " rel@" << n << "=" << fmt(res.history.relative(std::min<std::size_t>(
                                        n, res.history.residual_norms.size() - 1)))
           << "; ";
  }
  report(9, "nilpotent shift: GMRES stall at 1.0 through n-2, convergence at n-1", pass,
         detail.str(), timer.elapsed());
}

void criterion_10() {
  Timer timer;
  const OseenStudy study = prepare_oseen_study({.m = 24, .nu = 1e-2, .eps = 1e-2});
  const double global_tol = 1e-8;
  const std::size_t max_outer = 600;

  auto iters = [&](Family fam, double inner_tol, bool neg) {
    const SolveResult res =
        run_oseen(study, oseen_spec(fam, study.schur_approx, inner_tol, neg), global_tol,
                  max_outer);
    if (!res.history.converged) return std::size_t(0);
    return res.history.iterations;
  };

  const std::size_t lt = iters(Family::LowerTriangular, 1e-8, false);
  const std::size_t ut = iters(Family::UpperTriangular, 1e-8, false);
  const std::size_t bd = iters(Family::BlockDiagonal, 1e-8, false);
  const std::size_t st1 = iters(Family::SymTriLowerUpper, 1e-8, false);
  const std::size_t st2 = iters(Family::SymTriUpperLower, 1e-8, false);
  const std::size_t ldu = iters(Family::BlockLdu, 1e-8, false);

  const bool all_converged = lt && ut && bd && st1 && st2 && ldu;
  const double mean_tri = 0.5 * (static_cast<double>(lt) + static_cast<double>(ut));
  const double ratio = mean_tri > 0 ? static_cast<double>(bd) / mean_tri : 0.0;
  const bool ratio_ok = ratio >= 1.6 && ratio <= 2.6;

  const std::size_t tri_min = std::min(lt, ut);
  const bool sym_ok = st1 + 2 >= tri_min && st2 + 2 >= tri_min && ldu + 2 >= tri_min;

  const std::size_t bd_plus = iters(Family::BlockDiagonal, 0.0, false);
  const std::size_t bd_minus = iters(Family::BlockDiagonal, 0.0, true);
  const bool sign_ok =
      bd_plus > 0 && bd_minus > 0 &&
      std::abs(static_cast<double>(bd_plus) - static_cast<double>(bd_minus)) <=
          0.25 * static_cast<double>(bd_plus);

  std::ostringstream detail;
  detail << "iters LT=" << lt << " UT=" << ut << " BD=" << bd << " ST-I=" << st1
         << " ST-II=" << st2 << " LDU=" << ldu << "; BD/mean(LT,UT)=" << fmt(ratio)
         << "; sign study BD+=" << bd_plus << " BD-=" << bd_minus;
  report(10, "Oseen study: BD doubling, no symmetric/LDU gain, sign robustness",
         all_converged && ratio_ok && sym_ok && sign_ok, detail.str(), timer.elapsed());
}

void criterion_11() {
  Timer timer;
  Rng rng(0x0907ULL);
  bool pass = true;
  std::size_t checks = 0;
  for (std::size_t s = 0; s < 20; ++s) {
    const BlockSystem2x2 sys = random_block(9, 7, 300 + s);
    const Matrix a = sys.assemble();
    Vector r0 = rng.normal_vector(a.rows());
    KrylovConfig cfg;
    cfg.rel_tol = 1e-300;
    cfg.max_iter = 10;
    const SolveResult res = gmres(a, r0, Vector(a.rows()), cfg);
    for (std::size_t d = 1; d <= 10; ++d) {
      for (int trial = 0; trial < 50; ++trial) {
        PolynomialCoeffs p;
        p.alpha.assign(d + 1, 0.0);
        p.alpha[0] = 1.0;
        for (std::size_t i = 1; i <= d; ++i) p.alpha[i] = rng.uniform(-1.0, 1.0);
        const double value = norm2(apply_consistent_polynomial(a, p, r0));
        ++checks;
        if (value < res.history.residual_norms[d] - 1e-10 * res.history.residual_norms[0])
          pass = false;
      }
    }
  }
  std::ostringstream detail;
  detail << checks << " sampled polynomials, none beat the GMRES residual";
  report(11, "GMRES optimality against sampled consistent polynomials", pass, detail.str(),
         timer.elapsed());
}

}  // namespace

int main() {
  std::printf("acceptance suite\n");
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  criterion_9();
  criterion_10();
  criterion_11();
  std::printf("%s: %d criterion(s) failed\n", g_failures == 0 ? "OK" : "FAILURES", g_failures);
  return g_failures;
}
