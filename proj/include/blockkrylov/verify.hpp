#pragma once

// Named verification suites driving the theory checkers over seeded problem
// families. The CLI's `verify` subcommand and the acceptance harness both run
// through here so counts, tolerances, and provenance agree.

#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "blockkrylov/problems.hpp"
#include "blockkrylov/theory.hpp"

namespace blockkrylov {

struct VerifyOptions {
  std::string suite = "all";
  std::uint64_t seed = kDefaultSeed;
  std::size_t samples = 200;   // sampled residuals for ideal-norm estimates
  std::size_t systems = 0;     // 0 = per-suite default
  std::size_t residuals = 3;   // random residual/error vectors per system
  std::size_t polynomials = 20;
};

struct VerifyOutcome {
  std::vector<BoundReport> reports;

  bool all_pass() const {
    for (const auto& r : reports)
      if (!r.all_pass()) return false;
    return !reports.empty();
  }
};

namespace detail {

inline std::string problem_tag(const char* kind, std::size_t n1, std::size_t n2,
                               std::uint64_t seed) {
  std::ostringstream os;
  os << kind << ":n1=" << n1 << ",n2=" << n2 << ",seed=" << seed;
  return os.str();
}

inline PolynomialCoeffs random_consistent_polynomial(std::size_t degree, Rng& rng) {
  PolynomialCoeffs p;
  p.alpha.assign(degree + 1, 0.0);
  p.alpha[0] = 1.0;
  for (std::size_t i = 1; i <= degree; ++i) p.alpha[i] = rng.uniform(-1.0, 1.0);
  return p;
}

inline std::vector<std::size_t> degree_range(std::size_t lo, std::size_t hi) {
  std::vector<std::size_t> d;
  for (std::size_t k = lo; k <= hi; ++k) d.push_back(k);
  return d;
}

}  // namespace detail

// --- individual suites ------------------------------------------------------

/// Triangular preconditioner with the exact Schur complement: fixed point
/// converges in exactly two iterations.
inline VerifyOutcome suite_fixed_point_two_step(const VerifyOptions& opt) {
  VerifyOutcome out;
  const std::size_t systems = opt.systems ? opt.systems : 10;
  for (std::size_t s = 0; s < systems; ++s) {
    const std::uint64_t seed = opt.seed + s;
    const std::size_t n1 = 10, n2 = 7;
    const BlockSystem2x2 sys = random_block(n1, n2, seed);
    Rng rng(seed ^ 0xFEEDULL);
    Vector b = rng.normal_vector(sys.size());

    for (Family fam : {Family::LowerTriangular, Family::UpperTriangular}) {
      for (SchurBlock block : {SchurBlock::S11, SchurBlock::S22}) {
        PreconditionerSpec spec;
        spec.family = fam;
        spec.schur_block = block;
        spec.schur_kind = SchurApproxKind::ExactSchur;
        const Preconditioner p = build_preconditioner(sys, spec);

        KrylovConfig cfg;
        cfg.rel_tol = 1e-10;
        cfg.max_iter = 10;
        const SolveResult res = fixed_point(sys.assemble(), p, b, Vector(sys.size()), cfg);

        BoundReport report;
        report.id = "fixed_point_two_step";
        report.problem = detail::problem_tag("random", n1, n2, seed);
        report.spec = spec.to_string();
        report.seed = seed;
        report.slack = 0.0;
        BoundRow row;
        row.degree = 2;
        row.lower = res.history.relative(1);
        row.middle = res.history.relative(std::min<std::size_t>(2, res.history.residual_norms.size() - 1));
        row.upper = 1e-10;
        row.pass = res.history.converged && res.history.iterations == 2;
        report.rows.push_back(row);
        out.reports.push_back(std::move(report));
      }
    }
  }
  return out;
}

/// Similarity of triangular and block-LDU preconditioned polynomials, plus
/// the change-of-basis identity, on systems whose Schur fixed-point operator
/// is well conditioned.
inline VerifyOutcome suite_similarity(const VerifyOptions& opt) {
  VerifyOutcome out;
  const std::size_t systems = opt.systems ? opt.systems : 10;
  const double tol = 1e-9;
  for (std::size_t s = 0; s < systems; ++s) {
    const std::uint64_t seed = opt.seed + 31 * s;
    const std::size_t n1 = 8, n2 = 6;
    BlockSystem2x2 sys = random_block(n1, n2, seed);
    Matrix shat11, shat22;
    // retry until both fixed-point operators are comfortably conditioned
    for (std::uint64_t bump = 0;; ++bump) {
      shat11 = perturbed_schur(sys, SchurBlock::S11, 0.4, seed + bump);
      shat22 = perturbed_schur(sys, SchurBlock::S22, 0.4, seed + 1000 + bump);
      const Matrix e11 = fp_schur_operator(sys, FpOperator::E11, shat11);
      const Matrix e22 = fp_schur_operator(sys, FpOperator::E22, shat22);
      const double c11 = two_norm(e11) * two_norm(lu_inverse(e11));
      const double c22 = two_norm(e22) * two_norm(lu_inverse(e22));
      if (c11 < 1e8 && c22 < 1e8) break;
    }

    Rng rng(seed ^ 0xBEEFULL);
    BoundReport report;
    report.id = "ldu_triangular_similarity";
    report.problem = detail::problem_tag("random", n1, n2, seed);
    report.spec = "perturbed Schur, eta=0.4";
    report.seed = seed;
    report.slack = tol;
    for (std::size_t k = 0; k < opt.polynomials; ++k) {
      const std::size_t degree = 1 + (rng.next_u64() % 8);
      const PolynomialCoeffs p = detail::random_consistent_polynomial(degree, rng);
      for (SimilarityVariant variant :
           {SimilarityVariant::U11M11Left, SimilarityVariant::L22M22Left,
            SimilarityVariant::AL11M11Right, SimilarityVariant::AU22M22Right}) {
        const bool is11 = variant == SimilarityVariant::U11M11Left ||
                          variant == SimilarityVariant::AL11M11Right;
        BoundRow row;
        row.degree = degree;
        row.middle = check_prop_similarity(sys, is11 ? shat11 : shat22, p, variant);
        row.upper = tol;
        row.pass = row.middle <= tol;
        report.rows.push_back(row);
      }
      BoundRow qrow;
      qrow.degree = degree;
      qrow.middle = check_change_of_basis(sys, shat22, p);
      qrow.upper = tol;
      qrow.pass = qrow.middle <= tol;
      report.rows.push_back(qrow);
    }
    out.reports.push_back(std::move(report));
  }
  return out;
}

/// Closed-form propagation powers against direct powers of the assembled
/// propagators, all selectors, degrees 1..5.
inline VerifyOutcome suite_closed_forms(const VerifyOptions& opt) {
  VerifyOutcome out;
  const std::size_t systems = opt.systems ? opt.systems : 10;
  const double tol = 1e-9;
  for (std::size_t s = 0; s < systems; ++s) {
    const std::uint64_t seed = opt.seed + 17 * s;
    const std::size_t n1 = 8, n2 = 6;
    BlockSystem2x2 sys = random_block(n1, n2, seed);
    const Matrix shat11 = perturbed_schur(sys, SchurBlock::S11, 0.3, seed);
    const Matrix shat22 = perturbed_schur(sys, SchurBlock::S22, 0.3, seed + 1000);

    BoundReport report;
    report.id = "closed_form_powers";
    report.problem = detail::problem_tag("random", n1, n2, seed);
    report.spec = "perturbed Schur, eta=0.3";
    report.seed = seed;
    report.slack = tol;

    for (ClosedForm cf : all_closed_forms()) {
      const ClosedFormTarget target = closed_form_target(cf);
      const bool jacobi = target.power_scale == 2;
      const Matrix& shat = target.block == SchurBlock::S11 ? shat11 : shat22;

      PreconditionerSpec spec;
      spec.family = target.family;
      spec.schur_block = target.block;
      if (jacobi) {
        spec.schur_kind = SchurApproxKind::DiagonalBlock;
      } else {
        spec.schur_kind = SchurApproxKind::UserMatrix;
        spec.user_matrix = shat;
      }
      const Matrix propagator = target.side == Side::Left ? error_propagator(sys, spec)
                                                          : residual_propagator(sys, spec);
      for (std::size_t d = 1; d <= 5; ++d) {
        const Matrix direct = matrix_power(propagator, target.power_scale * d);
        const Matrix closed = closed_form_power(sys, cf, d, shat);
        const double scale = std::max(two_norm(direct), 1e-30);
        BoundRow row;
        row.degree = d;
        row.middle = two_norm(closed - direct) / scale;
        row.upper = tol;
        row.pass = row.middle <= tol;
        report.rows.push_back(row);
      }
    }
    out.reports.push_back(std::move(report));
  }
  return out;
}

/// Saddle systems: period-two powers of the block-diagonal propagator with
/// exact Schur complement, and the non-convergence flag of the fixed point.
inline VerifyOutcome suite_saddle_periodicity(const VerifyOptions& opt) {
  VerifyOutcome out;
  const std::size_t systems = opt.systems ? opt.systems : 5;
  for (std::size_t s = 0; s < systems; ++s) {
    const std::uint64_t seed = opt.seed + 7 * s;
    const std::size_t n1 = 9, n2 = 6;
    const BlockSystem2x2 sys = saddle_point(n1, n2, seed);

    BoundReport report = check_saddle_periodicity(sys);
    report.problem = detail::problem_tag("saddle", n1, n2, seed);
    report.seed = seed;

    PreconditionerSpec spec;
    spec.family = Family::BlockDiagonal;
    spec.schur_block = SchurBlock::S22;
    spec.schur_kind = SchurApproxKind::ExactSchur;
    const Preconditioner p = build_preconditioner(sys, spec);
    Rng rng(seed ^ 0x5ADDULL);
    KrylovConfig cfg;
    cfg.rel_tol = 1e-10;
    cfg.max_iter = 200;
    const SolveResult res =
        fixed_point(sys.assemble(), p, rng.normal_vector(sys.size()), Vector(sys.size()), cfg);
    BoundRow row;
    row.degree = 200;
    row.middle = res.history.relative(res.history.residual_norms.size() - 1);
    row.pass = !res.history.converged;
    report.rows.push_back(row);
    report.spec = spec.to_string();
    out.reports.push_back(std::move(report));
  }
  return out;
}

/// Per-residual GMRES chains for block-LDU preconditioning, all four
/// side/block combinations.
inline VerifyOutcome suite_ldu_gmres(const VerifyOptions& opt) {
  VerifyOutcome out;
  const std::size_t systems = opt.systems ? opt.systems : 10;
  const auto degrees = detail::degree_range(1, 15);
  for (std::size_t s = 0; s < systems; ++s) {
    const std::uint64_t seed = opt.seed + 13 * s;
    const std::size_t n1 = 18 + s % 3, n2 = 18 + s % 2;
    BlockSystem2x2 sys = random_block(n1, n2, seed);
    const Matrix shat11 = perturbed_schur(sys, SchurBlock::S11, 0.4, seed);
    const Matrix shat22 = perturbed_schur(sys, SchurBlock::S22, 0.4, seed + 1000);
    Rng rng(seed ^ 0x1D0ULL);
    for (std::size_t r = 0; r < opt.residuals; ++r) {
      const BlockVector res{rng.normal_vector(n1), rng.normal_vector(n2)};
      for (Side side : {Side::Left, Side::Right}) {
        for (SchurBlock block : {SchurBlock::S11, SchurBlock::S22}) {
          BoundReport report = check_ldu_gmres(
              sys, block == SchurBlock::S11 ? shat11 : shat22, res, side, block, degrees);
          report.problem = detail::problem_tag("random", n1, n2, seed);
          report.spec = std::string("LDU:") + (block == SchurBlock::S11 ? "11" : "22") +
                        ":user=perturbed(eta=0.4)";
          report.seed = seed;
          out.reports.push_back(std::move(report));
        }
      }
    }
  }
  return out;
}

/// CG chains for block-LDU preconditioning on SPD systems, both blocks.
inline VerifyOutcome suite_ldu_cg(const VerifyOptions& opt) {
  VerifyOutcome out;
  const std::size_t systems = opt.systems ? opt.systems : 10;
  const auto degrees = detail::degree_range(1, 8);
  for (std::size_t s = 0; s < systems; ++s) {
    const std::uint64_t seed = opt.seed + 11 * s;
    const std::size_t n1 = 10, n2 = 10;
    BlockSystem2x2 sys = spd_block(n1, n2, seed);
    Rng rng(seed ^ 0xC6ULL);
    for (std::size_t r = 0; r < opt.residuals; ++r) {
      const BlockVector e{rng.normal_vector(n1), rng.normal_vector(n2)};
      for (SchurBlock block : {SchurBlock::S11, SchurBlock::S22}) {
        const Matrix shat = spd_perturbed_schur(sys, block, 0.3, seed + (block == SchurBlock::S11 ? 0 : 500));
        BoundReport report = check_ldu_cg(sys, shat, e, block, degrees);
        report.problem = detail::problem_tag("spd", n1, n2, seed);
        report.spec = std::string("LDU:") + (block == SchurBlock::S11 ? "11" : "22") +
                      ":user=spd-perturbed(eta=0.3)";
        report.seed = seed;
        out.reports.push_back(std::move(report));
      }
    }
  }
  return out;
}

/// Per-residual chains for left block-triangular preconditioning.
inline VerifyOutcome suite_left_triangular(const VerifyOptions& opt) {
  VerifyOutcome out;
  const std::size_t systems = opt.systems ? opt.systems : 10;
  const auto degrees = detail::degree_range(1, 15);
  for (std::size_t s = 0; s < systems; ++s) {
    const std::uint64_t seed = opt.seed + 29 * s;
    const std::size_t n1 = 18 + s % 3, n2 = 18 + s % 2;
    BlockSystem2x2 sys = random_block(n1, n2, seed);
    const Matrix shat11 = perturbed_schur(sys, SchurBlock::S11, 0.4, seed);
    const Matrix shat22 = perturbed_schur(sys, SchurBlock::S22, 0.4, seed + 1000);
    Rng rng(seed ^ 0x7717ULL);
    for (std::size_t r = 0; r < opt.residuals; ++r) {
      const BlockVector res{rng.normal_vector(n1), rng.normal_vector(n2)};
      for (SchurBlock block : {SchurBlock::S11, SchurBlock::S22}) {
        BoundReport report = check_left_triangular_gmres(
            sys, block == SchurBlock::S11 ? shat11 : shat22, res, block, degrees);
        report.problem = detail::problem_tag("random", n1, n2, seed);
        report.spec = std::string(block == SchurBlock::S11 ? "UT:11" : "LT:22") +
                      ":user=perturbed(eta=0.4)";
        report.seed = seed;
        out.reports.push_back(std::move(report));
      }
    }
  }
  return out;
}

/// Per-residual upper bounds for right block-triangular preconditioning,
/// plus the estimated norm-level chain at low degrees.
inline VerifyOutcome suite_right_triangular(const VerifyOptions& opt) {
  VerifyOutcome out;
  const std::size_t systems = opt.systems ? opt.systems : 10;
  const auto degrees = detail::degree_range(1, 15);
  for (std::size_t s = 0; s < systems; ++s) {
    const std::uint64_t seed = opt.seed + 37 * s;
    const std::size_t n1 = 18 + s % 3, n2 = 18 + s % 2;
    BlockSystem2x2 sys = random_block(n1, n2, seed);
    const Matrix shat11 = perturbed_schur(sys, SchurBlock::S11, 0.4, seed);
    const Matrix shat22 = perturbed_schur(sys, SchurBlock::S22, 0.4, seed + 1000);
    Rng rng(seed ^ 0x4277ULL);
    for (std::size_t r = 0; r < opt.residuals; ++r) {
      const BlockVector res{rng.normal_vector(n1), rng.normal_vector(n2)};
      for (SchurBlock block : {SchurBlock::S11, SchurBlock::S22}) {
        BoundReport report = check_right_triangular_gmres(
            sys, block == SchurBlock::S11 ? shat11 : shat22, res, block, degrees);
        report.problem = detail::problem_tag("random", n1, n2, seed);
        report.spec = std::string(block == SchurBlock::S11 ? "LT:11" : "UT:22") +
                      ":user=perturbed(eta=0.4)";
        report.seed = seed;
        out.reports.push_back(std::move(report));
      }
    }
    BoundReport norm_level = check_right_triangular_norm_level(
        sys, shat11, SchurBlock::S11, detail::degree_range(1, 3),
        std::max<std::size_t>(opt.samples / 4, 30), seed ^ 0x9DULL);
    norm_level.problem = detail::problem_tag("random", n1, n2, seed);
    norm_level.spec = "LT:11:user=perturbed(eta=0.4)";
    out.reports.push_back(std::move(norm_level));
  }
  return out;
}

/// Estimated ideal-norm chains for block-Jacobi preconditioning.
inline VerifyOutcome suite_jacobi_ideal(const VerifyOptions& opt) {
  VerifyOutcome out;
  const std::size_t systems = opt.systems ? opt.systems : 10;
  const auto degrees = detail::degree_range(1, 4);
  for (std::size_t s = 0; s < systems; ++s) {
    const std::uint64_t seed = opt.seed + 41 * s;
    const std::size_t n1 = 8, n2 = 8;
    BlockSystem2x2 sys = random_block(n1, n2, seed);
    BoundReport report =
        check_jacobi_ideal_gmres(sys, Side::Left, degrees, opt.samples, seed ^ 0x3A5ULL);
    report.problem = detail::problem_tag("random", n1, n2, seed);
    report.spec = "BD:jacobi";
    out.reports.push_back(std::move(report));
  }
  return out;
}

// --- dispatcher --------------------------------------------------------------

inline VerifyOutcome run_verify_suite(const VerifyOptions& opt) {
  auto merge = [](VerifyOutcome& into, VerifyOutcome part) {
    for (auto& r : part.reports) into.reports.push_back(std::move(r));
  };
  VerifyOutcome out;
  const std::string& s = opt.suite;
  const bool all = s == "all";
  if (all || s == "prop21") merge(out, suite_fixed_point_two_step(opt));
  else if (s.empty()) throw std::invalid_argument("verify: empty suite name");
  if (all || s == "prop22") merge(out, suite_similarity(opt));
  if (all || s == "closedforms") merge(out, suite_closed_forms(opt));
  if (all || s == "remark23") merge(out, suite_saddle_periodicity(opt));
  if (all || s == "thm31") merge(out, suite_ldu_gmres(opt));
  if (all || s == "thm32") merge(out, suite_ldu_cg(opt));
  if (all || s == "thm33") merge(out, suite_left_triangular(opt));
  if (all || s == "thm34") merge(out, suite_right_triangular(opt));
  if (all || s == "thm35") merge(out, suite_jacobi_ideal(opt));
  if (out.reports.empty())
    throw std::invalid_argument("verify: unknown suite '" + s + "'");
  return out;
}

}  // namespace blockkrylov
