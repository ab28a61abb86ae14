#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "blockkrylov/dense/norms.hpp"
#include "blockkrylov/experiments.hpp"
#include "blockkrylov/problems.hpp"

using namespace blockkrylov;

namespace {

// attempted Cholesky; succeeds iff the symmetric matrix is positive definite
bool spd_check(const Matrix& a) {
  const std::size_t n = a.rows();
  Matrix l(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      if (i == j) {
        if (s <= 0.0) return false;
        l(i, i) = std::sqrt(s);
      } else {
        l(i, j) = s / l(j, j);
      }
    }
  }
  return true;
}

}  // namespace

TEST_CASE("tridiagonal pair matches its stated stencils and rhs") {
  const Problem a1 = example11_a1();
  const Problem a2 = example11_a2();
  REQUIRE(a1.size() == 1000);
  const Matrix m1 = a1.matrix();
  for (std::size_t i = 0; i < 500; ++i) {
    CHECK(m1(i, i) == 1.0);
    for (std::size_t j = 0; j < 1000; ++j)
      if (i != j) CHECK(m1(i, j) == 0.0);
  }
  CHECK(m1(500, 500) == 2.0);
  CHECK(m1(500, 501) == -1.0);
  CHECK(m1(999, 998) == -1.0);
  CHECK(a2.matrix()(500, 500) == 2.0025);
  CHECK(a1.rhs[0] == doctest::Approx(0.001));
  CHECK(a1.rhs[999] == doctest::Approx(1.0));
}

TEST_CASE("nilpotent shift: GMRES residual profile follows the exact Krylov argument") {
  // For A = I - N with b = e1, the degree-d minimizing polynomial leaves
  // residual 1/sqrt(d+1): the minimizer spreads the unit jump across the
  // d+1 free increments of the shift chain. Exact convergence happens at
  // iteration n, the nilpotency degree.
  const std::size_t n = 30;
  const Problem p = nilpotent_shift(n);
  KrylovConfig cfg;
  cfg.rel_tol = 1e-13;
  cfg.max_iter = n + 2;
  const SolveResult res = gmres(*p.monolithic, p.rhs, Vector(n), cfg);
  REQUIRE(res.history.residual_norms.size() >= n + 1);
  for (std::size_t d = 0; d < n; ++d)
    CHECK(res.history.residual_norms[d] ==
          doctest::Approx(1.0 / std::sqrt(static_cast<double>(d + 1))).epsilon(1e-9));
  CHECK(res.history.residual_norms[n] <= 1e-12);
  CHECK(res.history.converged);
}

TEST_CASE("nilpotent shift: Richardson stalls at exactly one until the nilpotency degree") {
  const std::size_t n = 30;
  const Problem p = nilpotent_shift(n);
  KrylovConfig cfg;
  cfg.rel_tol = 1e-13;
  cfg.max_iter = n + 2;
  const detail::IdentityPrecond ident{n};
  const SolveResult res = fixed_point(*p.monolithic, ident, p.rhs, Vector(n), cfg);
  for (std::size_t k = 0; k < n; ++k) CHECK(res.history.residual_norms[k] == 1.0);
  CHECK(res.history.residual_norms[n] == 0.0);
}

TEST_CASE("generators are bit-reproducible") {
  const BlockSystem2x2 a = random_block(7, 5, 42);
  const BlockSystem2x2 b = random_block(7, 5, 42);
  CHECK(a.assemble().entries() == b.assemble().entries());
  const BlockSystem2x2 c = random_block(7, 5, 43);
  CHECK(a.assemble().entries() != c.assemble().entries());

  const Problem o1 = oseen_fd({.m = 6});
  const Problem o2 = oseen_fd({.m = 6});
  CHECK(o1.matrix().entries() == o2.matrix().entries());
  CHECK(o1.rhs.entries() == o2.rhs.entries());
}

TEST_CASE("saddle systems have a zero (2,2) block and full-rank coupling") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const BlockSystem2x2 sys = saddle_point(8, 5, seed);
    for (double v : sys.a22().entries()) CHECK(v == 0.0);
    // full column rank of A12 (= A21^T): Gram matrix nonsingular
    const Matrix gram = matmul(sys.a21(), sys.a12());
    CHECK(!is_singular(gram));
    CHECK(!is_singular(sys.schur_complement(SchurBlock::S22)));
  }
}

TEST_CASE("spd systems pass an attempted symmetric factorization") {
  for (std::uint64_t seed : {4u, 5u}) {
    const BlockSystem2x2 sys = spd_block(7, 6, seed);
    const Matrix a = sys.assemble();
    CHECK(spd_check(a));
    CHECK(two_norm(a - a.transpose()) <= 1e-12 * two_norm(a));
    CHECK(spd_check(sys.schur_complement(SchurBlock::S22)));
  }
}

TEST_CASE("oseen generator invariants") {
  const OseenConfig cfg{.m = 8, .nu = 1e-2, .eps = 1e-2, .wind = Wind::Constant};
  const Problem p = oseen_fd(cfg);
  const BlockSystem2x2& sys = *p.system;
  CHECK(sys.n1() == 2 * 8 * 8);
  CHECK(sys.n2() == 8 * 8);

  // A22 = -eps I exactly
  for (std::size_t i = 0; i < sys.n2(); ++i)
    for (std::size_t j = 0; j < sys.n2(); ++j)
      CHECK(sys.a22()(i, j) == (i == j ? -cfg.eps : 0.0));

  // divergence is minus the transposed gradient for interior Dirichlet data
  CHECK(two_norm(sys.a21() + sys.a12().transpose()) <= 1e-12 * two_norm(sys.a21()));

  CHECK(!is_singular(sys.schur_complement(SchurBlock::S22)));
  CHECK(!is_singular(sys.a11()));
}

TEST_CASE("oseen default-size Schur complement is nonsingular") {
  const Problem p = oseen_fd({.m = 24, .nu = 1e-2, .eps = 1e-2});
  CHECK(!is_singular(p.system->schur_complement(SchurBlock::S22)));
}

TEST_CASE("problem spec strings route to the right generators") {
  const Problem r = generate(ProblemSpec::parse("random:n1=6,n2=4,seed=9"));
  CHECK(r.system.has_value());
  CHECK(r.system->n1() == 6);
  const Problem nil = generate(ProblemSpec::parse("nilpotent:n=12,bandwidth=2"));
  CHECK(nil.monolithic.has_value());
  CHECK(nil.size() == 12);
  CHECK_THROWS_AS(generate(ProblemSpec::parse("bogus:n=3")), std::invalid_argument);
  CHECK_THROWS_AS(generate(ProblemSpec::parse("random:whoops=1")), std::invalid_argument);
}

TEST_CASE("oseen with exact Schur and direct solves: triangular converges in <= 3 outer") {
  const OseenStudy study = prepare_oseen_study({.m = 8});
  for (Family fam : {Family::LowerTriangular, Family::UpperTriangular}) {
    const SolveResult res =
        run_oseen(study, oseen_spec(fam, study.schur, 0.0, false), 1e-8, 10);
    CHECK(res.history.converged);
    CHECK(res.history.iterations <= 3);
  }
}

TEST_CASE("recirculating wind produces a valid, distinct system") {
  const Problem recirc = oseen_fd({.m = 6, .wind = Wind::Recirculating});
  const Problem constant = oseen_fd({.m = 6, .wind = Wind::Constant});
  CHECK(!is_singular(recirc.system->a11()));
  CHECK(!is_singular(recirc.system->schur_complement(SchurBlock::S22)));
  CHECK(recirc.system->a11().entries() != constant.system->a11().entries());
}

TEST_CASE("fgmres outer iterations rise monotonically as inner solves loosen") {
  const OseenStudy study = prepare_oseen_study({.m = 8});
  const std::vector<double> tols{1e-10, 1e-4, 1e-1};
  std::vector<std::size_t> iters;
  for (double tol : tols) {
    const SolveResult res = run_oseen(
        study, oseen_spec(Family::LowerTriangular, study.schur_approx, tol, false), 1e-8, 400);
    CHECK(res.history.converged);
    iters.push_back(res.history.iterations);
  }
  CHECK(iters.front() <= iters.back());
  // loosest tolerance should cost at least as much as the tightest
  CHECK(iters[0] <= iters[2]);
}

TEST_CASE("conditioning knob controls diagonal-block conditioning") {
  const BlockSystem2x2 mild = random_block(8, 6, 5, 10.0);
  const BlockSystem2x2 harsh = random_block(8, 6, 5, 1e6);
  const double cond_mild = two_norm(mild.a11()) * two_norm(lu_inverse(mild.a11()));
  const double cond_harsh = two_norm(harsh.a11()) * two_norm(lu_inverse(harsh.a11()));
  CHECK(cond_mild < 100.0);
  CHECK(cond_harsh > 1e4);
}
