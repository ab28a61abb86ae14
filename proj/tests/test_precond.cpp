#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "blockkrylov/dense/norms.hpp"
#include "blockkrylov/dense/rng.hpp"
#include "blockkrylov/precond.hpp"
#include "blockkrylov/problems.hpp"
#include "blockkrylov/theory.hpp"

using namespace blockkrylov;

namespace {

Matrix apply_as_matrix(const Preconditioner& p) {
  const std::size_t n = p.rows();
  Matrix m(n, n);
  for (std::size_t j = 0; j < n; ++j) m.set_col(j, p.apply(Vector::unit(n, j)));
  return m;
}

BlockSystem2x2 identity_system(std::size_t n1, std::size_t n2) {
  return BlockSystem2x2(Matrix::identity(n1), Matrix(n1, n2), Matrix(n2, n1),
                        Matrix::identity(n2));
}

const char* kFamilies[] = {"BD", "LT", "UT", "LDU", "ST-I", "ST-II"};

}  // namespace

TEST_CASE("spec string parsing round trips") {
  const PreconditionerSpec lt = PreconditionerSpec::parse("LT:22:exact");
  CHECK(lt.family == Family::LowerTriangular);
  CHECK(lt.schur_block == SchurBlock::S22);
  CHECK(lt.schur_kind == SchurApproxKind::ExactSchur);
  CHECK(lt.inner == InnerSolveKind::Direct);

  const PreconditionerSpec bd = PreconditionerSpec::parse("BD:jacobi");
  CHECK(bd.family == Family::BlockDiagonal);
  CHECK(bd.schur_kind == SchurApproxKind::DiagonalBlock);

  const PreconditionerSpec ldu =
      PreconditionerSpec::parse("LDU:22:user=shat.mtx:inner=1e-4:neg");
  CHECK(ldu.family == Family::BlockLdu);
  CHECK(ldu.schur_kind == SchurApproxKind::UserMatrix);
  CHECK(ldu.user_source == "shat.mtx");
  CHECK(ldu.inner == InnerSolveKind::Iterative);
  CHECK(ldu.inner_rel_tol == doctest::Approx(1e-4));
  CHECK(ldu.negate_schur);
  CHECK(ldu.to_string() == "LDU:22:user=shat.mtx:inner=0.0001:neg");

  CHECK_THROWS_AS(PreconditionerSpec::parse("XX:22"), std::invalid_argument);
  CHECK_THROWS_AS(PreconditionerSpec::parse("LT:22:bogus"), std::invalid_argument);
}

TEST_CASE("identity system: every family applies as the identity") {
  const BlockSystem2x2 sys = identity_system(4, 3);
  Rng rng(1);
  const Vector v = rng.normal_vector(7);
  for (const char* fam : kFamilies) {
    const Preconditioner p =
        build_preconditioner(sys, PreconditionerSpec::parse(std::string(fam) + ":22:jacobi"));
    CHECK(norm2(p.apply(v) - v) <= 1e-14);
  }
}

TEST_CASE("block Jacobi is blkdiag(A11, A22)") {
  const BlockSystem2x2 sys = random_block(5, 4, 31);
  const Preconditioner p = build_preconditioner(sys, PreconditionerSpec::parse("BD:22:jacobi"));
  const Matrix expect =
      lu_inverse(BlockSystem2x2(sys.a11(), Matrix(5, 4), Matrix(4, 5), sys.a22()).assemble());
  CHECK(two_norm(apply_as_matrix(p) - expect) <= 1e-10 * two_norm(expect));
}

TEST_CASE("apply is linear and matches the LU inverse of the assembled matrix") {
  const BlockSystem2x2 sys = random_block(6, 5, 8);
  Rng rng(2);
  for (const char* fam : kFamilies) {
    for (const char* block : {"11", "22"}) {
      const auto spec =
          PreconditionerSpec::parse(std::string(fam) + ":" + block + ":jacobi");
      const Preconditioner p = build_preconditioner(sys, spec);

      const Vector u = rng.normal_vector(11), v = rng.normal_vector(11);
      const Vector lin = p.apply(2.0 * u + -3.0 * v);
      const Vector ref = 2.0 * p.apply(u) + -3.0 * p.apply(v);
      CHECK(norm2(lin - ref) <= 1e-10 * std::max(norm2(ref), 1.0));

      const Matrix explicit_inv = lu_inverse(assemble_preconditioner_matrix(sys, spec));
      CHECK(two_norm(apply_as_matrix(p) - explicit_inv) <= 1e-9 * two_norm(explicit_inv));
    }
  }
}

TEST_CASE("lower triangular apply matches assembled-P LU oracle on random vectors") {
  const BlockSystem2x2 sys = random_block(7, 5, 12);
  const auto spec = PreconditionerSpec::parse("LT:22:exact");
  const Preconditioner p = build_preconditioner(sys, spec);
  const LuFactors plu = lu_factor(assemble_preconditioner_matrix(sys, spec));
  Rng rng(3);
  for (int k = 0; k < 5; ++k) {
    const Vector v = rng.normal_vector(12);
    const Vector ref = plu.solve(v);
    CHECK(norm2(p.apply(v) - ref) <= 1e-10 * norm2(ref));
  }
}

TEST_CASE("negated Schur flips exactly the Schur part of the block-diagonal apply") {
  const BlockSystem2x2 sys = random_block(5, 4, 9);
  const Preconditioner plain = build_preconditioner(sys, PreconditionerSpec::parse("BD:22:jacobi"));
  const Preconditioner neg =
      build_preconditioner(sys, PreconditionerSpec::parse("BD:22:jacobi:neg"));
  Rng rng(4);
  const Vector v = rng.normal_vector(9);
  const Vector a = plain.apply(v), b = neg.apply(v);
  for (std::size_t i = 0; i < 5; ++i) CHECK(b[i] == doctest::Approx(a[i]));
  for (std::size_t i = 5; i < 9; ++i) CHECK(b[i] == doctest::Approx(-a[i]));
}

TEST_CASE("symmetric sweeps pair with the block-LDU variants when Shat = diagonal block") {
  // orientation pinned on the scalar system a11=2, a12=a21=1, a22=2:
  //   lower-then-upper sweep inverse = [[0.625,-0.25],[-0.25,0.5]]
  //   upper-then-lower sweep inverse = [[0.5,-0.25],[-0.25,0.625]]
  const BlockSystem2x2 scalar(Matrix{{2}}, Matrix{{1}}, Matrix{{1}}, Matrix{{2}});
  const Matrix g = apply_as_matrix(
      build_preconditioner(scalar, PreconditionerSpec::parse("ST-I:22:jacobi")));
  CHECK(g(0, 0) == doctest::Approx(0.625));
  CHECK(g(0, 1) == doctest::Approx(-0.25));
  CHECK(g(1, 0) == doctest::Approx(-0.25));
  CHECK(g(1, 1) == doctest::Approx(0.5));
  const Matrix h = apply_as_matrix(
      build_preconditioner(scalar, PreconditionerSpec::parse("ST-II:22:jacobi")));
  CHECK(h(0, 0) == doctest::Approx(0.5));
  CHECK(h(1, 1) == doctest::Approx(0.625));

  // lower-then-upper coincides with LDU carrying the approximation in the
  // (2,2) block; upper-then-lower with the (1,1)-block variant
  const BlockSystem2x2 sys = random_block(6, 4, 21);
  Rng rng(5);
  const Preconditioner st1 =
      build_preconditioner(sys, PreconditionerSpec::parse("ST-I:22:jacobi"));
  const Preconditioner ldu22 =
      build_preconditioner(sys, PreconditionerSpec::parse("LDU:22:jacobi"));
  const Preconditioner st2 =
      build_preconditioner(sys, PreconditionerSpec::parse("ST-II:22:jacobi"));
  const Preconditioner ldu11 =
      build_preconditioner(sys, PreconditionerSpec::parse("LDU:11:jacobi"));
  for (int k = 0; k < 5; ++k) {
    const Vector v = rng.normal_vector(10);
    CHECK(norm2(st1.apply(v) - ldu22.apply(v)) <= 1e-10 * norm2(ldu22.apply(v)));
    CHECK(norm2(st2.apply(v) - ldu11.apply(v)) <= 1e-10 * norm2(ldu11.apply(v)));
  }
}

TEST_CASE("symmetric sweep error propagators factor into the two triangular sweeps") {
  const BlockSystem2x2 sys = random_block(6, 5, 33);
  const Matrix shat = perturbed_schur(sys, SchurBlock::S22, 0.3, 77);
  auto user = [&](const char* fam) {
    PreconditionerSpec s = PreconditionerSpec::parse(std::string(fam) + ":22");
    s.schur_kind = SchurApproxKind::UserMatrix;
    s.user_matrix = shat;
    return s;
  };
  const Matrix el = error_propagator(sys, user("LT"));
  const Matrix eu = error_propagator(sys, user("UT"));
  const Matrix eg = error_propagator(sys, user("ST-I"));
  const Matrix eh = error_propagator(sys, user("ST-II"));
  CHECK(two_norm(eg - matmul(eu, el)) <= 1e-10 * std::max(two_norm(eg), 1.0));
  CHECK(two_norm(eh - matmul(el, eu)) <= 1e-10 * std::max(two_norm(eh), 1.0));
}

TEST_CASE("error propagator vanishes for the exact factorization preconditioner") {
  const BlockSystem2x2 sys = random_block(6, 4, 41);
  const Matrix e = error_propagator(sys, PreconditionerSpec::parse("LDU:22:exact"));
  CHECK(two_norm(e) <= 1e-10);
}

TEST_CASE("error propagators match the degree-one closed forms") {
  const BlockSystem2x2 sys = random_block(6, 5, 51);
  const Matrix shat11 = perturbed_schur(sys, SchurBlock::S11, 0.3, 5);
  PreconditionerSpec ut11 = PreconditionerSpec::parse("UT:11");
  ut11.schur_kind = SchurApproxKind::UserMatrix;
  ut11.user_matrix = shat11;
  const Matrix e = error_propagator(sys, ut11);
  const Matrix closed = closed_form_power(sys, ClosedForm::U11Left, 1, shat11);
  CHECK(two_norm(e - closed) <= 1e-9 * std::max(two_norm(closed), 1.0));

  const Matrix ebd = error_propagator(sys, PreconditionerSpec::parse("BD:22:jacobi"));
  const Matrix jac = closed_form_power(sys, ClosedForm::JacobiEvenLeft, 1, shat11);
  CHECK(two_norm(matmul(ebd, ebd) - jac) <= 1e-10 * std::max(two_norm(jac), 1.0));
}

TEST_CASE("iterative inner solves hitting the cap are flagged degraded, not raised") {
  const BlockSystem2x2 sys = random_block(12, 6, 61);
  PreconditionerSpec spec = PreconditionerSpec::parse("LT:22:exact:inner=1e-13,2");
  const Preconditioner p = build_preconditioner(sys, spec);
  Rng rng(6);
  const Vector v = rng.normal_vector(18);
  CHECK(p.degraded_count() == 0);
  (void)p.apply(v);
  CHECK(p.degraded_count() > 0);
}

TEST_CASE("build rejects unresolved or ill-sized user matrices") {
  const BlockSystem2x2 sys = random_block(5, 4, 71);
  PreconditionerSpec spec = PreconditionerSpec::parse("LDU:22:user=missing.mtx");
  CHECK_THROWS_AS(build_preconditioner(sys, spec), std::invalid_argument);
  spec.user_matrix = Matrix::identity(3);  // wrong size for the (2,2) block
  CHECK_THROWS_AS(build_preconditioner(sys, spec), DimensionError);
}
