#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "blockkrylov/dense/lu.hpp"
#include "blockkrylov/dense/matrix.hpp"
#include "blockkrylov/dense/matrix_market.hpp"
#include "blockkrylov/dense/norms.hpp"
#include "blockkrylov/dense/rng.hpp"

using namespace blockkrylov;

namespace {

// independent triple-loop product, kept deliberately naive
Matrix matmul_oracle(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

// one-sided Jacobi SVD: orthogonalize column pairs until converged, singular
// values are the resulting column norms
double largest_singular_value_jacobi(Matrix a) {
  const std::size_t n = a.cols();
  for (int sweep = 0; sweep < 60; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double app = 0.0, aqq = 0.0, apq = 0.0;
        for (std::size_t i = 0; i < a.rows(); ++i) {
          app += a(i, p) * a(i, p);
          aqq += a(i, q) * a(i, q);
          apq += a(i, p) * a(i, q);
        }
        off = std::max(off, std::abs(apq) / std::sqrt(app * aqq + 1e-300));
        if (std::abs(apq) < 1e-15 * std::sqrt(app * aqq + 1e-300)) continue;
        const double tau = (aqq - app) / (2.0 * apq);
        const double t = (tau >= 0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < a.rows(); ++i) {
          const double aip = a(i, p), aiq = a(i, q);
          a(i, p) = c * aip - s * aiq;
          a(i, q) = s * aip + c * aiq;
        }
      }
    }
    if (off < 1e-14) break;
  }
  double best = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    double col = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) col += a(i, j) * a(i, j);
    best = std::max(best, std::sqrt(col));
  }
  return best;
}

}  // namespace

TEST_CASE("matmul identity and hand cases") {
  Rng rng(1);
  const Matrix m = rng.normal_matrix(3, 3);
  const Matrix im = matmul(Matrix::identity(3), m);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) CHECK(im(i, j) == m(i, j));

  const Matrix a{{1, 2}, {3, 4}};
  const Matrix p{{0, 1}, {1, 0}};
  const Matrix ap = matmul(a, p);
  CHECK(ap(0, 0) == 2);
  CHECK(ap(0, 1) == 1);
  CHECK(ap(1, 0) == 4);
  CHECK(ap(1, 1) == 3);
}

TEST_CASE("matmul matches triple-loop oracle") {
  Rng rng(7);
  const Matrix a = rng.normal_matrix(7, 5);
  const Matrix b = rng.normal_matrix(5, 3);
  const Matrix c = matmul(a, b);
  const Matrix ref = matmul_oracle(a, b);
  for (std::size_t i = 0; i < c.rows(); ++i)
    for (std::size_t j = 0; j < c.cols(); ++j)
      CHECK(c(i, j) == doctest::Approx(ref(i, j)).epsilon(1e-14));
  CHECK_THROWS_AS(matmul(a, a), DimensionError);
}

TEST_CASE("lu solves identity and hand 2x2") {
  const Vector b{1, 2, 3, 4};
  const Vector x = lu_solve(Matrix::identity(4), b);
  for (std::size_t i = 0; i < 4; ++i) CHECK(x[i] == doctest::Approx(b[i]));

  const Matrix a{{2, 1}, {1, 3}};
  const Vector x2 = lu_solve(a, Vector{3, 4});
  CHECK(x2[0] == doctest::Approx(1.0));
  CHECK(x2[1] == doctest::Approx(1.0));
}

TEST_CASE("lu residual on diagonally dominant 20x20") {
  Rng rng(11);
  Matrix a = rng.normal_matrix(20, 20);
  for (std::size_t i = 0; i < 20; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < 20; ++j) row += std::abs(a(i, j));
    a(i, i) += row;
  }
  const Vector b = rng.normal_vector(20);
  const Vector x = lu_solve(a, b);
  CHECK(norm2(a.apply(x) - b) <= 1e-12 * norm2(b));
}

TEST_CASE("lu round trip within 1e-10 on random well-conditioned inputs") {
  for (std::uint64_t seed : {3u, 5u, 9u}) {
    Rng rng(seed);
    Matrix a = rng.normal_matrix(15, 15);
    a += 6.0 * Matrix::identity(15);
    const Vector b = rng.normal_vector(15);
    const Vector x = lu_factor(a).solve(b);
    CHECK(norm2(a.apply(x) - b) <= 1e-10 * norm2(b));
  }
}

TEST_CASE("lu flags singularity") {
  Matrix a{{1, 2}, {2, 4}};
  CHECK_THROWS_AS(lu_factor(a), SingularMatrixError);
  CHECK(is_singular(a));
}

TEST_CASE("two_norm on identity and diagonal") {
  CHECK(two_norm(Matrix::identity(5)) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(two_norm(Matrix::diagonal(Vector{3, 4})) == doctest::Approx(4.0).epsilon(1e-10));
  CHECK(two_norm(Matrix(4, 4)) == 0.0);
}

TEST_CASE("two_norm matches one-sided Jacobi SVD") {
  Rng rng(21);
  const Matrix a = rng.normal_matrix(10, 10);
  const double ref = largest_singular_value_jacobi(a);
  CHECK(two_norm(a) == doctest::Approx(ref).epsilon(1e-8));
}

TEST_CASE("two_norm is submultiplicative on random pairs") {
  Rng rng(33);
  for (int k = 0; k < 5; ++k) {
    const Matrix a = rng.normal_matrix(8, 8);
    const Matrix b = rng.normal_matrix(8, 8);
    CHECK(two_norm(matmul(a, b)) <= 1.0000001 * two_norm(a) * two_norm(b));
  }
}

TEST_CASE("two_norm dominates sampled sup over unit vectors") {
  Rng rng(44);
  const Matrix a = rng.normal_matrix(9, 9);
  const double op = two_norm(a);
  double sampled = 0.0;
  for (int k = 0; k < 100; ++k) {
    Vector v = rng.normal_vector(9);
    v *= 1.0 / norm2(v);
    sampled = std::max(sampled, norm2(a.apply(v)));
  }
  CHECK(sampled <= op * (1.0 + 1e-9));
}

TEST_CASE("vector p-norms") {
  CHECK(vec_norm(Vector{3, 4}, NormKind::Two) == doctest::Approx(5.0));
  CHECK(vec_norm(Vector{1, -2, 3}, NormKind::Inf) == doctest::Approx(3.0));
  CHECK(vec_norm(Vector{1, -2, 3}, NormKind::One) == doctest::Approx(6.0));
}

TEST_CASE("constructors reject non-finite entries") {
  CHECK_THROWS_AS(Vector({1.0, std::nan("")}), NonFiniteError);
  std::vector<double> bad{1.0, 2.0, std::numeric_limits<double>::infinity(), 4.0};
  CHECK_THROWS_AS(Matrix(2, 2, bad), NonFiniteError);
}

TEST_CASE("matrix market round trips array and coordinate formats") {
  Rng rng(55);
  const Matrix a = rng.normal_matrix(4, 3);

  std::stringstream array_io;
  write_matrix_market(array_io, a);
  const std::string text = array_io.str();
  CHECK(text.rfind("%%MatrixMarket matrix array real general\n", 0) == 0);
  const Matrix back = read_matrix_market(array_io);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 3; ++j) CHECK(back(i, j) == a(i, j));

  std::stringstream coord_io;
  write_matrix_market_coordinate(coord_io, a);
  const Matrix back2 = read_matrix_market(coord_io);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 3; ++j) CHECK(back2(i, j) == a(i, j));
}

TEST_CASE("rng streams are reproducible") {
  Rng a(123), b(123);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng c(123), d(124);
  CHECK(c.next_u64() != d.next_u64());
}
