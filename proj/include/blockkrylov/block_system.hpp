#pragma once

// The 2x2 block system [A11 A12; A21 A22]: conformal blocks, Schur
// complements, and exact inverse actions of the diagonal blocks. Systems are
// immutable after construction; LU factors of A11/A22 are computed once under
// std::call_once and shared between copies, so concurrent reads are safe.

#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>

#include "blockkrylov/dense/lu.hpp"
#include "blockkrylov/dense/matrix.hpp"
#include "blockkrylov/dense/matrix_market.hpp"

namespace blockkrylov {

enum class SchurBlock { S11, S22 };

enum class BlockSel { A11Inv, A22Inv, A11, A22, A12, A21 };

struct BlockVector {
  Vector part1;
  Vector part2;

  Vector stacked() const {
    Vector v(part1.size() + part2.size());
    for (std::size_t i = 0; i < part1.size(); ++i) v[i] = part1[i];
    for (std::size_t i = 0; i < part2.size(); ++i) v[part1.size() + i] = part2[i];
    return v;
  }
};

class BlockSystem2x2 {
 public:
  BlockSystem2x2(Matrix a11, Matrix a12, Matrix a21, Matrix a22)
      : a11_(std::move(a11)),
        a12_(std::move(a12)),
        a21_(std::move(a21)),
        a22_(std::move(a22)),
        cache_(std::make_shared<Cache>()) {
    detail::require(a11_.square(), "BlockSystem2x2: A11 not square");
    detail::require(a22_.square(), "BlockSystem2x2: A22 not square");
    detail::require(a12_.rows() == a11_.rows() && a12_.cols() == a22_.cols(),
                    "BlockSystem2x2: A12 not conformal");
    detail::require(a21_.rows() == a22_.rows() && a21_.cols() == a11_.cols(),
                    "BlockSystem2x2: A21 not conformal");
  }

  std::size_t n1() const { return a11_.rows(); }
  std::size_t n2() const { return a22_.rows(); }
  std::size_t size() const { return n1() + n2(); }

  const Matrix& a11() const { return a11_; }
  const Matrix& a12() const { return a12_; }
  const Matrix& a21() const { return a21_; }
  const Matrix& a22() const { return a22_; }

  const LuFactors& a11_lu() const {
    std::call_once(cache_->once11, [&] { cache_->lu11 = lu_factor(a11_); });
    return *cache_->lu11;
  }
  const LuFactors& a22_lu() const {
    std::call_once(cache_->once22, [&] { cache_->lu22 = lu_factor(a22_); });
    return *cache_->lu22;
  }

  Matrix assemble() const {
    Matrix a(size(), size());
    for (std::size_t i = 0; i < n1(); ++i) {
      for (std::size_t j = 0; j < n1(); ++j) a(i, j) = a11_(i, j);
      for (std::size_t j = 0; j < n2(); ++j) a(i, n1() + j) = a12_(i, j);
    }
    for (std::size_t i = 0; i < n2(); ++i) {
      for (std::size_t j = 0; j < n1(); ++j) a(n1() + i, j) = a21_(i, j);
      for (std::size_t j = 0; j < n2(); ++j) a(n1() + i, n1() + j) = a22_(i, j);
    }
    return a;
  }

  /// S11 = A11 - A12 A22^{-1} A21,  S22 = A22 - A21 A11^{-1} A12.
  /// The complementary diagonal block must be nonsingular.
  Matrix schur_complement(SchurBlock which) const {
    if (which == SchurBlock::S11) {
      Matrix x = a22_lu().solve_matrix(a21_);  // A22^{-1} A21
      return a11_ - matmul(a12_, x);
    }
    Matrix x = a11_lu().solve_matrix(a12_);  // A11^{-1} A12
    return a22_ - matmul(a21_, x);
  }

  Vector apply_block(BlockSel sel, const Vector& v) const {
    switch (sel) {
      case BlockSel::A11Inv:
        return a11_lu().solve(v);
      case BlockSel::A22Inv:
        return a22_lu().solve(v);
      case BlockSel::A11:
        return a11_.apply(v);
      case BlockSel::A22:
        return a22_.apply(v);
      case BlockSel::A12:
        return a12_.apply(v);
      case BlockSel::A21:
        return a21_.apply(v);
    }
    throw std::logic_error("apply_block: bad selector");
  }

  BlockVector split(const Vector& v) const {
    detail::require(v.size() == size(), "BlockSystem2x2::split: size mismatch");
    BlockVector out{Vector(n1()), Vector(n2())};
    for (std::size_t i = 0; i < n1(); ++i) out.part1[i] = v[i];
    for (std::size_t i = 0; i < n2(); ++i) out.part2[i] = v[n1() + i];
    return out;
  }

  Vector apply(const Vector& v) const {
    detail::require(v.size() == size(), "BlockSystem2x2::apply: size mismatch");
    const BlockVector p = split(v);
    Vector y1 = a11_.apply(p.part1) + a12_.apply(p.part2);
    Vector y2 = a21_.apply(p.part1) + a22_.apply(p.part2);
    return BlockVector{std::move(y1), std::move(y2)}.stacked();
  }
  std::size_t rows() const { return size(); }
  std::size_t cols() const { return size(); }

 private:
  struct Cache {
    std::once_flag once11, once22;
    std::optional<LuFactors> lu11, lu22;
  };

  Matrix a11_, a12_, a21_, a22_;
  std::shared_ptr<Cache> cache_;
};

/// Load from four files <stem>.a11.mtx, <stem>.a12.mtx, <stem>.a21.mtx,
/// <stem>.a22.mtx.
inline BlockSystem2x2 load_block_system(const std::string& stem) {
  return BlockSystem2x2(read_matrix_market(stem + ".a11.mtx"),
                        read_matrix_market(stem + ".a12.mtx"),
                        read_matrix_market(stem + ".a21.mtx"),
                        read_matrix_market(stem + ".a22.mtx"));
}

inline void dump_block_system(const std::string& stem, const BlockSystem2x2& sys) {
  write_matrix_market(stem + ".a11.mtx", sys.a11());
  write_matrix_market(stem + ".a12.mtx", sys.a12());
  write_matrix_market(stem + ".a21.mtx", sys.a21());
  write_matrix_market(stem + ".a22.mtx", sys.a22());
}

/// Split a monolithic matrix at row/column n1.
inline BlockSystem2x2 split_monolithic(const Matrix& a, std::size_t n1) {
  detail::require(a.square(), "split_monolithic: matrix not square");
  detail::require(n1 >= 1 && n1 < a.rows(), "split_monolithic: split index out of range");
  const std::size_t n2 = a.rows() - n1;
  Matrix a11(n1, n1), a12(n1, n2), a21(n2, n1), a22(n2, n2);
  for (std::size_t i = 0; i < n1; ++i) {
    for (std::size_t j = 0; j < n1; ++j) a11(i, j) = a(i, j);
    for (std::size_t j = 0; j < n2; ++j) a12(i, j) = a(i, n1 + j);
  }
  for (std::size_t i = 0; i < n2; ++i) {
    for (std::size_t j = 0; j < n1; ++j) a21(i, j) = a(n1 + i, j);
    for (std::size_t j = 0; j < n2; ++j) a22(i, j) = a(n1 + i, n1 + j);
  }
  return BlockSystem2x2(std::move(a11), std::move(a12), std::move(a21), std::move(a22));
}

}  // namespace blockkrylov
