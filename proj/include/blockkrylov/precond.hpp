#pragma once

// Block preconditioners for the 2x2 system: block-diagonal, block lower/upper
// triangular, approximate block-LDU, and the two symmetric block-triangular
// sweeps (lower-then-upper and upper-then-lower). One diagonal block carries a
// Schur-complement approximation (the diagonal block itself, the exact Schur
// complement, or a user matrix); the other diagonal block is solved either by
// LU or by an inner unpreconditioned GMRES to a relative tolerance. An
// optional sign flip applies to the Schur-approximation solve only.

#include <atomic>
#include <cctype>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>

#include "blockkrylov/block_system.hpp"
#include "blockkrylov/dense/lu.hpp"
#include "blockkrylov/krylov.hpp"

namespace blockkrylov {

enum class Family {
  BlockDiagonal,
  LowerTriangular,
  UpperTriangular,
  BlockLdu,
  SymTriLowerUpper,  // lower sweep first, then upper
  SymTriUpperLower,  // upper sweep first, then lower
};

enum class SchurApproxKind { DiagonalBlock, ExactSchur, UserMatrix };
enum class InnerSolveKind { Direct, Iterative };

struct PreconditionerSpec {
  Family family = Family::LowerTriangular;
  SchurBlock schur_block = SchurBlock::S22;
  SchurApproxKind schur_kind = SchurApproxKind::DiagonalBlock;
  std::optional<Matrix> user_matrix;
  std::string user_source;  // "<path>.mtx" or "diag"; resolved before build
  InnerSolveKind inner = InnerSolveKind::Direct;
  double inner_rel_tol = 1e-8;
  std::size_t inner_max_iter = 2000;
  bool negate_schur = false;

  static PreconditionerSpec parse(const std::string& text);
  std::string to_string() const;
};

inline const char* family_token(Family f) {
  switch (f) {
    case Family::BlockDiagonal: return "BD";
    case Family::LowerTriangular: return "LT";
    case Family::UpperTriangular: return "UT";
    case Family::BlockLdu: return "LDU";
    case Family::SymTriLowerUpper: return "ST-I";
    case Family::SymTriUpperLower: return "ST-II";
  }
  return "?";
}

inline PreconditionerSpec PreconditionerSpec::parse(const std::string& text) {
  PreconditionerSpec spec;
  std::istringstream is(text);
  std::string tok;
  bool have_family = false;
  while (std::getline(is, tok, ':')) {
    if (tok.empty()) continue;
    if (!have_family) {
      if (tok == "BD") spec.family = Family::BlockDiagonal;
      else if (tok == "LT") spec.family = Family::LowerTriangular;
      else if (tok == "UT") spec.family = Family::UpperTriangular;
      else if (tok == "LDU") spec.family = Family::BlockLdu;
      else if (tok == "ST-I") spec.family = Family::SymTriLowerUpper;
      else if (tok == "ST-II") spec.family = Family::SymTriUpperLower;
      else throw std::invalid_argument("preconditioner spec: unknown family '" + tok + "'");
      have_family = true;
      continue;
    }
    if (tok == "11") spec.schur_block = SchurBlock::S11;
    else if (tok == "22") spec.schur_block = SchurBlock::S22;
    else if (tok == "jacobi" || tok == "diag-block")
      spec.schur_kind = SchurApproxKind::DiagonalBlock;
    else if (tok == "exact") spec.schur_kind = SchurApproxKind::ExactSchur;
    else if (tok == "user-diag") {
      spec.schur_kind = SchurApproxKind::UserMatrix;
      spec.user_source = "diag";
    } else if (tok.rfind("user=", 0) == 0) {
      spec.schur_kind = SchurApproxKind::UserMatrix;
      spec.user_source = tok.substr(5);
    } else if (tok.rfind("inner=", 0) == 0) {
      spec.inner = InnerSolveKind::Iterative;
      const std::string rest = tok.substr(6);
      const auto comma = rest.find(',');
      spec.inner_rel_tol = std::stod(rest.substr(0, comma));
      if (comma != std::string::npos)
        spec.inner_max_iter = static_cast<std::size_t>(std::stoul(rest.substr(comma + 1)));
    } else if (tok == "neg") {
      spec.negate_schur = true;
    } else {
      throw std::invalid_argument("preconditioner spec: unknown token '" + tok + "'");
    }
  }
  if (!have_family) throw std::invalid_argument("preconditioner spec: missing family");
  return spec;
}

inline std::string PreconditionerSpec::to_string() const {
  std::ostringstream os;
  os << family_token(family) << ':' << (schur_block == SchurBlock::S11 ? "11" : "22");
  switch (schur_kind) {
    case SchurApproxKind::DiagonalBlock: os << ":jacobi"; break;
    case SchurApproxKind::ExactSchur: os << ":exact"; break;
    case SchurApproxKind::UserMatrix:
      os << ":user=" << (user_source.empty() ? "<matrix>" : user_source);
      break;
  }
  if (inner == InnerSolveKind::Iterative) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%g", inner_rel_tol);
    os << ":inner=" << buf;
  }
  if (negate_schur) os << ":neg";
  return os.str();
}

/// Ready-to-apply P^{-1} action. Immutable after build; concurrent applies
/// are safe (per-call scratch, atomic degraded counter).
class Preconditioner {
 public:
  Preconditioner(BlockSystem2x2 sys, PreconditionerSpec spec, Matrix shat)
      : sys_(std::move(sys)),
        spec_(std::move(spec)),
        shat_(std::move(shat)),
        shat_lu_(lu_factor(shat_)),
        degraded_(std::make_shared<std::atomic<std::size_t>>(0)) {
    if (spec_.inner == InnerSolveKind::Direct) {
      // force both factorizations now so shared applies never race on setup
      if (spec_.schur_block == SchurBlock::S22) sys_.a11_lu();
      else sys_.a22_lu();
    }
  }

  std::size_t rows() const { return sys_.size(); }
  std::size_t cols() const { return sys_.size(); }
  const PreconditionerSpec& spec() const { return spec_; }
  const Matrix& schur_matrix() const { return shat_; }
  std::size_t degraded_count() const { return degraded_->load(); }

  Vector apply(const Vector& v) const {
    const BlockVector p = sys_.split(v);
    switch (spec_.family) {
      case Family::BlockDiagonal: {
        BlockVector out{solve_other(p.part1, p.part2, /*want_first=*/true),
                        solve_other(p.part1, p.part2, /*want_first=*/false)};
        return out.stacked();
      }
      case Family::LowerTriangular:
        return apply_lower(p).stacked();
      case Family::UpperTriangular:
        return apply_upper(p).stacked();
      case Family::BlockLdu:
        return apply_ldu(p).stacked();
      case Family::SymTriLowerUpper:
      case Family::SymTriUpperLower: {
        const bool lower_first = spec_.family == Family::SymTriLowerUpper;
        Vector x = (lower_first ? apply_lower(p) : apply_upper(p)).stacked();
        const Vector r = v - sys_.apply(x);
        const BlockVector rp = sys_.split(r);
        x += (lower_first ? apply_upper(rp) : apply_lower(rp)).stacked();
        return x;
      }
    }
    throw std::logic_error("Preconditioner::apply: bad family");
  }

 private:
  // Solve with the diagonal block that is *not* the Schur approximation.
  Vector solve_block(const Vector& v) const {
    const bool schur_in_22 = spec_.schur_block == SchurBlock::S22;
    if (spec_.inner == InnerSolveKind::Direct)
      return schur_in_22 ? sys_.a11_lu().solve(v) : sys_.a22_lu().solve(v);
    const Matrix& block = schur_in_22 ? sys_.a11() : sys_.a22();
    KrylovConfig inner_cfg;
    inner_cfg.rel_tol = spec_.inner_rel_tol;
    inner_cfg.max_iter = std::min(spec_.inner_max_iter, block.rows());
    SolveResult r = gmres(block, v, Vector(v.size()), inner_cfg);
    if (!r.history.converged) degraded_->fetch_add(1);
    return std::move(r.x);
  }

  Vector solve_schur(const Vector& v) const {
    Vector x = shat_lu_.solve(v);
    if (spec_.negate_schur) x *= -1.0;
    return x;
  }

  // Block-diagonal helper: pick whichever part is requested.
  Vector solve_other(const Vector& v1, const Vector& v2, bool want_first) const {
    const bool schur_in_22 = spec_.schur_block == SchurBlock::S22;
    if (want_first) return schur_in_22 ? solve_block(v1) : solve_schur(v1);
    return schur_in_22 ? solve_schur(v2) : solve_block(v2);
  }

  BlockVector apply_lower(const BlockVector& p) const {
    if (spec_.schur_block == SchurBlock::S22) {
      Vector x1 = solve_block(p.part1);
      Vector x2 = solve_schur(p.part2 - sys_.a21().apply(x1));
      return {std::move(x1), std::move(x2)};
    }
    Vector x1 = solve_schur(p.part1);
    Vector x2 = solve_block(p.part2 - sys_.a21().apply(x1));
    return {std::move(x1), std::move(x2)};
  }

  BlockVector apply_upper(const BlockVector& p) const {
    if (spec_.schur_block == SchurBlock::S22) {
      Vector x2 = solve_schur(p.part2);
      Vector x1 = solve_block(p.part1 - sys_.a12().apply(x2));
      return {std::move(x1), std::move(x2)};
    }
    Vector x2 = solve_block(p.part2);
    Vector x1 = solve_schur(p.part1 - sys_.a12().apply(x2));
    return {std::move(x1), std::move(x2)};
  }

  BlockVector apply_ldu(const BlockVector& p) const {
    if (spec_.schur_block == SchurBlock::S22) {
      Vector t1 = solve_block(p.part1);
      Vector x2 = solve_schur(p.part2 - sys_.a21().apply(t1));
      Vector x1 = t1 - solve_block(sys_.a12().apply(x2));
      return {std::move(x1), std::move(x2)};
    }
    Vector t2 = solve_block(p.part2);
    Vector x1 = solve_schur(p.part1 - sys_.a12().apply(t2));
    Vector x2 = t2 - solve_block(sys_.a21().apply(x1));
    return {std::move(x1), std::move(x2)};
  }

  BlockSystem2x2 sys_;
  PreconditionerSpec spec_;
  Matrix shat_;
  LuFactors shat_lu_;
  std::shared_ptr<std::atomic<std::size_t>> degraded_;
};

/// Materialize the Schur approximation selected by `spec`.
inline Matrix resolve_schur_matrix(const BlockSystem2x2& sys, const PreconditionerSpec& spec) {
  const std::size_t nk = spec.schur_block == SchurBlock::S11 ? sys.n1() : sys.n2();
  switch (spec.schur_kind) {
    case SchurApproxKind::DiagonalBlock:
      return spec.schur_block == SchurBlock::S11 ? sys.a11() : sys.a22();
    case SchurApproxKind::ExactSchur:
      return sys.schur_complement(spec.schur_block);
    case SchurApproxKind::UserMatrix: {
      if (!spec.user_matrix)
        throw std::invalid_argument("build: UserMatrix Schur approximation not resolved");
      const Matrix& u = *spec.user_matrix;
      detail::require(u.rows() == nk && u.cols() == nk,
                      "build: user Schur matrix has wrong dimensions");
      return u;
    }
  }
  throw std::logic_error("resolve_schur_matrix: bad kind");
}

inline Preconditioner build_preconditioner(const BlockSystem2x2& sys,
                                           const PreconditionerSpec& spec) {
  return Preconditioner(sys, spec, resolve_schur_matrix(sys, spec));
}

namespace detail {
inline Matrix assemble_blocks(const Matrix& b11, const Matrix& b12, const Matrix& b21,
                              const Matrix& b22) {
  return BlockSystem2x2(b11, b12, b21, b22).assemble();
}
}  // namespace detail

/// Explicit dense preconditioner matrix P (Direct solves assumed). Symmetric
/// triangular families assemble via P = second * (L + U - A)^{-1} * first,
/// the closed form of the two-sweep composition.
inline Matrix assemble_preconditioner_matrix(const BlockSystem2x2& sys,
                                             const PreconditionerSpec& spec) {
  Matrix shat = resolve_schur_matrix(sys, spec);
  if (spec.negate_schur) shat *= -1.0;
  const bool in22 = spec.schur_block == SchurBlock::S22;
  const Matrix& d1 = in22 ? sys.a11() : shat;
  const Matrix& d2 = in22 ? shat : sys.a22();
  const Matrix z12(sys.n1(), sys.n2()), z21(sys.n2(), sys.n1());

  const Matrix lower = detail::assemble_blocks(d1, z12, sys.a21(), d2);
  const Matrix upper = detail::assemble_blocks(d1, sys.a12(), z21, d2);
  switch (spec.family) {
    case Family::BlockDiagonal:
      return detail::assemble_blocks(d1, z12, z21, d2);
    case Family::LowerTriangular:
      return lower;
    case Family::UpperTriangular:
      return upper;
    case Family::BlockLdu: {
      if (in22) {
        Matrix left = Matrix::identity(sys.size());
        Matrix x = sys.a11_lu().solve_matrix(sys.a12());  // A11^{-1} A12
        Matrix lo = matmul(sys.a21(), lu_inverse(sys.a11()));
        Matrix mid = detail::assemble_blocks(sys.a11(), z12, z21, shat);
        Matrix lfac = Matrix::identity(sys.size());
        for (std::size_t i = 0; i < sys.n2(); ++i)
          for (std::size_t j = 0; j < sys.n1(); ++j) lfac(sys.n1() + i, j) = lo(i, j);
        Matrix ufac = Matrix::identity(sys.size());
        for (std::size_t i = 0; i < sys.n1(); ++i)
          for (std::size_t j = 0; j < sys.n2(); ++j) ufac(i, sys.n1() + j) = x(i, j);
        return matmul(lfac, matmul(mid, ufac));
      }
      Matrix up = matmul(sys.a12(), lu_inverse(sys.a22()));  // A12 A22^{-1}
      Matrix lo = sys.a22_lu().solve_matrix(sys.a21());      // A22^{-1} A21
      Matrix mid = detail::assemble_blocks(shat, z12, z21, sys.a22());
      Matrix ufac = Matrix::identity(sys.size());
      for (std::size_t i = 0; i < sys.n1(); ++i)
        for (std::size_t j = 0; j < sys.n2(); ++j) ufac(i, sys.n1() + j) = up(i, j);
      Matrix lfac = Matrix::identity(sys.size());
      for (std::size_t i = 0; i < sys.n2(); ++i)
        for (std::size_t j = 0; j < sys.n1(); ++j) lfac(sys.n1() + i, j) = lo(i, j);
      return matmul(ufac, matmul(mid, lfac));
    }
    case Family::SymTriLowerUpper: {
      Matrix mid = lower + upper - sys.assemble();
      return matmul(lower, lu_solve_matrix(mid, upper));
    }
    case Family::SymTriUpperLower: {
      Matrix mid = lower + upper - sys.assemble();
      return matmul(upper, lu_solve_matrix(mid, lower));
    }
  }
  throw std::logic_error("assemble_preconditioner_matrix: bad family");
}

/// Dense error propagator I - P^{-1} A (Direct solves required).
inline Matrix error_propagator(const BlockSystem2x2& sys, const PreconditionerSpec& spec) {
  if (spec.inner != InnerSolveKind::Direct)
    throw std::invalid_argument("error_propagator: requires Direct inner solves");
  const Preconditioner p = build_preconditioner(sys, spec);
  const Matrix a = sys.assemble();
  const std::size_t n = sys.size();
  Matrix e(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    Vector col = p.apply(a.col(j));
    col *= -1.0;
    col[j] += 1.0;
    e.set_col(j, col);
  }
  return e;
}

/// Dense residual propagator I - A P^{-1} (Direct solves required).
inline Matrix residual_propagator(const BlockSystem2x2& sys, const PreconditionerSpec& spec) {
  if (spec.inner != InnerSolveKind::Direct)
    throw std::invalid_argument("residual_propagator: requires Direct inner solves");
  const Preconditioner p = build_preconditioner(sys, spec);
  const std::size_t n = sys.size();
  Matrix r(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    Vector col = sys.apply(p.apply(Vector::unit(n, j)));
    col *= -1.0;
    col[j] += 1.0;
    r.set_col(j, col);
  }
  return r;
}

}  // namespace blockkrylov
