#pragma once

// Matrix Market array and coordinate readers/writers for dense matrices.
// Array files are written with the exact header
//   %%MatrixMarket matrix array real general
// and column-major entry order, per the format definition.

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "blockkrylov/dense/matrix.hpp"

namespace blockkrylov {

struct MatrixMarketError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {
inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}
}  // namespace detail

inline void write_matrix_market(std::ostream& os, const Matrix& a) {
  os << "%%MatrixMarket matrix array real general\n";
  os << a.rows() << " " << a.cols() << "\n";
  for (std::size_t j = 0; j < a.cols(); ++j)
    for (std::size_t i = 0; i < a.rows(); ++i)
      os << detail::fmt_double(a(i, j)) << "\n";
}

inline void write_matrix_market(const std::string& path, const Matrix& a) {
  std::ofstream os(path);
  if (!os) throw MatrixMarketError("cannot open for writing: " + path);
  write_matrix_market(os, a);
}

inline void write_matrix_market_coordinate(std::ostream& os, const Matrix& a) {
  std::size_t nnz = 0;
  for (double v : a.entries())
    if (v != 0.0) ++nnz;
  os << "%%MatrixMarket matrix coordinate real general\n";
  os << a.rows() << " " << a.cols() << " " << nnz << "\n";
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      if (a(i, j) != 0.0)
        os << (i + 1) << " " << (j + 1) << " " << detail::fmt_double(a(i, j)) << "\n";
}

inline Matrix read_matrix_market(std::istream& is) {
  std::string header;
  if (!std::getline(is, header)) throw MatrixMarketError("empty Matrix Market stream");
  std::istringstream hs(header);
  std::string banner, object, format, field, symmetry;
  hs >> banner >> object >> format >> field >> symmetry;
  if (banner != "%%MatrixMarket" || object != "matrix")
    throw MatrixMarketError("not a Matrix Market matrix file");
  if (field != "real" && field != "integer")
    throw MatrixMarketError("unsupported Matrix Market field: " + field);
  const bool coordinate = format == "coordinate";
  if (!coordinate && format != "array")
    throw MatrixMarketError("unsupported Matrix Market format: " + format);
  const bool symmetric = symmetry == "symmetric";
  if (!symmetric && symmetry != "general")
    throw MatrixMarketError("unsupported Matrix Market symmetry: " + symmetry);

  std::string line;
  auto next_data_line = [&]() -> std::string {
    while (std::getline(is, line)) {
      std::size_t k = 0;
      while (k < line.size() && std::isspace(static_cast<unsigned char>(line[k]))) ++k;
      if (k == line.size() || line[k] == '%') continue;
      return line;
    }
    throw MatrixMarketError("unexpected end of Matrix Market data");
  };

  std::istringstream dims(next_data_line());
  std::size_t rows = 0, cols = 0, nnz = 0;
  if (coordinate) {
    if (!(dims >> rows >> cols >> nnz)) throw MatrixMarketError("bad coordinate size line");
  } else {
    if (!(dims >> rows >> cols)) throw MatrixMarketError("bad array size line");
  }

  Matrix a(rows, cols);
  if (coordinate) {
    for (std::size_t k = 0; k < nnz; ++k) {
      std::istringstream es(next_data_line());
      std::size_t i = 0, j = 0;
      double v = 0.0;
      if (!(es >> i >> j >> v)) throw MatrixMarketError("bad coordinate entry");
      if (i < 1 || i > rows || j < 1 || j > cols)
        throw MatrixMarketError("coordinate entry out of range");
      a(i - 1, j - 1) = v;
      if (symmetric && i != j) a(j - 1, i - 1) = v;
    }
  } else {
    // array format stores the lower triangle only when symmetric
    for (std::size_t j = 0; j < cols; ++j) {
      for (std::size_t i = symmetric ? j : 0; i < rows; ++i) {
        std::istringstream es(next_data_line());
        double v = 0.0;
        if (!(es >> v)) throw MatrixMarketError("bad array entry");
        a(i, j) = v;
        if (symmetric && i != j) a(j, i) = v;
      }
    }
  }
  detail::check_finite(a.entries(), "read_matrix_market");
  return a;
}

inline Matrix read_matrix_market(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw MatrixMarketError("cannot open for reading: " + path);
  return read_matrix_market(is);
}

}  // namespace blockkrylov
