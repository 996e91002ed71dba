#pragma once

/// \file prescribe/io/matrix_market.hpp
/// \brief Dense Matrix Market reader and writer.
///
/// Output is always `array complex general` with 17 significant digits, which
/// round-trips doubles exactly. Input accepts array and coordinate files with
/// real, integer or complex fields and general, symmetric, hermitian or
/// skew-symmetric symmetry.

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "prescribe/core_linalg.hpp"

namespace prescribe::io {

class format_error : public error {
 public:
  using error::error;
};

namespace detail {

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

inline std::string fmt17(double v) {
  if (v == 0.0) v = 0.0;  // no "-0"
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

inline void write_matrix_market(std::ostream& os, const Matrix& M, const std::string& comment = {}) {
  os << "%%MatrixMarket matrix array complex general\n";
  if (!comment.empty()) os << "% " << comment << "\n";
  os << M.rows() << " " << M.cols() << "\n";
  for (Index j = 0; j < M.cols(); ++j)
    for (Index i = 0; i < M.rows(); ++i)
      os << detail::fmt17(M(i, j).real()) << " " << detail::fmt17(M(i, j).imag()) << "\n";
}

inline void write_matrix_market(const std::string& path, const Matrix& M, const std::string& comment = {}) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw error("cannot open " + path + " for writing");
  write_matrix_market(os, M, comment);
  if (!os) throw error("write to " + path + " failed");
}

inline Matrix read_matrix_market(std::istream& is, const std::string& name = "<stream>") {
  std::string line;
  int lineno = 0;
  auto fail = [&](const std::string& why) -> format_error {
    return format_error(name + ":" + std::to_string(lineno) + ": " + why);
  };

  if (!std::getline(is, line)) throw fail("empty file");
  ++lineno;
  std::istringstream head(line);
  std::string banner, object, layout, field, symmetry;
  head >> banner >> object >> layout >> field >> symmetry;
  if (banner != "%%MatrixMarket") throw fail("missing %%MatrixMarket banner");
  object = detail::lower(object);
  layout = detail::lower(layout);
  field = detail::lower(field);
  symmetry = detail::lower(symmetry);
  if (object != "matrix") throw fail("unsupported object '" + object + "'");
  if (layout != "array" && layout != "coordinate") throw fail("unsupported format '" + layout + "'");
  if (field != "real" && field != "double" && field != "integer" && field != "complex")
    throw fail("unsupported field '" + field + "'");
  if (symmetry != "general" && symmetry != "symmetric" && symmetry != "hermitian" && symmetry != "skew-symmetric")
    throw fail("unsupported symmetry '" + symmetry + "'");
  const bool is_complex = field == "complex";

  // skip comments and blank lines
  auto next_line = [&](std::string& out) {
    while (std::getline(is, out)) {
      ++lineno;
      const auto pos = out.find_first_not_of(" \t\r");
      if (pos == std::string::npos || out[pos] == '%') continue;
      return true;
    }
    return false;
  };

  if (!next_line(line)) throw fail("missing size line");
  std::istringstream size(line);
  long long rows = 0, cols = 0, nnz = 0;
  size >> rows >> cols;
  if (layout == "coordinate") size >> nnz;
  if (!size || rows < 0 || cols < 0 || nnz < 0) throw fail("malformed size line");
  if (symmetry != "general" && rows != cols) throw fail("symmetric storage needs a square matrix");

  Matrix M = Matrix::Zero(rows, cols);
  auto read_value = [&](std::istringstream& in) {
    double re = 0.0, im = 0.0;
    in >> re;
    if (is_complex) in >> im;
    if (!in) throw fail("malformed entry");
    return cplx(re, im);
  };
  auto mirror = [&](Index i, Index j, cplx v) {
    if (i == j) return;
    if (symmetry == "symmetric") M(j, i) = v;
    if (symmetry == "hermitian") M(j, i) = std::conj(v);
    if (symmetry == "skew-symmetric") M(j, i) = -v;
  };

  if (layout == "array") {
    for (Index j = 0; j < cols; ++j) {
      const Index start = symmetry == "general" ? 0 : (symmetry == "skew-symmetric" ? j + 1 : j);
      for (Index i = start; i < rows; ++i) {
        if (!next_line(line)) throw fail("too few entries");
        std::istringstream in(line);
        M(i, j) = read_value(in);
        mirror(i, j, M(i, j));
      }
    }
  } else {
    for (long long k = 0; k < nnz; ++k) {
      if (!next_line(line)) throw fail("too few entries");
      std::istringstream in(line);
      long long i = 0, j = 0;
      in >> i >> j;
      if (!in || i < 1 || j < 1 || i > rows || j > cols) throw fail("index out of range");
      const cplx v = read_value(in);
      M(i - 1, j - 1) = v;
      mirror(i - 1, j - 1, v);
    }
  }
  if (!all_finite(M)) throw fail("non-finite entry");
  return M;
}

inline Matrix read_matrix_market(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw format_error("cannot open " + path);
  return read_matrix_market(is, path);
}

}  // namespace prescribe::io
