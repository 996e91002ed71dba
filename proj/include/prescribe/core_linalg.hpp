#pragma once

/// \file prescribe/core_linalg.hpp
/// \brief Dense complex kernels shared by every other module: Householder QR
/// with a non-negative diagonal, eigenvalues, polynomial/companion utilities,
/// seeded random unitaries and the principal square root of a PSD matrix.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace prescribe {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;
using Index = Eigen::Index;
/// Unordered collection of complex values with multiplicity.
using Multiset = std::vector<cplx>;

// ---------------------------------------------------------------------------
// errors
// ---------------------------------------------------------------------------

class error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Iteration caps exceeded, indefinite input to a PSD routine, singular solves.
class numerical_error : public error {
 public:
  using error::error;
};

/// A request that lies outside what the constructions support (end-of-cycle
/// stagnation, block Arnoldi breakdown, ...).
class unsupported_error : public error {
 public:
  using error::error;
};

class breakdown_error : public unsupported_error {
 public:
  using unsupported_error::unsupported_error;
};

// ---------------------------------------------------------------------------
// small helpers
// ---------------------------------------------------------------------------

inline bool all_finite(const Matrix& M) {
  for (Index j = 0; j < M.cols(); ++j)
    for (Index i = 0; i < M.rows(); ++i)
      if (!std::isfinite(M(i, j).real()) || !std::isfinite(M(i, j).imag())) return false;
  return true;
}

/// Spectral norm via singular values; fine at desk scale.
inline double norm2(const Matrix& M) {
  if (M.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(M);
  return svd.singularValues()(0);
}

/// 2-norm condition number; +inf for singular input.
inline double cond2(const Matrix& M) {
  if (M.size() == 0) return 1.0;
  Eigen::JacobiSVD<Matrix> svd(M);
  const auto& s = svd.singularValues();
  const double smin = s(s.size() - 1);
  if (smin == 0.0) return std::numeric_limits<double>::infinity();
  return s(0) / smin;
}

inline double min_singular_value(const Matrix& M) {
  if (M.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(M);
  return svd.singularValues()(svd.singularValues().size() - 1);
}

inline Matrix hermitian_part(const Matrix& S) { return (S + S.adjoint()) / 2.0; }

/// Eigen-decomposition of a Hermitian matrix; eigenvalues ascending.
struct HermitianEig {
  RealVector values;
  Matrix vectors;
};

inline HermitianEig hermitian_eig(const Matrix& S) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(hermitian_part(S));
  if (es.info() != Eigen::Success) throw numerical_error("hermitian eigensolver failed");
  return {es.eigenvalues(), es.eigenvectors()};
}

// ---------------------------------------------------------------------------
// QR
// ---------------------------------------------------------------------------

struct QRFactors {
  Matrix Q;  ///< economy size, orthonormal columns
  Matrix R;  ///< upper triangular, real non-negative diagonal
  bool rank_deficient = false;
};

/// Householder QR with the phase of every column rotated so that the
/// diagonal of R is real and non-negative. Rank deficiency shows up as
/// (near-)zero diagonal entries and sets `rank_deficient`.
inline QRFactors qr(const Matrix& M, double rank_tol = 1e-12) {
  if (M.rows() < M.cols()) throw std::invalid_argument("qr: requires rows >= cols");
  const Index k = M.cols();
  QRFactors out;
  Eigen::HouseholderQR<Matrix> h(M);
  out.Q = h.householderQ() * Matrix::Identity(M.rows(), k);
  out.R = h.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  double dmax = 0.0;
  for (Index i = 0; i < k; ++i) {
    const cplx d = out.R(i, i);
    const double a = std::abs(d);
    if (a > 0.0) {
      const cplx phase = d / a;
      out.R.row(i) *= std::conj(phase);
      out.Q.col(i) *= phase;
    }
    out.R(i, i) = a;
    dmax = std::max(dmax, a);
  }
  for (Index i = 0; i < k; ++i)
    if (out.R(i, i).real() <= rank_tol * dmax || dmax == 0.0) out.rank_deficient = true;
  return out;
}

// ---------------------------------------------------------------------------
// eigenvalues
// ---------------------------------------------------------------------------

/// Largest dimension accepted by eig().
inline constexpr Index kEigDimensionCap = 512;

/// Eigenvalues with multiplicity (complex Schur form: Hessenberg reduction and
/// shifted QR). The iteration budget is 100·dim sweeps.
inline Multiset eig(const Matrix& M) {
  if (M.rows() != M.cols()) throw std::invalid_argument("eig: matrix must be square");
  const Index n = M.rows();
  if (n == 0) return {};
  if (n > kEigDimensionCap) throw std::invalid_argument("eig: dimension above cap");
  if (!all_finite(M)) throw numerical_error("eig: non-finite input");
  Eigen::ComplexEigenSolver<Matrix> es;
  es.setMaxIterations(100 * n);
  es.compute(M, false);
  if (es.info() != Eigen::Success) throw numerical_error("eig: QR iteration did not converge");
  const auto& ev = es.eigenvalues();
  return Multiset(ev.data(), ev.data() + n);
}

// ---------------------------------------------------------------------------
// polynomials
// ---------------------------------------------------------------------------

/// Coefficients c_0..c_{j-1} of p(z) = z^j - sum_i c_i z^i.
struct PolyCoeffs {
  std::vector<cplx> c;
  Index degree() const { return static_cast<Index>(c.size()); }
};

/// Expands prod (z - r) and returns the negated lower coefficients, i.e. the
/// c_i of z^j - sum c_i z^i.
inline PolyCoeffs poly_from_roots(const Multiset& roots) {
  // monic coefficients, lowest degree first
  std::vector<cplx> a{cplx(1.0)};
  for (const cplx& r : roots) {
    std::vector<cplx> next(a.size() + 1, cplx(0.0));
    for (std::size_t i = 0; i < a.size(); ++i) {
      next[i + 1] += a[i];
      next[i] -= r * a[i];
    }
    a = std::move(next);
  }
  PolyCoeffs out;
  out.c.resize(roots.size());
  for (std::size_t i = 0; i < roots.size(); ++i) out.c[i] = -a[i];
  return out;
}

/// Ones on the subdiagonal, c in the last column.
inline Matrix companion(const PolyCoeffs& p) {
  const Index j = p.degree();
  if (j < 1) throw std::invalid_argument("companion: degree must be >= 1");
  Matrix C = Matrix::Zero(j, j);
  for (Index i = 1; i < j; ++i) C(i, i - 1) = 1.0;
  for (Index i = 0; i < j; ++i) C(i, j - 1) = p.c[static_cast<std::size_t>(i)];
  return C;
}

// ---------------------------------------------------------------------------
// random unitaries and PSD square roots
// ---------------------------------------------------------------------------

/// Haar-distributed unitary from a complex Ginibre matrix; bitwise
/// reproducible for a fixed seed on a given standard library.
inline Matrix random_unitary(Index dim, std::uint64_t seed) {
  if (dim < 1) throw std::invalid_argument("random_unitary: dim must be >= 1");
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  Matrix Z(dim, dim);
  for (Index j = 0; j < dim; ++j)
    for (Index i = 0; i < dim; ++i) {
      const double re = nd(gen);
      const double im = nd(gen);
      Z(i, j) = cplx(re, im);
    }
  return qr(Z).Q;
}

/// Hermitian PSD T with T*T = S. Throws numerical_error when S is not
/// Hermitian PSD within 1e-10*||S||.
inline Matrix principal_sqrt_psd(const Matrix& S, double tol = 1e-10) {
  if (S.rows() != S.cols()) throw std::invalid_argument("principal_sqrt_psd: square input required");
  const double scale = std::max(norm2(S), std::numeric_limits<double>::min());
  if ((S - S.adjoint()).norm() > tol * scale)
    throw numerical_error("principal_sqrt_psd: input is not Hermitian");
  const HermitianEig he = hermitian_eig(S);
  RealVector root(he.values.size());
  for (Index i = 0; i < he.values.size(); ++i) {
    const double lam = he.values(i);
    if (lam < -tol * scale) throw numerical_error("principal_sqrt_psd: input is indefinite");
    root(i) = std::sqrt(std::max(lam, 0.0));
  }
  Matrix T = he.vectors * root.cast<cplx>().asDiagonal() * he.vectors.adjoint();
  return hermitian_part(T);
}

/// Inverse of an upper-triangular matrix by back substitution.
inline Matrix upper_inverse(const Matrix& T) {
  return T.triangularView<Eigen::Upper>().solve(Matrix::Identity(T.rows(), T.cols()));
}

}  // namespace prescribe
