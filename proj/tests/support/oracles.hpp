#pragma once

// Reference computations used by the tests. They avoid the library's own
// kernels: explicit Krylov matrices, Gram-Schmidt and dense least squares.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;

/// Modified Gram-Schmidt with one re-orthogonalization pass; R has a real
/// positive diagonal.
inline void mgs(const Mat& A, Mat& Q, Mat& R) {
  const Eigen::Index n = A.rows(), k = A.cols();
  Q = A;
  R = Mat::Zero(k, k);
  for (Eigen::Index j = 0; j < k; ++j) {
    for (int pass = 0; pass < 2; ++pass)
      for (Eigen::Index i = 0; i < j; ++i) {
        const cplx h = Q.col(i).dot(Q.col(j));
        R(i, j) += h;
        Q.col(j) -= h * Q.col(i);
      }
    R(j, j) = Q.col(j).norm();
    Q.col(j) /= R(j, j).real();
  }
  (void)n;
}

/// Orthonormal basis of span[B, AB, ..., A^{j-1}B], columns scaled before
/// orthogonalization.
inline Mat krylov_basis(const Mat& A, const Mat& B, int j) {
  const Eigen::Index p = B.cols();
  Mat K(A.rows(), j * p);
  Mat W = B;
  for (int i = 0; i < j; ++i) {
    for (Eigen::Index c = 0; c < p; ++c) W.col(c) /= W.col(c).norm();
    K.middleCols(i * p, p) = W;
    W = A * W;
  }
  Mat Q, R;
  mgs(K, Q, R);
  return Q;
}

/// min over X in K_j(A, B) of ||B - A X||_F, by dense least squares.
inline Mat gmres_residual(const Mat& A, const Mat& B, int j) {
  if (j == 0) return B;
  const Mat Q = krylov_basis(A, B, j);
  const Mat AQ = A * Q;
  const Mat Y = AQ.colPivHouseholderQr().solve(B);
  return B - AQ * Y;
}

/// Galerkin (FOM) residual: X in K_j with Q^*(B - A X) = 0.
inline Mat fom_residual(const Mat& A, const Mat& B, int j) {
  if (j == 0) return B;
  const Mat Q = krylov_basis(A, B, j);
  const Mat Y = (Q.adjoint() * A * Q).fullPivLu().solve(Q.adjoint() * B);
  return B - A * Q * Y;
}

/// Eigenvalues of the Rayleigh quotient on K_j(A, B).
inline std::vector<cplx> ritz(const Mat& A, const Mat& B, int j) {
  const Mat Q = krylov_basis(A, B, j);
  Eigen::ComplexEigenSolver<Mat> es(Q.adjoint() * A * Q, false);
  const Vec& e = es.eigenvalues();
  return {e.data(), e.data() + e.size()};
}

inline std::vector<cplx> eigenvalues(const Mat& A) {
  Eigen::ComplexEigenSolver<Mat> es(A, false);
  const Vec& e = es.eigenvalues();
  return {e.data(), e.data() + e.size()};
}

/// Restarted GMRES with cycle length m: per cycle, the residual norms after
/// 0..m steps (Frobenius norms in the block case).
inline std::vector<std::vector<double>> restarted_trace(const Mat& A, const Mat& B, int m, int cycles) {
  std::vector<std::vector<double>> out;
  Mat R = B;
  for (int k = 0; k < cycles; ++k) {
    std::vector<double> row;
    Mat last = R;
    for (int j = 0; j <= m; ++j) {
      last = gmres_residual(A, R, j);
      row.push_back(last.norm());
    }
    out.push_back(row);
    R = last;
  }
  return out;
}

/// R factor with a real non-negative diagonal (the block normalizing
/// quantity of X).
inline Mat r_factor(const Mat& X) {
  Mat Q, R;
  mgs(X, Q, R);
  return R;
}

/// Monic polynomial coefficients of prod (z - r): comparing these compares
/// multisets without having to match values up.
inline std::vector<cplx> monic(const std::vector<cplx>& roots) {
  std::vector<cplx> a{1.0};
  for (const cplx& r : roots) {
    std::vector<cplx> next(a.size() + 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) {
      next[i + 1] += a[i];
      next[i] -= r * a[i];
    }
    a = next;
  }
  return a;
}

/// Relative distance between two multisets through their monic polynomials.
inline double poly_distance(const std::vector<cplx>& x, const std::vector<cplx>& y) {
  if (x.size() != y.size()) return std::numeric_limits<double>::infinity();
  const auto a = monic(x), b = monic(y);
  double num = 0, den = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num = std::max(num, std::abs(a[i] - b[i]));
    den = std::max(den, std::abs(b[i]));
  }
  return num / den;
}

/// Largest distance from a value in x to its nearest partner in y, used for
/// sets too large for the polynomial comparison to stay well conditioned.
inline double nearest_distance(const std::vector<cplx>& x, const std::vector<cplx>& y) {
  if (x.size() != y.size()) return std::numeric_limits<double>::infinity();
  std::vector<bool> used(y.size(), false);
  double worst = 0;
  for (const cplx& v : x) {
    std::size_t best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < y.size(); ++i)
      if (!used[i] && std::abs(v - y[i]) < bd) {
        bd = std::abs(v - y[i]);
        best = i;
      }
    used[best] = true;
    worst = std::max(worst, bd / std::max(1.0, std::abs(y[best])));
  }
  return worst;
}

inline Mat gaussian(Eigen::Index rows, Eigen::Index cols, unsigned seed) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> nd;
  Mat M(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) M(i, j) = cplx(nd(gen), nd(gen));
  return M;
}

}  // namespace oracle
