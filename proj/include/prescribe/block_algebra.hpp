#pragma once

/// \file prescribe/block_algebra.hpp
/// \brief The *-algebra S = C^{p x p} acting as scalars on block vectors.
///
/// Block vectors are n x p matrices viewed as vectors over S, multiplied by
/// scalars from the right. Upper-triangular p x p matrices with non-negative
/// real diagonal ("normalizing quantities") play the part of non-negative
/// reals: block normalization is an economy QR, the absolute value of S is
/// the R factor of S, and normalizing quantities are compared through the
/// Loewner order of their Gram matrices R^* R.

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

#include "prescribe/core_linalg.hpp"

namespace prescribe {

/// Upper-triangular p x p matrix with real non-negative diagonal.
class NormalizingQuantity {
 public:
  NormalizingQuantity() = default;

  /// Entries below the diagonal are dropped. The diagonal must be real and
  /// non-negative up to round-off relative to the matrix norm.
  explicit NormalizingQuantity(Matrix R) : r_(std::move(R)) {
    if (r_.rows() != r_.cols()) throw std::invalid_argument("normalizing quantity must be square");
    const double scale = std::max(r_.norm(), std::numeric_limits<double>::min());
    for (Index j = 0; j < r_.cols(); ++j)
      for (Index i = j + 1; i < r_.rows(); ++i) r_(i, j) = 0.0;
    for (Index i = 0; i < r_.rows(); ++i) {
      const cplx d = r_(i, i);
      if (std::abs(d.imag()) > 1e-12 * scale || d.real() < -1e-12 * scale)
        throw std::invalid_argument("normalizing quantity needs a real non-negative diagonal");
      r_(i, i) = std::max(d.real(), 0.0);
    }
  }

  static NormalizingQuantity identity(Index p) { return NormalizingQuantity(Matrix::Identity(p, p)); }
  static NormalizingQuantity scalar(double value) {
    Matrix R(1, 1);
    R(0, 0) = value;
    return NormalizingQuantity(R);
  }

  Index p() const { return r_.rows(); }
  const Matrix& matrix() const { return r_; }
  Matrix gram() const { return r_.adjoint() * r_; }

  /// Member of S^+ (strictly positive diagonal).
  bool positive() const {
    for (Index i = 0; i < p(); ++i)
      if (!(r_(i, i).real() > 0.0)) return false;
    return p() > 0;
  }

  /// Some diagonal entry is zero relative to the largest one.
  bool degenerate(double rel_tol = 1e-12) const {
    double dmax = 0.0;
    for (Index i = 0; i < p(); ++i) dmax = std::max(dmax, r_(i, i).real());
    for (Index i = 0; i < p(); ++i)
      if (r_(i, i).real() <= rel_tol * dmax) return true;
    return dmax == 0.0;
  }

 private:
  Matrix r_;
};

/// n x p block vector, an element of S^N with n = N p.
class BlockVector {
 public:
  BlockVector() = default;
  explicit BlockVector(Matrix entries) : x_(std::move(entries)) {
    if (x_.cols() < 1 || x_.rows() % x_.cols() != 0)
      throw std::invalid_argument("block vector: rows must be a multiple of the block width");
  }

  Index n() const { return x_.rows(); }
  Index p() const { return x_.cols(); }
  Index blocks() const { return p() == 0 ? 0 : n() / p(); }
  const Matrix& matrix() const { return x_; }

 private:
  Matrix x_;
};

struct BlockNormalization {
  BlockVector V;
  NormalizingQuantity R;
};

/// Economy QR Z = V R with R in S^+. Rank-deficient Z is a block Arnoldi
/// breakdown, which the constructions do not cover.
inline BlockNormalization blk_normalize(const BlockVector& Z, double rank_tol = 1e-12) {
  const double scale = norm2(Z.matrix());
  if (scale == 0.0 || min_singular_value(Z.matrix()) <= rank_tol * scale)
    throw breakdown_error("blk_normalize: block vector is rank deficient");
  QRFactors f = qr(Z.matrix());
  return {BlockVector(std::move(f.Q)), NormalizingQuantity(std::move(f.R))};
}

/// <V, W> = W^* V.
inline Matrix blk_inner(const BlockVector& V, const BlockVector& W) {
  if (V.n() != W.n() || V.p() != W.p()) throw std::invalid_argument("blk_inner: dimension mismatch");
  return W.matrix().adjoint() * V.matrix();
}

/// |S| = cholu(S^* S), computed as the R factor of S so that singular S is
/// handled gracefully; check `degenerate()` on the result.
inline NormalizingQuantity blk_abs(const Matrix& S) {
  if (S.rows() != S.cols()) throw std::invalid_argument("blk_abs: square input required");
  return NormalizingQuantity(qr(S).R);
}

enum class LoewnerOrder { less, less_equal, greater, greater_equal, equal, incomparable };

inline const char* to_string(LoewnerOrder o) {
  switch (o) {
    case LoewnerOrder::less: return "less";
    case LoewnerOrder::less_equal: return "less-or-equal";
    case LoewnerOrder::greater: return "greater";
    case LoewnerOrder::greater_equal: return "greater-or-equal";
    case LoewnerOrder::equal: return "equal";
    case LoewnerOrder::incomparable: return "incomparable";
  }
  return "?";
}

/// Classifies R1 against R2 through the eigenvalues of R2^*R2 - R1^*R1, with
/// tolerance rel_tol * max(||R1||^2, ||R2||^2).
inline LoewnerOrder loewner_cmp(const NormalizingQuantity& R1, const NormalizingQuantity& R2,
                                double rel_tol = 1e-10) {
  if (R1.p() != R2.p()) throw std::invalid_argument("loewner_cmp: block sizes differ");
  const double s1 = norm2(R1.matrix());
  const double s2 = norm2(R2.matrix());
  const double tol = rel_tol * std::max(s1 * s1, s2 * s2);
  const RealVector lam = hermitian_eig(R2.gram() - R1.gram()).values;
  const double lo = lam.minCoeff();
  const double hi = lam.maxCoeff();
  if (std::abs(lo) <= tol && std::abs(hi) <= tol) return LoewnerOrder::equal;
  if (lo > tol) return LoewnerOrder::less;
  if (lo >= -tol) return LoewnerOrder::less_equal;
  if (hi < -tol) return LoewnerOrder::greater;
  if (hi <= tol) return LoewnerOrder::greater_equal;
  return LoewnerOrder::incomparable;
}

/// A unit u with u^*(F^*F - G^*G)u = 0, or nothing when the difference is
/// definite. For an indefinite difference the extreme eigenvectors u1 (>0)
/// and u2 (<0) are joined by v(t) = u1(1-t) + u2 t and the sign change is
/// bisected.
inline std::optional<Vector> equal_direction(const NormalizingQuantity& F, const NormalizingQuantity& G,
                                             double rel_tol = 1e-10) {
  if (F.p() != G.p()) throw std::invalid_argument("equal_direction: block sizes differ");
  const Matrix diff = hermitian_part(F.gram() - G.gram());
  const Index p = F.p();
  const HermitianEig he = hermitian_eig(diff);
  const double lo = he.values(0);
  const double hi = he.values(p - 1);
  const double scale = std::max(std::abs(lo), std::abs(hi));
  if (scale == 0.0) {
    Vector u = Vector::Zero(p);
    u(0) = 1.0;
    return u;
  }
  const double tol = rel_tol * scale;
  if (lo > tol || hi < -tol) return std::nullopt;
  if (std::abs(lo) <= tol) return Vector(he.vectors.col(0));
  if (std::abs(hi) <= tol) return Vector(he.vectors.col(p - 1));

  const Vector u1 = he.vectors.col(p - 1);
  const Vector u2 = he.vectors.col(0);
  auto f = [&](double t) {
    const Vector v = u1 * (1.0 - t) + u2 * t;
    return (v.adjoint() * diff * v)(0, 0).real();
  };
  double a = 0.0;
  double b = 1.0;
  while (b - a > 1e-12) {
    const double mid = 0.5 * (a + b);
    if (f(mid) > 0.0)
      a = mid;
    else
      b = mid;
  }
  const double t = 0.5 * (a + b);
  Vector v = u1 * (1.0 - t) + u2 * t;
  return Vector(v / v.norm());
}

}  // namespace prescribe
