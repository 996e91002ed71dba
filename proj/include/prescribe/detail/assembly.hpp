#pragma once

/// \file prescribe/detail/assembly.hpp
/// \brief Assembly of a restarted construction from its cycle Hessenberg
/// matrices, shared by the scalar (p = 1) and block code paths.

#include <stdexcept>
#include <vector>

#include "prescribe/core_linalg.hpp"

namespace prescribe {

/// Where the system lives: the standard coordinates, a seeded random unitary,
/// or a caller-provided unitary. Applied as one global similarity Q.
struct BasisChoice {
  enum class Kind { standard, random_unitary, explicit_unitary };
  Kind kind = Kind::standard;
  std::uint64_t seed = 0;
  Matrix unitary;

  static BasisChoice standard_basis() { return {}; }
  static BasisChoice random(std::uint64_t seed) { return {Kind::random_unitary, seed, {}}; }
  static BasisChoice explicit_basis(Matrix Q) { return {Kind::explicit_unitary, 0, std::move(Q)}; }

  Matrix realize(Index n) const {
    switch (kind) {
      case Kind::standard: return Matrix::Identity(n, n);
      case Kind::random_unitary: return random_unitary(n, seed);
      case Kind::explicit_unitary:
        if (unitary.rows() != n || unitary.cols() != n)
          throw std::invalid_argument("explicit basis has the wrong dimension");
        if ((unitary.adjoint() * unitary - Matrix::Identity(n, n)).norm() > 1e-10)
          throw std::invalid_argument("explicit basis is not unitary");
        return unitary;
    }
    return Matrix::Identity(n, n);
  }
};

/// Output of a restarted (block) construction. Coordinates: A = Q Vt Ht Vt^-1 Q^*,
/// with Vt, Ht expressed in the standard basis before Q is applied.
struct RestartedConstruction {
  Index n = 0;
  Index m = 0;       ///< cycle length (M in the block case)
  Index cycles = 0;  ///< number of cycles
  Index p = 1;
  Matrix A;
  Matrix B;          ///< n x p right-hand side
  Matrix Q;          ///< global unitary
  Matrix V_tilde;    ///< [V^(1) ... V^(l)] before Q
  Matrix H_tilde;    ///< current assembled matrix (includes the tail update)
  Matrix tail;       ///< c in H_tilde(c) = H_tilde + c E_N^T; empty when absent
  Matrix last_subdiag;  ///< h_{m+1,m} of the last cycle (p x p)
  std::vector<double> cond_T;  ///< cond(DU) per cycle
  double cond_V = 1.0;

  Vector b() const { return B.col(0); }

  /// V^(k) in final coordinates, k = 0..cycles-1.
  Matrix basis(Index k) const { return Q * V_tilde.middleCols(k * m * p, m * p); }

  /// Ht without the tail update.
  Matrix base_H_tilde() const {
    Matrix H = H_tilde;
    if (tail.size() != 0) H.rightCols(p) -= tail;
    return H;
  }
};

namespace detail {

/// Builds Vt and Ht from the cycle data. `H_under[k]` is the
/// (m+1)p x mp matrix of cycle k, `gamma[k]` ((m+1)p x p, orthonormal
/// columns) the normalized end-of-cycle residual coefficients for k < l-1.
inline void assemble(RestartedConstruction& c, const std::vector<Matrix>& H_under,
                     const std::vector<Matrix>& gamma) {
  const Index p = c.p;
  const Index mp = c.m * p;
  const Index n = c.n;
  const Index l = c.cycles;
  if (static_cast<Index>(H_under.size()) != l || static_cast<Index>(gamma.size()) + 1 != l)
    throw std::invalid_argument("assemble: cycle data has the wrong length");

  c.V_tilde = Matrix::Zero(n, n);
  c.H_tilde = Matrix::Zero(n, n);
  c.V_tilde.leftCols(mp) = Matrix::Identity(n, mp);
  for (Index k = 0; k < l; ++k) {
    const Index off = k * mp;
    if (k + 1 < l) {
      const Matrix& g = gamma[static_cast<std::size_t>(k)];
      const Matrix g_top = g.topRows(mp);
      const Matrix g_bot = g.bottomRows(p);
      if (min_singular_value(g_bot) <= 1e-14 * std::max(1.0, norm2(g)))
        throw unsupported_error("end-of-cycle stagnation: the residual has no component on the new basis block");
      // [V^(k), E] = [V^(k), V^(k+1) E_1] M_k^-1 with M_k = [[I, g_top], [0, g_bot]]
      Matrix Minv = Matrix::Identity(mp + p, mp + p);
      const Matrix g_bot_inv = g_bot.inverse();
      Minv.topRightCorner(mp, p) = -g_top * g_bot_inv;
      Minv.bottomRightCorner(p, p) = g_bot_inv;
      c.H_tilde.block(off, off, mp + p, mp) = Minv * H_under[static_cast<std::size_t>(k)];
      // V^(k+1) = [[V^(k), E_{km+1}] gamma, E_{km+2} ... E_{(k+1)m}]
      Matrix ext(n, mp + p);
      ext.leftCols(mp) = c.V_tilde.middleCols(off, mp);
      ext.rightCols(p) = Matrix::Identity(n, n).middleCols(off + mp, p);
      c.V_tilde.middleCols(off + mp, p) = ext * g;
      if (mp > p) c.V_tilde.middleCols(off + mp + p, mp - p) = Matrix::Identity(n, n).middleCols(off + mp + p, mp - p);
    } else {
      c.H_tilde.block(off, off, mp, mp) = H_under[static_cast<std::size_t>(k)].topRows(mp);
      c.last_subdiag = H_under[static_cast<std::size_t>(k)].bottomRightCorner(p, p);
    }
  }
  c.cond_V = cond2(c.V_tilde);
}

/// A = Q Vt Ht Vt^-1 Q^*.
inline Matrix realize_operator(const RestartedConstruction& c) {
  const Matrix VH = c.V_tilde * c.H_tilde;
  // X Vt = VH  <=>  Vt^T X^T = VH^T
  const Matrix X = c.V_tilde.transpose().partialPivLu().solve(VH.transpose()).transpose();
  return c.Q * X * c.Q.adjoint();
}

}  // namespace detail

/// Union of the eigenvalues of the diagonal mp x mp blocks of Ht; Ht is
/// block lower triangular, so this is the spectrum of A. A tail update fills
/// the last column above the diagonal and the spectrum of the whole Ht is
/// returned instead.
inline Multiset eigenvalues_from_blocks(const RestartedConstruction& c) {
  if (c.tail.size() != 0) return eig(c.H_tilde);
  const Index mp = c.m * c.p;
  Multiset out;
  for (Index k = 0; k < c.cycles; ++k) {
    const Multiset e = eig(c.H_tilde.block(k * mp, k * mp, mp, mp));
    out.insert(out.end(), e.begin(), e.end());
  }
  return out;
}

/// H_tilde(c) = H_tilde + c E_N^T with c = c_hat * h_{m+1,m}^(l); c_hat in the
/// Vt coordinates (n x p). Only the last Arnoldi step of the last cycle sees
/// the update. A zero c_hat returns the construction unchanged.
inline RestartedConstruction tail_rank_one(const RestartedConstruction& base, const Matrix& c_hat) {
  if (c_hat.rows() != base.n || c_hat.cols() != base.p)
    throw std::invalid_argument("tail_rank_one: c_hat must be n x p");
  if (c_hat.isZero(0.0)) return base;
  RestartedConstruction out = base;
  const Matrix c = c_hat * base.last_subdiag;
  out.H_tilde = base.base_H_tilde();
  out.H_tilde.rightCols(base.p) += c;
  out.tail = c;
  out.A = detail::realize_operator(out);
  return out;
}

/// Closed-form residual of an iterate X: Q Vt (E_1 F_0 - Ht Y - C Y_N),
/// Y = Vt^-1 Q^* X, with Ht the matrix before the tail update.
inline Matrix closed_form_residual(const RestartedConstruction& c, const Matrix& X) {
  const Matrix Y = c.V_tilde.partialPivLu().solve(c.Q.adjoint() * X);
  const Matrix rhs = c.V_tilde.partialPivLu().solve(c.Q.adjoint() * c.B);
  Matrix inner = rhs - c.base_H_tilde() * Y;
  if (c.tail.size() != 0) inner -= c.tail * Y.bottomRows(c.p);
  return c.Q * c.V_tilde * inner;
}

}  // namespace prescribe
