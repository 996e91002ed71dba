#pragma once

/// \file prescribe/krylov_engine.hpp
/// \brief Reference (block) Arnoldi, GMRES, FOM and their restarted variants.
///
/// The scalar methods are the p = 1 instances of the block ones. Every run
/// keeps its full trace (Arnoldi factorization, per-step residual normalizing
/// quantities, FOM existence, Ritz values) so the trace can serve as the
/// oracle against which constructed systems are checked.

#include <stdexcept>
#include <vector>

#include "prescribe/block_algebra.hpp"
#include "prescribe/core_linalg.hpp"

namespace prescribe {

/// Relative threshold (w.r.t. ||A||_F) under which a new Arnoldi block is
/// treated as zero.
inline constexpr double kBreakdownTolerance = 1e-13;
/// ||H_under_j|| / sigma_min(H_j) above which the FOM iterate is reported
/// missing. A step whose Gram difference falls under kStagnationTolerance is
/// reported missing as well.
inline constexpr double kFomConditionLimit = 1e14;
/// Relative Gram-difference threshold for stagnation detection.
inline constexpr double kStagnationTolerance = 1e-10;

// ---------------------------------------------------------------------------
// Arnoldi
// ---------------------------------------------------------------------------

/// A V_j = V_{j+1} H_under, block upper Hessenberg H_under.
struct ArnoldiDecomp {
  Matrix V;        ///< n x (steps+1)p, or n x steps*p after a breakdown
  Matrix H_under;  ///< (steps+1)p x steps*p
  Index steps = 0;
  Index p = 1;
  /// The next block vanished: A V_steps = V_steps H_steps.
  bool breakdown = false;
  /// The final normalization (only) was rank deficient; p > 1.
  bool deficient_last = false;

  /// Leading jp x jp block of H_under.
  Matrix H(Index j) const { return H_under.topLeftCorner(j * p, j * p); }

  /// ||A V_j - V_{j+1} H_under||_F / ||A||_F.
  double relation_residual(const Matrix& A) const {
    const Index k = steps * p;
    const Matrix lhs = A * V.leftCols(k);
    const Matrix rhs = breakdown ? Matrix(V.leftCols(k) * H_under.topRows(k)) : Matrix(V * H_under);
    return (lhs - rhs).norm() / std::max(A.norm(), std::numeric_limits<double>::min());
  }

  double orthogonality_residual() const {
    return (V.adjoint() * V - Matrix::Identity(V.cols(), V.cols())).norm();
  }
};

/// Block Arnoldi with modified Gram-Schmidt and one reorthogonalization pass,
/// started from a block with orthonormal columns.
inline ArnoldiDecomp block_arnoldi_from(const Matrix& A, const Matrix& V1, Index steps) {
  if (A.rows() != A.cols() || A.rows() != V1.rows())
    throw std::invalid_argument("arnoldi: dimension mismatch");
  if (steps < 1) throw std::invalid_argument("arnoldi: need at least one step");
  const Index n = A.rows();
  const Index p = V1.cols();
  const double normA = A.norm();
  ArnoldiDecomp d;
  d.p = p;
  d.V = Matrix::Zero(n, (steps + 1) * p);
  d.H_under = Matrix::Zero((steps + 1) * p, steps * p);
  d.V.leftCols(p) = V1;
  for (Index j = 0; j < steps; ++j) {
    Matrix W = A * d.V.middleCols(j * p, p);
    for (int pass = 0; pass < 2; ++pass) {
      for (Index i = 0; i <= j; ++i) {
        const auto Vi = d.V.middleCols(i * p, p);
        const Matrix h = Vi.adjoint() * W;
        d.H_under.block(i * p, j * p, p, p) += h;
        W -= Vi * h;
      }
    }
    d.steps = j + 1;
    if (W.norm() <= kBreakdownTolerance * normA) {
      d.breakdown = true;
      d.V.conservativeResize(n, (j + 1) * p);
      d.H_under.conservativeResize((j + 2) * p, (j + 1) * p);
      d.H_under.bottomRows(p).setZero();
      return d;
    }
    QRFactors f = qr(W);
    if (f.rank_deficient || (p > 1 && min_singular_value(W) <= kBreakdownTolerance * normA)) {
      if (j + 1 < steps) throw breakdown_error("block Arnoldi breakdown (rank-deficient block)");
      d.deficient_last = true;
    }
    d.H_under.block((j + 1) * p, j * p, p, p) = f.R;
    d.V.middleCols((j + 1) * p, p) = f.Q;
  }
  return d;
}

inline ArnoldiDecomp arnoldi(const Matrix& A, const Vector& b, Index m) {
  const double beta = b.norm();
  if (beta == 0.0) throw std::invalid_argument("arnoldi: zero starting vector");
  return block_arnoldi_from(A, Matrix(b / beta), m);
}

inline ArnoldiDecomp block_arnoldi(const Matrix& A, const Matrix& B, Index M) {
  return block_arnoldi_from(A, blk_normalize(BlockVector(B)).V.matrix(), M);
}

/// Eigenvalues of H_j for j = 1..steps (jp values each).
inline std::vector<Multiset> ritz_per_step(const ArnoldiDecomp& d) {
  std::vector<Multiset> out;
  out.reserve(static_cast<std::size_t>(d.steps));
  for (Index j = 1; j <= d.steps; ++j) out.push_back(eig(d.H(j)));
  return out;
}

// ---------------------------------------------------------------------------
// traces
// ---------------------------------------------------------------------------

/// One cycle of (block) GMRES together with the FOM quantities of the same
/// Arnoldi factorization. Index j runs over iterations 0..steps.
struct CycleTrace {
  ArnoldiDecomp arnoldi;
  Matrix start;                                   ///< R_0 (n x p)
  std::vector<NormalizingQuantity> residual_nq;   ///< F_j = blnorm(R_j)
  std::vector<double> residual_norms;             ///< ||R_j||_F
  std::vector<Matrix> residual_coeffs;            ///< R_j = V_{j+1} coeff_j
  std::vector<Matrix> solutions;                  ///< X_j = V_j Y_j
  std::vector<bool> fom_exists;
  std::vector<NormalizingQuantity> fom_nq;        ///< blnorm of the FOM residual (if it exists)
  std::vector<double> fom_condition;              ///< ||H_under_j|| / sigma_min(H_j); 1 for j = 0
  std::vector<Multiset> ritz;                     ///< entry j-1 holds eig(H_j)
  Matrix end_residual;                            ///< R_steps (n x p)
  Matrix x_update;                                ///< V_steps Y_steps

  Index steps() const { return arnoldi.steps; }
};

struct StagnationEvent {
  Index cycle = 0;
  Index step = 0;    ///< iteration at which the (last) stagnating step ends
  Index length = 1;  ///< number of stagnating steps
  bool total = true;
  Vector direction;  ///< direction u in C^p (block, partial stagnation)
  bool end_of_cycle = false;
};

struct RunTrace {
  Index p = 1;
  Index cycle_length = 0;
  std::vector<CycleTrace> cycles;
  Matrix X;                                  ///< accumulated iterate
  std::vector<double> true_residual_norms;   ///< ||B - A X||_F after each cycle
  bool converged = false;
  std::vector<StagnationEvent> stagnation;

  /// Residual norms of cycle k (0-based).
  const std::vector<double>& resnorms(std::size_t k) const { return cycles.at(k).residual_norms; }
};

namespace detail {

/// GMRES and FOM quantities on top of a finished (block) Arnoldi run.
inline CycleTrace solve_cycle(ArnoldiDecomp dec, const Matrix& R0) {
  CycleTrace ct;
  const Index p = dec.p;
  const Index s = dec.steps;
  ct.start = dec.V.leftCols(p) * R0;
  ct.residual_nq.push_back(NormalizingQuantity(R0));
  ct.residual_norms.push_back(R0.norm());
  ct.residual_coeffs.push_back(R0);
  ct.solutions.push_back(Matrix::Zero(0, p));
  ct.fom_exists.push_back(true);
  ct.fom_nq.push_back(NormalizingQuantity(R0));
  ct.fom_condition.push_back(1.0);

  for (Index j = 1; j <= s; ++j) {
    const Matrix Hj = dec.H_under.topLeftCorner((j + 1) * p, j * p);
    Matrix rhs = Matrix::Zero((j + 1) * p, p);
    rhs.topRows(p) = R0;

    Eigen::HouseholderQR<Matrix> h(Hj);
    const Matrix Q = h.householderQ();
    const Matrix z = Q.adjoint() * rhs;
    const Matrix Y = h.matrixQR().topLeftCorner(j * p, j * p).triangularView<Eigen::Upper>().solve(
        z.topRows(j * p));
    const Matrix coeff = Q.rightCols(p) * z.bottomRows(p);
    const NormalizingQuantity F(qr(z.bottomRows(p)).R);
    ct.residual_norms.push_back(F.matrix().norm());
    ct.residual_nq.push_back(F);
    ct.residual_coeffs.push_back(coeff);
    ct.solutions.push_back(Y);

    const Matrix Hsq = Hj.topRows(j * p);
    // scaled by the full Hessenberg column block so that a 1 x 1 H_1 = 0 + eps
    // does not pass as well conditioned
    const double smin = min_singular_value(Hsq);
    const double c = smin > 0.0 ? norm2(Hj) / smin : std::numeric_limits<double>::infinity();
    ct.fom_condition.push_back(c);
    const Matrix G0 = ct.residual_nq[static_cast<std::size_t>(j - 1)].gram();
    const double g0 = norm2(G0);
    const bool stagnant = g0 > 0.0 && hermitian_eig(G0 - F.gram()).values(0) <= kStagnationTolerance * g0;
    if (c <= kFomConditionLimit && !stagnant) {
      const Matrix YF = Hsq.partialPivLu().solve(rhs.topRows(j * p));
      const Matrix resF = -Hj.bottomRows(p) * YF;
      ct.fom_exists.push_back(true);
      ct.fom_nq.push_back(NormalizingQuantity(qr(resF).R));
    } else {
      ct.fom_exists.push_back(false);
      ct.fom_nq.push_back(NormalizingQuantity(Matrix::Zero(p, p)));
    }
    ct.ritz.push_back(eig(Hsq));
  }

  const Matrix& last = ct.residual_coeffs.back();
  if (dec.breakdown)
    ct.end_residual = dec.V.leftCols(s * p) * last.topRows(s * p);
  else
    ct.end_residual = dec.V.leftCols(last.rows()) * last;
  ct.x_update = dec.V.leftCols(s * p) * ct.solutions.back();
  ct.arnoldi = std::move(dec);
  return ct;
}

}  // namespace detail

std::vector<StagnationEvent> detect_stagnation(const RunTrace& trace, double rel_tol = kStagnationTolerance);

/// Restarted block GMRES with constant cycle length M; p = 1 gives the scalar
/// method. The next cycle starts from the Arnoldi-coordinate residual
/// V_{M+1} T with T = Q_T R_T, so F_0^{(k+1)} = F_M^{(k)} exactly.
inline RunTrace restarted_block_gmres(const Matrix& A, const Matrix& B, Index M, Index cycles) {
  if (A.rows() != A.cols() || A.rows() != B.rows()) throw std::invalid_argument("gmres: dimension mismatch");
  if (cycles < 1 || M < 1) throw std::invalid_argument("gmres: need M >= 1 and at least one cycle");
  RunTrace tr;
  tr.p = B.cols();
  tr.cycle_length = M;
  tr.X = Matrix::Zero(B.rows(), B.cols());
  const double normB = B.norm();
  if (normB == 0.0) throw std::invalid_argument("gmres: zero right-hand side");

  BlockNormalization start = blk_normalize(BlockVector(B));
  Matrix V1 = start.V.matrix();
  Matrix R0 = start.R.matrix();
  for (Index k = 0; k < cycles; ++k) {
    CycleTrace ct = detail::solve_cycle(block_arnoldi_from(A, V1, M), R0);
    tr.X += ct.x_update;
    tr.true_residual_norms.push_back((B - A * tr.X).norm());
    const bool done = ct.arnoldi.breakdown || ct.residual_norms.back() <= 1e-14 * normB;
    if (!done && k + 1 < cycles) {
      const Matrix& T = ct.residual_coeffs.back();
      QRFactors f = qr(T);
      if (f.rank_deficient) throw breakdown_error("restart: end-of-cycle block residual is rank deficient");
      V1 = ct.arnoldi.V * f.Q;
      R0 = f.R;
    }
    tr.cycles.push_back(std::move(ct));
    if (done) {
      tr.converged = true;
      break;
    }
  }
  tr.stagnation = detect_stagnation(tr);
  return tr;
}

inline RunTrace restarted_gmres(const Matrix& A, const Vector& b, Index m, Index cycles) {
  return restarted_block_gmres(A, Matrix(b), m, cycles);
}

/// One GMRES cycle of length m.
inline RunTrace gmres_run(const Matrix& A, const Vector& b, Index m) { return restarted_gmres(A, b, m, 1); }

/// Same trace as gmres_run; the FOM fields (fom_exists, fom_nq) are the
/// quantities of interest.
inline RunTrace fom_run(const Matrix& A, const Vector& b, Index m) { return gmres_run(A, b, m); }

inline RunTrace block_gmres_run(const Matrix& A, const Matrix& B, Index M) {
  return restarted_block_gmres(A, B, M, 1);
}

inline RunTrace block_fom_run(const Matrix& A, const Matrix& B, Index M) { return block_gmres_run(A, B, M); }

// ---------------------------------------------------------------------------
// stagnation
// ---------------------------------------------------------------------------

/// Single-step stagnation (G_{j-1} - G_j singular) at every iteration, plus
/// one end-of-cycle event per cycle carrying the largest s with
/// G_{steps-s} - G_steps singular. Total stagnation when the difference
/// vanishes; otherwise the direction is the null eigenvector.
inline std::vector<StagnationEvent> detect_stagnation(const RunTrace& trace, double rel_tol) {
  std::vector<StagnationEvent> out;
  for (std::size_t k = 0; k < trace.cycles.size(); ++k) {
    const CycleTrace& ct = trace.cycles[k];
    const Index s = ct.steps();
    auto classify = [&](Index from, Index to, StagnationEvent& ev) {
      const Matrix G0 = ct.residual_nq[static_cast<std::size_t>(from)].gram();
      const Matrix G1 = ct.residual_nq[static_cast<std::size_t>(to)].gram();
      const double scale = norm2(G0);
      if (scale == 0.0) return false;
      const HermitianEig he = hermitian_eig(G0 - G1);
      const double tol = rel_tol * scale;
      if (he.values(0) > tol) return false;
      ev.total = he.values.maxCoeff() <= tol;
      ev.direction = he.vectors.col(0);
      return true;
    };
    for (Index j = 1; j <= s; ++j) {
      StagnationEvent ev;
      ev.cycle = static_cast<Index>(k);
      ev.step = j;
      if (classify(j - 1, j, ev)) out.push_back(std::move(ev));
    }
    StagnationEvent best;
    bool found = false;
    for (Index len = 1; len <= s; ++len) {
      StagnationEvent ev;
      ev.cycle = static_cast<Index>(k);
      ev.step = s;
      ev.length = len;
      ev.end_of_cycle = true;
      if (!classify(s - len, s, ev)) break;
      best = std::move(ev);
      found = true;
    }
    if (found) out.push_back(std::move(best));
  }
  return out;
}

}  // namespace prescribe
