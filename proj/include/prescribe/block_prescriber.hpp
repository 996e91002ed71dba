#pragma once

/// \file prescribe/block_prescriber.hpp
/// \brief Block counterparts of the prescriber: matrix/right-hand-side pairs
/// (A, B) with prescribed block GMRES normalizing quantities, Ritz latent
/// roots and spectra, single run or restarted.

#include <string>
#include <vector>

#include "prescribe/block_algebra.hpp"
#include "prescribe/core_linalg.hpp"
#include "prescribe/detail/assembly.hpp"
#include "prescribe/krylov_engine.hpp"
#include "prescribe/prescriber.hpp"

namespace prescribe {

// ---------------------------------------------------------------------------
// matrix polynomials
// ---------------------------------------------------------------------------

/// Monic matrix polynomial M(X) = X^j - sum_k C_k X^k given either by its
/// coefficients C_0..C_{j-1} or by j right solvents.
struct MatrixPolynomialSpec {
  std::vector<Matrix> coeffs;
  std::vector<Matrix> solvents;

  static MatrixPolynomialSpec from_coeffs(std::vector<Matrix> c) { return {std::move(c), {}}; }
  static MatrixPolynomialSpec from_solvents(std::vector<Matrix> s) { return {{}, std::move(s)}; }

  Index degree() const { return static_cast<Index>(coeffs.empty() ? solvents.size() : coeffs.size()); }
};

/// Coefficients with sum_k C_k S_i^k = S_i^j for all solvents S_i, from the
/// block Vandermonde system. Throws when the Vandermonde matrix has
/// condition number of 1e12 or more, naming the closest pair of solvents.
inline std::vector<Matrix> solvents_to_coeffs(const std::vector<Matrix>& solvents) {
  const Index j = static_cast<Index>(solvents.size());
  if (j < 1) throw std::invalid_argument("solvents_to_coeffs: need at least one solvent");
  const Index p = solvents[0].rows();
  for (const Matrix& S : solvents)
    if (S.rows() != p || S.cols() != p) throw std::invalid_argument("solvents_to_coeffs: solvents must be p x p");

  Matrix V(j * p, j * p);
  Matrix rhs(p, j * p);
  for (Index i = 0; i < j; ++i) {
    Matrix P = Matrix::Identity(p, p);
    for (Index k = 0; k < j; ++k) {
      V.block(k * p, i * p, p, p) = P;
      P = P * solvents[static_cast<std::size_t>(i)];
    }
    rhs.middleCols(i * p, p) = P;
  }
  if (cond2(V) >= 1e12) {
    Index a = 0;
    Index b = std::min<Index>(1, j - 1);
    double best = std::numeric_limits<double>::infinity();
    for (Index s = 0; s < j; ++s)
      for (Index t = s + 1; t < j; ++t) {
        const double d = (solvents[static_cast<std::size_t>(s)] - solvents[static_cast<std::size_t>(t)]).norm();
        if (d < best) {
          best = d;
          a = s;
          b = t;
        }
      }
    throw numerical_error("solvents_to_coeffs: block Vandermonde matrix is singular; closest solvents are #" +
                          std::to_string(a + 1) + " and #" + std::to_string(b + 1));
  }
  // [C_0 ... C_{j-1}] V = rhs
  const Matrix C = V.transpose().partialPivLu().solve(rhs.transpose()).transpose();
  std::vector<Matrix> out;
  for (Index k = 0; k < j; ++k) out.push_back(C.middleCols(k * p, p));
  return out;
}

inline std::vector<Matrix> resolve_coeffs(const MatrixPolynomialSpec& spec) {
  if (!spec.coeffs.empty()) return spec.coeffs;
  return solvents_to_coeffs(spec.solvents);
}

/// Identity blocks on the block subdiagonal, C_k in the last block column.
inline Matrix block_companion(const std::vector<Matrix>& coeffs) {
  const Index j = static_cast<Index>(coeffs.size());
  if (j < 1) throw std::invalid_argument("block_companion: degree must be >= 1");
  const Index p = coeffs[0].rows();
  Matrix C = Matrix::Zero(j * p, j * p);
  for (Index i = 1; i < j; ++i) C.block(i * p, (i - 1) * p, p, p) = Matrix::Identity(p, p);
  for (Index i = 0; i < j; ++i) C.block(i * p, (j - 1) * p, p, p) = coeffs[static_cast<std::size_t>(i)];
  return C;
}

/// Latent roots of the polynomial (eigenvalues of its block companion).
inline Multiset latent_roots(const MatrixPolynomialSpec& spec) { return eig(block_companion(resolve_coeffs(spec))); }

// ---------------------------------------------------------------------------
// block cycle factors
// ---------------------------------------------------------------------------

struct BlockCycleFactor {
  std::vector<Matrix> D;  ///< diagonal blocks, each in S+
  std::vector<Matrix> Q;  ///< unitary factors of the first-row relation (Q_1 = I)
  Matrix U;
  Matrix U_inv;
  Matrix C;
  Matrix H;
  Matrix G;  ///< residual coefficients after N-1 block steps
  double cond_T = 1.0;

  Index p() const { return D.empty() ? 0 : D[0].rows(); }

  Matrix T() const {
    const Index p = this->p();
    const Index N = static_cast<Index>(D.size());
    Matrix Dm = Matrix::Zero(N * p, N * p);
    for (Index k = 0; k < N; ++k) Dm.block(k * p, k * p, p, p) = D[static_cast<std::size_t>(k)];
    return Dm * U;
  }
};

/// Block column j+1 of U^-1 holds -C_0^(j) .. -C_{j-1}^(j).
inline Matrix build_block_U_inv(const std::vector<std::vector<Matrix>>& ritz_coeffs, Index p) {
  const Index N = static_cast<Index>(ritz_coeffs.size()) + 1;
  Matrix Ui = Matrix::Identity(N * p, N * p);
  for (Index j = 1; j < N; ++j) {
    const auto& c = ritz_coeffs[static_cast<std::size_t>(j - 1)];
    if (static_cast<Index>(c.size()) != j) throw std::invalid_argument("build_block_U_inv: step j needs degree j");
    for (Index i = 0; i < j; ++i) Ui.block(i * p, j * p, p, p) = -c[static_cast<std::size_t>(i)];
  }
  return Ui;
}

struct BlockDU {
  std::vector<Matrix> D;
  std::vector<Matrix> Q;
};

/// D_1 = F_0; for k >= 2, with T_k the PSD root of G_{k-1}^-1 - G_{k-2}^-1
/// (G = F^* F), D_k is the R factor of T_k^-1 (U^-1)_{1,k}. Total stagnation
/// (both zero) gives D_k = I; partial stagnation is unsupported.
inline BlockDU build_block_DU(const std::vector<NormalizingQuantity>& F, const Matrix& U_inv) {
  const Index N = static_cast<Index>(F.size());
  if (N < 1) throw std::invalid_argument("build_block_DU: empty sequence");
  const Index p = F[0].p();
  if (U_inv.rows() != N * p) throw std::invalid_argument("build_block_DU: size mismatch");
  BlockDU out;
  out.D.push_back(F[0].matrix());
  out.Q.push_back(Matrix::Identity(p, p));
  for (Index k = 1; k < N; ++k) {
    const Matrix Ga = F[static_cast<std::size_t>(k - 1)].gram();
    const Matrix Gb = F[static_cast<std::size_t>(k)].gram();
    const Matrix Gb_inv = Gb.inverse();
    const Matrix delta = hermitian_part(Gb_inv - Ga.inverse());
    const Matrix Uk = U_inv.block(0, k * p, p, p);
    const bool u_zero = Uk.norm() <= 1e-14 * std::max(1.0, U_inv.middleCols(k * p, p).norm());
    const bool d_zero = delta.norm() <= 1e-12 * norm2(Gb_inv);
    if (u_zero && d_zero) {
      out.D.push_back(Matrix::Identity(p, p));
      out.Q.push_back(Matrix::Identity(p, p));
      continue;
    }
    if (u_zero || d_zero)
      throw unsupported_error("build_block_DU: total stagnation at step " + std::to_string(k) +
                              " does not match a vanishing coefficient C_0");
    const Matrix Tk = principal_sqrt_psd(delta);
    if (min_singular_value(Tk) <= 1e-10 * norm2(Tk))
      throw unsupported_error("build_block_DU: partial stagnation at step " + std::to_string(k) + " is not supported");
    const Matrix W = Tk.partialPivLu().solve(Uk);
    QRFactors f = qr(W);
    if (f.rank_deficient)
      throw unsupported_error("build_block_DU: singular coefficient C_0 at step " + std::to_string(k));
    out.D.push_back(f.R);
    out.Q.push_back(f.Q);
  }
  return out;
}

/// Block Hessenberg factor of block size N = F.size().
inline BlockCycleFactor build_block_cycle(const std::vector<NormalizingQuantity>& F,
                                          const std::vector<std::vector<Matrix>>& ritz_coeffs,
                                          const std::vector<Matrix>& spectrum_coeffs) {
  const Index N = static_cast<Index>(F.size());
  if (N < 1 || static_cast<Index>(ritz_coeffs.size()) != N - 1 || static_cast<Index>(spectrum_coeffs.size()) != N)
    throw std::invalid_argument("build_block_cycle: inconsistent sizes");
  const Index p = F[0].p();
  BlockCycleFactor cf;
  cf.U_inv = build_block_U_inv(ritz_coeffs, p);
  cf.U = upper_inverse(cf.U_inv);
  BlockDU du = build_block_DU(F, cf.U_inv);
  cf.D = std::move(du.D);
  cf.Q = std::move(du.Q);
  cf.C = block_companion(spectrum_coeffs);
  const Matrix T = cf.T();
  const Matrix Tinv = upper_inverse(T);
  cf.H = T * cf.C * Tinv;
  for (Index j = 0; j + 1 < N; ++j) cf.H.block((j + 2) * p, j * p, (N - j - 2) * p, p).setZero();
  cf.cond_T = cond2(T);
  cf.G = Tinv.topRows(p).adjoint() * F.back().gram();
  return cf;
}

// ---------------------------------------------------------------------------
// admissibility
// ---------------------------------------------------------------------------

namespace detail {

inline std::string step_label(Index step) { return "step " + std::to_string(step); }

/// One step F_prev -> F_next. `strict` demands a Loewner decrease;
/// otherwise total stagnation is allowed if it matches C0 == 0.
inline void check_block_step(AdmissibilityReport& rep, const NormalizingQuantity& prev, const NormalizingQuantity& next,
                             const Matrix* C0, bool strict, Index cycle, Index step) {
  const LoewnerOrder o = loewner_cmp(next, prev);
  auto add = [&](std::string code, std::string msg) {
    rep.add(std::move(code), std::move(msg), cycle, step);
    rep.violations.back().witness = equal_direction(prev, next);
  };
  const bool c0_zero = C0 != nullptr && C0->norm() == 0.0;
  const bool c0_singular = C0 != nullptr && !c0_zero && min_singular_value(*C0) <= 1e-12 * norm2(*C0);
  switch (o) {
    case LoewnerOrder::less:
      if (c0_zero || c0_singular)
        add("stagnation-incompatible", "a singular coefficient C_0 forces stagnation, but the residual decreases");
      return;
    case LoewnerOrder::equal:
      if (strict)
        add("non-strict-transition", "the block residual must strictly decrease across the restart");
      else if (!c0_zero)
        add("stagnation-incompatible", "total stagnation requires C_0 = 0 for this step");
      return;
    case LoewnerOrder::less_equal:
      add(strict ? "non-strict-transition" : "partial-stagnation-unsupported",
          "the Gram difference is singular (stagnation in some direction)");
      return;
    case LoewnerOrder::incomparable:
      add("incomparable", "consecutive normalizing quantities are not Loewner comparable");
      return;
    case LoewnerOrder::greater:
    case LoewnerOrder::greater_equal:
      add("increasing-residual", "normalizing quantities must be Loewner non-increasing");
      return;
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// single block GMRES run
// ---------------------------------------------------------------------------

/// N block steps: F_0..F_{N-1}, Ritz polynomials of degree 1..N-1 and the
/// degree-N polynomial carrying the spectrum.
struct FullBlockPrescription {
  Index p = 1;
  std::vector<NormalizingQuantity> F;
  std::vector<MatrixPolynomialSpec> ritz;
  MatrixPolynomialSpec spectrum;
  BasisChoice basis;

  Index N() const { return static_cast<Index>(F.size()); }
};

struct FullBlockConstruction {
  Matrix A;
  Matrix B;
  Matrix V;
  BlockCycleFactor factor;
};

namespace detail {

inline bool resolve_into(AdmissibilityReport& rep, const MatrixPolynomialSpec& s, Index degree, Index p,
                         std::vector<Matrix>& out, Index cycle, Index step) {
  if (s.degree() != degree) {
    rep.add("ritz-count", "polynomial needs degree " + std::to_string(degree), cycle, step);
    return false;
  }
  for (const Matrix& M : s.coeffs.empty() ? s.solvents : s.coeffs)
    if (M.rows() != p || M.cols() != p || !all_finite(M)) {
      rep.add("size", "polynomial data must be finite p x p matrices", cycle, step);
      return false;
    }
  try {
    out = resolve_coeffs(s);
  } catch (const error& e) {
    rep.add("singular-vandermonde", e.what(), cycle, step);
    return false;
  }
  return true;
}

inline void check_positive(AdmissibilityReport& rep, const NormalizingQuantity& F, Index p, Index cycle, Index step) {
  if (F.p() != p)
    rep.add("size", "normalizing quantity has the wrong block size", cycle, step);
  else if (!F.positive() || F.degenerate())
    rep.add("non-positive-residual", "normalizing quantities must lie in S+", cycle, step);
}

}  // namespace detail

inline AdmissibilityReport validate_block_admissible(const FullBlockPrescription& pr) {
  AdmissibilityReport rep;
  const Index N = pr.N();
  if (N < 1 || pr.p < 1) {
    rep.add("size", "need p >= 1 and at least one normalizing quantity");
    return rep;
  }
  if (static_cast<Index>(pr.ritz.size()) != N - 1) {
    rep.add("ritz-count", "need Ritz polynomials for steps 1..N-1");
    return rep;
  }
  for (Index j = 0; j < N; ++j) detail::check_positive(rep, pr.F[static_cast<std::size_t>(j)], pr.p, -1, j);
  if (!rep.ok()) return rep;
  std::vector<Matrix> coeffs;
  if (detail::resolve_into(rep, pr.spectrum, N, pr.p, coeffs, -1, N)) {
    const Matrix& C0 = coeffs[0];
    if (min_singular_value(C0) <= 1e-12 * std::max(1.0, norm2(C0)))
      rep.add("singular-matrix", "a zero latent root prevents convergence at the last step");
  }
  for (Index j = 1; j < N; ++j) {
    std::vector<Matrix> c;
    const bool have = detail::resolve_into(rep, pr.ritz[static_cast<std::size_t>(j - 1)], j, pr.p, c, -1, j);
    detail::check_block_step(rep, pr.F[static_cast<std::size_t>(j - 1)], pr.F[static_cast<std::size_t>(j)],
                             have ? &c[0] : nullptr, false, -1, j);
  }
  return rep;
}

inline FullBlockConstruction construct_full_block_gmres(const FullBlockPrescription& pr) {
  AdmissibilityReport rep = validate_block_admissible(pr);
  if (!rep.ok()) throw inadmissible_error(std::move(rep));
  std::vector<std::vector<Matrix>> rc;
  for (const auto& s : pr.ritz) rc.push_back(resolve_coeffs(s));
  FullBlockConstruction out;
  out.factor = build_block_cycle(pr.F, rc, resolve_coeffs(pr.spectrum));
  const Index n = pr.N() * pr.p;
  out.V = pr.basis.realize(n);
  out.A = out.V * out.factor.H * out.V.adjoint();
  out.B = out.V.leftCols(pr.p) * pr.F[0].matrix();
  return out;
}

// ---------------------------------------------------------------------------
// restarted block GMRES
// ---------------------------------------------------------------------------

/// l cycles of M block steps, n = M l p. F[k][j], j = 0..M-1, with F[k+1][0]
/// the transition value; ritz[k][j-1] has degree j (j = 1..M).
struct BlockPrescription {
  Index n = 0;
  Index M = 0;
  Index cycles = 0;
  Index p = 1;
  std::vector<std::vector<NormalizingQuantity>> F;
  std::vector<std::vector<MatrixPolynomialSpec>> ritz;
  /// Degree-(M+1) polynomial per cycle; empty means solvents I, 2I, ..., (M+1)I.
  std::vector<MatrixPolynomialSpec> spectra;
  /// Defaults to F_{M-1}^(l) / 2.
  std::optional<NormalizingQuantity> final_residual;
  BasisChoice basis;

  std::vector<NormalizingQuantity> cycle_values(Index k) const {
    std::vector<NormalizingQuantity> v = F.at(static_cast<std::size_t>(k));
    if (k + 1 < cycles)
      v.push_back(F.at(static_cast<std::size_t>(k + 1)).front());
    else
      v.push_back(final_residual.value_or(NormalizingQuantity(v.back().matrix() / 2.0)));
    return v;
  }

  MatrixPolynomialSpec cycle_spectrum(Index k) const {
    if (static_cast<std::size_t>(k) < spectra.size() && spectra[static_cast<std::size_t>(k)].degree() > 0)
      return spectra[static_cast<std::size_t>(k)];
    std::vector<Matrix> s;
    for (Index i = 1; i <= M + 1; ++i) s.push_back(Matrix::Identity(p, p) * static_cast<double>(i));
    return MatrixPolynomialSpec::from_solvents(std::move(s));
  }
};

inline AdmissibilityReport validate_block_admissible(const BlockPrescription& pr) {
  AdmissibilityReport rep;
  if (pr.M < 1 || pr.cycles < 1 || pr.p < 1) {
    rep.add("size", "need M >= 1, p >= 1 and at least one cycle");
    return rep;
  }
  if (pr.n != pr.M * pr.cycles * pr.p) rep.add("size", "n must equal M * cycles * p");
  if (static_cast<Index>(pr.F.size()) != pr.cycles || static_cast<Index>(pr.ritz.size()) != pr.cycles) {
    rep.add("size", "need normalizing quantities and Ritz data for every cycle");
    return rep;
  }
  for (Index k = 0; k < pr.cycles; ++k) {
    const auto& Fk = pr.F[static_cast<std::size_t>(k)];
    const auto& Rk = pr.ritz[static_cast<std::size_t>(k)];
    if (static_cast<Index>(Fk.size()) != pr.M || static_cast<Index>(Rk.size()) != pr.M) {
      rep.add("size", "each cycle needs M normalizing quantities and M Ritz polynomials", k);
      continue;
    }
    for (Index j = 0; j < pr.M; ++j) detail::check_positive(rep, Fk[static_cast<std::size_t>(j)], pr.p, k, j);
    if (k + 1 == pr.cycles && pr.final_residual) detail::check_positive(rep, *pr.final_residual, pr.p, k, pr.M);
  }
  if (!rep.ok()) return rep;
  for (Index k = 0; k < pr.cycles; ++k) {
    const std::vector<NormalizingQuantity> v = pr.cycle_values(k);
    std::vector<Matrix> sc;
    detail::resolve_into(rep, pr.cycle_spectrum(k), pr.M + 1, pr.p, sc, k, pr.M + 1);
    for (Index j = 1; j <= pr.M; ++j) {
      std::vector<Matrix> c;
      const bool have =
          detail::resolve_into(rep, pr.ritz[static_cast<std::size_t>(k)][static_cast<std::size_t>(j - 1)], j, pr.p, c, k, j);
      detail::check_block_step(rep, v[static_cast<std::size_t>(j - 1)], v[static_cast<std::size_t>(j)],
                               have ? &c[0] : nullptr, j == pr.M, k, j);
    }
  }
  return rep;
}

struct BlockConstruction : RestartedConstruction {
  std::vector<BlockCycleFactor> factors;
};

inline BlockConstruction construct_restarted_block(const BlockPrescription& pr) {
  AdmissibilityReport rep = validate_block_admissible(pr);
  if (!rep.ok()) throw inadmissible_error(std::move(rep));
  BlockConstruction out;
  out.n = pr.n;
  out.m = pr.M;
  out.cycles = pr.cycles;
  out.p = pr.p;
  std::vector<Matrix> H_under;
  std::vector<Matrix> gamma;
  for (Index k = 0; k < pr.cycles; ++k) {
    std::vector<std::vector<Matrix>> rc;
    for (const auto& s : pr.ritz[static_cast<std::size_t>(k)]) rc.push_back(resolve_coeffs(s));
    BlockCycleFactor cf = build_block_cycle(pr.cycle_values(k), rc, resolve_coeffs(pr.cycle_spectrum(k)));
    H_under.push_back(cf.H.leftCols(pr.M * pr.p));
    if (k + 1 < pr.cycles) gamma.push_back(qr(cf.G).Q);
    out.cond_T.push_back(cf.cond_T);
    out.factors.push_back(std::move(cf));
  }
  detail::assemble(out, H_under, gamma);
  out.Q = pr.basis.realize(pr.n);
  out.A = detail::realize_operator(out);
  out.B = out.Q.leftCols(pr.p) * pr.F[0][0].matrix();
  return out;
}

/// H_tilde(C) = H_tilde + C E_N^T with C = C_hat H_{M+1,M}^(l).
inline RestartedConstruction block_tail_rank_one(const RestartedConstruction& base, const Matrix& C_hat) {
  return tail_rank_one(base, C_hat);
}

/// Stagnation events of a (block) trace: total when the Gram matrices agree,
/// partial with the null direction u of the Gram difference otherwise.
inline std::vector<StagnationEvent> detect_direction_stagnation(const RunTrace& trace) {
  return detect_stagnation(trace);
}

}  // namespace prescribe
