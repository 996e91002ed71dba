#pragma once

/// \file prescribe/prescriber.hpp
/// \brief Matrices with prescribed GMRES and restarted GMRES behavior.
///
/// A Hessenberg matrix is factored as H = T C T^-1 with T = D U, D positive
/// diagonal, U unit upper triangular and C a companion matrix. The first row
/// of T^-1 fixes the residual norms, the columns of U^-1 fix the Ritz values
/// and C fixes the spectrum. Restarted constructions chain one such
/// (m+1) x (m+1) factor per cycle.

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "prescribe/core_linalg.hpp"
#include "prescribe/detail/assembly.hpp"
#include "prescribe/krylov_engine.hpp"

namespace prescribe {

// ---------------------------------------------------------------------------
// admissibility
// ---------------------------------------------------------------------------

struct Violation {
  std::string code;     ///< stable identifier, e.g. "non-strict-transition"
  std::string message;
  Index cycle = -1;     ///< 0-based, -1 when not applicable
  Index step = -1;
  std::optional<Vector> witness;  ///< equal-direction witness (block case)
};

struct AdmissibilityReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }

  void add(std::string code, std::string message, Index cycle = -1, Index step = -1) {
    violations.push_back({std::move(code), std::move(message), cycle, step, std::nullopt});
  }

  std::string summary() const {
    std::ostringstream os;
    for (const Violation& v : violations) {
      os << v.code;
      if (v.cycle >= 0) os << " [cycle " << v.cycle + 1;
      if (v.step >= 0) os << (v.cycle >= 0 ? ", " : " [") << "step " << v.step;
      if (v.cycle >= 0 || v.step >= 0) os << "]";
      os << ": " << v.message << "\n";
    }
    return os.str();
  }
};

/// Thrown by the construct_* functions on an inadmissible prescription.
class inadmissible_error : public error {
 public:
  explicit inadmissible_error(AdmissibilityReport r)
      : error("inadmissible prescription:\n" + r.summary()), report_(std::move(r)) {}
  const AdmissibilityReport& report() const { return report_; }

 private:
  AdmissibilityReport report_;
};

namespace detail {

inline bool contains_zero(const Multiset& s) {
  for (const cplx& z : s)
    if (z == cplx(0.0)) return true;
  return false;
}

inline bool finite(const Multiset& s) {
  for (const cplx& z : s)
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
  return true;
}

/// Equal residual values up to round-off.
inline bool flat(double prev, double next) { return std::abs(prev - next) <= 1e-14 * prev; }

/// Monotonicity and stagnation compatibility of one residual sequence
/// f_0..f_{N-1} against Ritz sets theta_1..theta_{N-1}.
inline void check_sequence(AdmissibilityReport& rep, const std::vector<double>& f, const std::vector<Multiset>& ritz,
                           Index cycle) {
  for (std::size_t j = 0; j < f.size(); ++j)
    if (!(f[j] > 0.0) || !std::isfinite(f[j]))
      rep.add("non-positive-residual", "residual values must be finite and positive", cycle, static_cast<Index>(j));
  for (std::size_t j = 0; j < ritz.size(); ++j) {
    const Index step = static_cast<Index>(j) + 1;
    if (ritz[j].size() != j + 1) {
      rep.add("ritz-count", "step " + std::to_string(step) + " needs exactly " + std::to_string(step) + " Ritz values",
              cycle, step);
      continue;
    }
    if (!finite(ritz[j])) rep.add("non-finite", "Ritz values must be finite", cycle, step);
  }
  for (std::size_t j = 1; j < f.size(); ++j) {
    const Index step = static_cast<Index>(j);
    if (f[j] > f[j - 1] && !flat(f[j - 1], f[j])) {
      rep.add("increasing-residual", "residual norms must be non-increasing", cycle, step);
      continue;
    }
    if (j - 1 >= ritz.size() || ritz[j - 1].size() != j) continue;
    const bool stag = flat(f[j - 1], f[j]);
    const bool zero = contains_zero(ritz[j - 1]);
    if (stag && !zero)
      rep.add("stagnation-incompatible",
              "stagnation requires a singular H_j (zero Ritz value), but H_" + std::to_string(step) + " is nonsingular",
              cycle, step);
    if (!stag && zero)
      rep.add("stagnation-incompatible",
              "a zero Ritz value at step " + std::to_string(step) + " forces stagnation, but the residual decreases",
              cycle, step);
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// cycle factors
// ---------------------------------------------------------------------------

/// H = D U C (D U)^-1 of size N x N with its ingredients. `g` holds the
/// residual coefficients after N-1 GMRES steps on (H, e_1 f_0).
struct CycleFactor {
  RealVector D;
  Matrix U;
  Matrix U_inv;
  Matrix C;
  Matrix H;
  Vector g;
  double cond_T = 1.0;

  Matrix T() const { return D.cast<cplx>().asDiagonal() * U; }
};

/// Column j+1 of U^-1 carries the monic coefficients of prod (z - theta) over
/// theta in ritz[j-1], i.e. the negated c_i^(j) of poly_from_roots.
inline Matrix build_U_inv(const std::vector<Multiset>& ritz) {
  const Index N = static_cast<Index>(ritz.size()) + 1;
  Matrix Ui = Matrix::Identity(N, N);
  for (Index j = 1; j < N; ++j) {
    const Multiset& th = ritz[static_cast<std::size_t>(j - 1)];
    if (static_cast<Index>(th.size()) != j) throw std::invalid_argument("build_U_inv: step j needs j Ritz values");
    const PolyCoeffs pc = poly_from_roots(th);
    for (Index i = 0; i < j; ++i) Ui(i, j) = -pc.c[static_cast<std::size_t>(i)];
  }
  return Ui;
}

/// d_1 = f_0 and d_i = |(U^-1)_{1,i}| / sqrt(f_{i-1}^-2 - f_{i-2}^-2); d_i = 1
/// at stagnation steps where both vanish.
inline RealVector build_D(const std::vector<double>& f, const Matrix& U_inv) {
  const Index N = static_cast<Index>(f.size());
  if (U_inv.rows() != N) throw std::invalid_argument("build_D: size mismatch");
  RealVector d(N);
  d(0) = f[0];
  for (Index i = 1; i < N; ++i) {
    const double fa = f[static_cast<std::size_t>(i - 1)];
    const double fb = f[static_cast<std::size_t>(i)];
    const double num = std::abs(U_inv(0, i));
    const bool num_zero = num <= 1e-14 * std::max(1.0, U_inv.col(i).norm());
    const bool den_zero = detail::flat(fa, fb);
    if (num_zero && den_zero) {
      d(i) = 1.0;
    } else if (num_zero || den_zero) {
      throw unsupported_error("build_D: stagnation at step " + std::to_string(i) +
                              " does not match a zero Ritz value");
    } else {
      d(i) = num / std::sqrt(1.0 / (fb * fb) - 1.0 / (fa * fa));
    }
  }
  return d;
}

/// Hessenberg factor of size N = f.size() from residual values f_0..f_{N-1},
/// Ritz sets theta_1..theta_{N-1} and N spectrum values.
inline CycleFactor build_cycle_hessenberg(const std::vector<double>& f, const std::vector<Multiset>& ritz,
                                          const Multiset& spectrum) {
  const Index N = static_cast<Index>(f.size());
  if (N < 1 || static_cast<Index>(ritz.size()) != N - 1 || static_cast<Index>(spectrum.size()) != N)
    throw std::invalid_argument("build_cycle_hessenberg: inconsistent sizes");
  CycleFactor cf;
  cf.U_inv = build_U_inv(ritz);
  cf.U = upper_inverse(cf.U_inv);
  cf.D = build_D(f, cf.U_inv);
  cf.C = companion(poly_from_roots(spectrum));
  const Matrix T = cf.T();
  const Matrix Tinv = upper_inverse(T);
  cf.H = T * cf.C * Tinv;
  for (Index j = 0; j + 1 < N; ++j)
    for (Index i = j + 2; i < N; ++i) cf.H(i, j) = 0.0;
  cf.cond_T = cond2(T);
  const double fl = f.back();
  cf.g = Tinv.row(0).adjoint() * (fl * fl);
  return cf;
}

// ---------------------------------------------------------------------------
// full GMRES
// ---------------------------------------------------------------------------

/// Single run of n steps: n residual norms, Ritz sets for steps 1..n-1 and the
/// n eigenvalues of A.
struct FullPrescription {
  std::vector<double> f;
  std::vector<Multiset> ritz;
  Multiset eigenvalues;
  BasisChoice basis;

  Index n() const { return static_cast<Index>(f.size()); }
};

struct FullConstruction {
  Matrix A;
  Vector b;
  Matrix V;  ///< orthonormal basis, A = V H V^*
  CycleFactor factor;
};

inline AdmissibilityReport validate_admissible(const FullPrescription& p) {
  AdmissibilityReport rep;
  const Index n = p.n();
  if (n < 1) {
    rep.add("size", "need at least one residual value");
    return rep;
  }
  if (static_cast<Index>(p.ritz.size()) != n - 1) rep.add("ritz-count", "need Ritz sets for steps 1..n-1");
  if (static_cast<Index>(p.eigenvalues.size()) != n) rep.add("eigenvalue-count", "need exactly n eigenvalues");
  if (!detail::finite(p.eigenvalues)) rep.add("non-finite", "eigenvalues must be finite");
  if (detail::contains_zero(p.eigenvalues))
    rep.add("singular-matrix", "a zero eigenvalue prevents convergence at step n");
  detail::check_sequence(rep, p.f, p.ritz, -1);
  return rep;
}

inline FullConstruction construct_full_gmres(const FullPrescription& p) {
  AdmissibilityReport rep = validate_admissible(p);
  if (!rep.ok()) throw inadmissible_error(std::move(rep));
  FullConstruction out;
  out.factor = build_cycle_hessenberg(p.f, p.ritz, p.eigenvalues);
  out.V = p.basis.realize(p.n());
  out.A = out.V * out.factor.H * out.V.adjoint();
  out.b = out.V.col(0) * p.f[0];
  return out;
}

// ---------------------------------------------------------------------------
// restarted GMRES
// ---------------------------------------------------------------------------

/// l cycles of length m with n = m l. f[k][j] for j = 0..m-1; f[k+1][0] is the
/// transition value after cycle k. ritz[k][j-1] holds theta_j^(k), j = 1..m;
/// in the last cycle theta_m is the spectrum of the closing block.
struct ScalarPrescription {
  Index n = 0;
  Index m = 0;
  Index cycles = 0;
  std::vector<std::vector<double>> f;
  std::vector<std::vector<Multiset>> ritz;
  /// m+1 eigenvalues of each H^(k); empty means {1, ..., m+1}.
  std::vector<Multiset> spectra;
  /// Residual after m steps of the last (m+1)-dimensional cycle factor;
  /// only h_{m+1,m}^(l) depends on it. Defaults to f_{m-1}^(l) / 2.
  std::optional<double> final_residual;
  BasisChoice basis;

  std::vector<double> cycle_values(Index k) const {
    std::vector<double> v = f.at(static_cast<std::size_t>(k));
    if (k + 1 < cycles)
      v.push_back(f.at(static_cast<std::size_t>(k + 1)).front());
    else
      v.push_back(final_residual.value_or(v.back() / 2.0));
    return v;
  }

  Multiset cycle_spectrum(Index k) const {
    if (static_cast<std::size_t>(k) < spectra.size() && !spectra[static_cast<std::size_t>(k)].empty())
      return spectra[static_cast<std::size_t>(k)];
    Multiset s;
    for (Index i = 1; i <= m + 1; ++i) s.emplace_back(static_cast<double>(i));
    return s;
  }
};

inline AdmissibilityReport validate_admissible(const ScalarPrescription& p) {
  AdmissibilityReport rep;
  if (p.m < 1 || p.cycles < 1) {
    rep.add("size", "need m >= 1 and at least one cycle");
    return rep;
  }
  if (p.n != p.m * p.cycles) rep.add("size", "n must equal m * cycles");
  if (static_cast<Index>(p.f.size()) != p.cycles || static_cast<Index>(p.ritz.size()) != p.cycles) {
    rep.add("size", "need residual values and Ritz sets for every cycle");
    return rep;
  }
  for (Index k = 0; k < p.cycles; ++k) {
    const auto& fk = p.f[static_cast<std::size_t>(k)];
    const auto& rk = p.ritz[static_cast<std::size_t>(k)];
    if (static_cast<Index>(fk.size()) != p.m) rep.add("size", "each cycle needs m residual values", k);
    if (static_cast<Index>(rk.size()) != p.m) rep.add("size", "each cycle needs m Ritz sets", k);
    if (static_cast<Index>(fk.size()) != p.m || static_cast<Index>(rk.size()) != p.m) continue;
    const Multiset spec = p.cycle_spectrum(k);
    if (static_cast<Index>(spec.size()) != p.m + 1) rep.add("eigenvalue-count", "cycle spectra need m+1 values", k);
    if (!detail::finite(spec)) rep.add("non-finite", "cycle spectrum must be finite", k);
    const std::vector<double> v = p.cycle_values(k);
    detail::check_sequence(rep, fk, std::vector<Multiset>(rk.begin(), rk.end() - 1), k);
    const double last = v[static_cast<std::size_t>(p.m - 1)];
    const double next = v.back();
    if (k + 1 < p.cycles) {
      if (!(next < last) || detail::flat(last, next))
        rep.add("non-strict-transition",
                "the residual must strictly decrease across the restart (end-of-cycle stagnation is unsupported)", k,
                p.m);
    } else if (!(next > 0.0) || !(next < last) || detail::flat(last, next)) {
      rep.add("final-residual", "final residual must lie strictly between 0 and the last prescribed value", k, p.m);
    }
    if (rk.back().size() == static_cast<std::size_t>(p.m)) {
      if (detail::contains_zero(rk.back()))
        rep.add("stagnation-incompatible",
                k + 1 < p.cycles ? "a zero Ritz value at step m forces end-of-cycle stagnation"
                                 : "a zero Ritz value at step m of the last cycle makes A singular",
                k, p.m);
      if (!detail::finite(rk.back())) rep.add("non-finite", "Ritz values must be finite", k, p.m);
    } else {
      rep.add("ritz-count", "step m needs exactly m Ritz values", k, p.m);
    }
  }
  return rep;
}

struct ScalarConstruction : RestartedConstruction {
  std::vector<CycleFactor> factors;
};

inline ScalarConstruction construct_restarted(const ScalarPrescription& p) {
  AdmissibilityReport rep = validate_admissible(p);
  if (!rep.ok()) throw inadmissible_error(std::move(rep));
  ScalarConstruction out;
  out.n = p.n;
  out.m = p.m;
  out.cycles = p.cycles;
  out.p = 1;
  std::vector<Matrix> H_under;
  std::vector<Matrix> gamma;
  for (Index k = 0; k < p.cycles; ++k) {
    CycleFactor cf = build_cycle_hessenberg(p.cycle_values(k), p.ritz[static_cast<std::size_t>(k)], p.cycle_spectrum(k));
    H_under.push_back(cf.H.leftCols(p.m));
    if (k + 1 < p.cycles) gamma.push_back(Matrix(cf.g / cf.g.norm()));
    out.cond_T.push_back(cf.cond_T);
    out.factors.push_back(std::move(cf));
  }
  detail::assemble(out, H_under, gamma);
  out.Q = p.basis.realize(p.n);
  out.A = detail::realize_operator(out);
  out.B = out.Q.col(0) * p.f[0][0];
  return out;
}

// ---------------------------------------------------------------------------
// restarted Krylov matrix
// ---------------------------------------------------------------------------

struct KrylovRankReport {
  Matrix K;
  Index rank = 0;
  double min_diag = 0.0;   ///< smallest |R_ii| of the column-normalized K
  double threshold = 0.0;  ///< 1e-10 * ||K||
  bool full_rank = false;
  RunTrace trace;
};

/// [K^(1) ... K^(l)] with K^(k) = [R_0, A R_0, ..., A^{m-1} R_0] built from the
/// cycle-start residuals of a restarted run. Columns are normalized before the
/// QR rank test so that growing powers of A do not mask small diagonals.
inline KrylovRankReport restarted_block_krylov_matrix(const Matrix& A, const Matrix& B, Index M, Index cycles) {
  KrylovRankReport rep;
  rep.trace = restarted_block_gmres(A, B, M, cycles);
  const Index n = A.rows();
  const Index p = B.cols();
  std::vector<Matrix> cols;
  for (const CycleTrace& ct : rep.trace.cycles) {
    Matrix W = ct.start;
    for (Index j = 0; j < M; ++j) {
      cols.push_back(W);
      W = A * W;
    }
  }
  rep.K = Matrix::Zero(n, static_cast<Index>(cols.size()) * p);
  for (std::size_t i = 0; i < cols.size(); ++i) rep.K.middleCols(static_cast<Index>(i) * p, p) = cols[i];
  Matrix Kn = rep.K;
  for (Index j = 0; j < Kn.cols(); ++j) {
    const double nj = Kn.col(j).norm();
    if (nj > 0.0) Kn.col(j) /= nj;
  }
  rep.threshold = 1e-10 * norm2(Kn);
  Eigen::HouseholderQR<Matrix> h(Kn);
  const Index k = std::min(Kn.rows(), Kn.cols());
  rep.min_diag = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < k; ++i) {
    const double d = std::abs(h.matrixQR()(i, i));
    rep.min_diag = std::min(rep.min_diag, d);
    if (d > rep.threshold) ++rep.rank;
  }
  if (k == 0) rep.min_diag = 0.0;
  rep.full_rank = Kn.cols() >= n && rep.rank == n;
  return rep;
}

inline KrylovRankReport restarted_krylov_matrix(const Matrix& A, const Vector& b, Index m, Index cycles) {
  return restarted_block_krylov_matrix(A, Matrix(b), m, cycles);
}

}  // namespace prescribe
