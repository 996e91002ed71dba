#pragma once

/// \file prescribe/verifier.hpp
/// \brief Solver-grounded verification of constructed systems.
///
/// Every verdict re-runs the reference (block) GMRES on the constructed pair
/// and compares the trace with the prescription. The structural identities
/// (mirroring, peak-plateau, Krylov rank) have their own checks.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include "prescribe/block_prescriber.hpp"
#include "prescribe/krylov_engine.hpp"
#include "prescribe/prescriber.hpp"

namespace prescribe {

struct Check {
  std::string name;
  bool pass = false;
  double deviation = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

struct VerificationReport {
  std::string scenario;
  std::vector<Check> checks;
  std::vector<std::string> warnings;

  bool pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
  }

  const Check* find(const std::string& name) const {
    for (const Check& c : checks)
      if (c.name == name) return &c;
    return nullptr;
  }

  void add(std::string name, double deviation, double tol, std::string detail = {}) {
    checks.push_back({std::move(name), deviation <= tol, deviation, tol, std::move(detail)});
  }
};

struct Tolerances {
  double trace = 1e-8;
  double ritz = 1e-8;
  double eigenvalues = 1e-8;
  double relation = 1e-10;
  double coupling = 1e-10;
  double warn_condition = 1e12;
  double refuse_condition = 1e14;
  double widened = 1e-6;
};

/// Greedy matching of two multisets: values of `want` sorted by (real, imag)
/// are paired with the nearest unused value of `got`. Returns the largest
/// |a - b| / max(1, |b|), or +inf when the sizes differ. Conservative for
/// tightly clustered values.
inline double multiset_distance(const Multiset& got, const Multiset& want) {
  if (got.size() != want.size()) return std::numeric_limits<double>::infinity();
  Multiset w = want;
  std::sort(w.begin(), w.end(), [](const cplx& a, const cplx& b) {
    return a.real() < b.real() || (a.real() == b.real() && a.imag() < b.imag());
  });
  std::vector<bool> used(got.size(), false);
  double worst = 0.0;
  for (const cplx& b : w) {
    std::size_t best = got.size();
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < got.size(); ++i) {
      if (used[i]) continue;
      const double d = std::abs(got[i] - b);
      if (d < bd) {
        bd = d;
        best = i;
      }
    }
    used[best] = true;
    worst = std::max(worst, bd / std::max(1.0, std::abs(b)));
  }
  return worst;
}

namespace detail {

inline std::string at(Index k, Index j) {
  return "cycle " + std::to_string(k + 1) + " step " + std::to_string(j);
}

/// Applies the conditioning guard and returns the tolerance scale factor
/// (1 or widened/trace); adds a failing "conditioning" check above the
/// refusal threshold.
inline std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

inline double condition_guard(VerificationReport& rep, const std::vector<double>& cond_T, double cond_V,
                              const Tolerances& tol) {
  double worst = cond_V;
  double growth = cond_V * std::numeric_limits<double>::epsilon();
  for (double c : cond_T) {
    worst = std::max(worst, c);
    growth *= c;
  }
  // a restart passes the perturbed residual through every cycle factor
  if (cond_T.size() > 1 && growth > tol.widened) {
    rep.warnings.push_back("rounding across restarts may reach " + sci(growth) +
                           " (product of the cycle condition numbers times eps)");
  }
  if (worst > tol.refuse_condition) {
    rep.warnings.push_back("condition number " + sci(worst) + " is above the certification limit");
    rep.checks.push_back({"conditioning", false, worst, tol.refuse_condition, "refusing to certify"});
    return tol.widened / tol.trace;
  }
  if (worst > tol.warn_condition) {
    rep.warnings.push_back("condition number " + sci(worst) + " widens the tolerances to " +
                           sci(tol.widened));
    rep.checks.push_back({"conditioning", true, worst, tol.refuse_condition, "tolerances widened"});
    return tol.widened / tol.trace;
  }
  rep.checks.push_back({"conditioning", true, worst, tol.refuse_condition, {}});
  return 1.0;
}

/// Shared body of verify_scalar / verify_block. `F[k][j]` are the prescribed
/// normalizing quantities, `ritz[k][j-1]` the prescribed Ritz multisets and
/// `next[k]` the value the coupling vector must have (k < l-1).
inline VerificationReport verify_restarted(const RestartedConstruction& c,
                                           const std::vector<std::vector<Matrix>>& F,
                                           const std::vector<std::vector<Multiset>>& ritz,
                                           const std::vector<Matrix>& gammas_raw, const std::vector<Matrix>& next,
                                           const Tolerances& tol) {
  VerificationReport rep;
  const double widen = condition_guard(rep, c.cond_T, c.cond_V, tol);
  const Index p = c.p;
  const bool tail = c.tail.size() != 0;

  RunTrace tr;
  try {
    tr = restarted_block_gmres(c.A, c.B, c.m, c.cycles);
  } catch (const error& e) {
    rep.checks.push_back({"residual_trace", false, std::numeric_limits<double>::infinity(), tol.trace * widen,
                          std::string("solver failed: ") + e.what()});
    return rep;
  }

  // residual trace
  {
    double worst = 0.0;
    std::string where;
    const double lim = tol.trace * widen;
    for (Index k = 0; k < c.cycles; ++k) {
      if (static_cast<std::size_t>(k) >= tr.cycles.size()) {
        worst = std::numeric_limits<double>::infinity();
        if (where.empty()) where = "run ended before " + at(k, 0);
        break;
      }
      const CycleTrace& ct = tr.cycles[static_cast<std::size_t>(k)];
      for (Index j = 0; j < c.m; ++j) {
        double d = std::numeric_limits<double>::infinity();
        if (j <= ct.steps()) {
          const Matrix& want = F[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
          d = (ct.residual_nq[static_cast<std::size_t>(j)].matrix() - want).norm() / want.norm();
        }
        if (d > lim && where.empty()) where = "first deviation at " + at(k, j);
        worst = std::max(worst, d);
      }
      // the closing step of the last cycle is not prescribed; its residual
      // vanishes in exact arithmetic but is sensitive to the non-normality
      // of the last block
      if (k + 1 == c.cycles && !tail && ct.steps() == c.m) {
        const double d = ct.residual_norms.back() / F[0][0].norm();
        if (d > lim)
          rep.warnings.push_back("final residual of the last cycle is " + sci(d) +
                                 " relative to the initial one");
      }
    }
    rep.add("residual_trace", worst, lim, where);
  }

  // Ritz values
  {
    double worst = 0.0;
    std::string where;
    const double lim = tol.ritz * widen;
    for (Index k = 0; k < c.cycles && static_cast<std::size_t>(k) < tr.cycles.size(); ++k) {
      const CycleTrace& ct = tr.cycles[static_cast<std::size_t>(k)];
      for (Index j = 1; j <= c.m; ++j) {
        if (tail && k + 1 == c.cycles && j == c.m) continue;
        const Multiset& want = ritz[static_cast<std::size_t>(k)][static_cast<std::size_t>(j - 1)];
        const double d = j <= ct.steps() ? multiset_distance(ct.ritz[static_cast<std::size_t>(j - 1)], want)
                                         : std::numeric_limits<double>::infinity();
        if (d > lim && where.empty()) where = "first deviation at " + at(k, j);
        worst = std::max(worst, d);
      }
    }
    rep.add("ritz_values", worst, lim, where);
  }

  // eigenvalues of A against the diagonal blocks of H_tilde
  {
    double d = std::numeric_limits<double>::infinity();
    try {
      d = multiset_distance(eig(c.A), eigenvalues_from_blocks(c));
    } catch (const error&) {
    }
    rep.add("eigenvalues", d, tol.eigenvalues * widen);
  }

  // A Q Vt = Q Vt Ht
  {
    const Matrix QV = c.Q * c.V_tilde;
    const double d = (c.A * QV - QV * c.H_tilde).norm() / (std::max(c.A.norm(), 1e-300) * QV.norm());
    rep.add("arnoldi_relation", d, tol.relation * widen);
  }

  // cycle coupling: blnorm(g^(k)) equals the next start and V^(k+1) E_1 is
  // the normalized end-of-cycle residual
  {
    double worst = 0.0;
    std::string where;
    for (Index k = 0; k + 1 < c.cycles; ++k) {
      const Matrix& g = gammas_raw[static_cast<std::size_t>(k)];
      const Matrix& want = next[static_cast<std::size_t>(k)];
      double d = (qr(g).R - want).norm() / want.norm();
      if (static_cast<std::size_t>(k) < tr.cycles.size()) {
        const Matrix& R = tr.cycles[static_cast<std::size_t>(k)].end_residual;
        const Matrix V1 = c.basis(k + 1).leftCols(p);
        // principal cosines between span(V1) and span(R) all equal to one
        const Matrix Qr = qr(R).Q;
        Eigen::JacobiSVD<Matrix> svd(V1.adjoint() * Qr);
        d = std::max(d, 1.0 - svd.singularValues().minCoeff());
      }
      if (d > tol.coupling * widen && where.empty()) where = "cycle " + std::to_string(k + 1);
      worst = std::max(worst, d);
    }
    rep.add("cycle_coupling", worst, tol.coupling * widen, where);
  }
  return rep;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// scalar
// ---------------------------------------------------------------------------

inline VerificationReport verify_full(const FullConstruction& c, const FullPrescription& p,
                                      const Tolerances& tol = {}) {
  VerificationReport rep;
  const double widen = detail::condition_guard(rep, {c.factor.cond_T}, 1.0, tol);
  const Index n = p.n();
  RunTrace tr = gmres_run(c.A, c.b, n);
  const CycleTrace& ct = tr.cycles.front();
  {
    double worst = 0.0;
    std::string where;
    for (Index j = 0; j < n; ++j) {
      const double d = j <= ct.steps() ? std::abs(ct.residual_norms[static_cast<std::size_t>(j)] - p.f[static_cast<std::size_t>(j)]) /
                                             p.f[static_cast<std::size_t>(j)]
                                       : std::numeric_limits<double>::infinity();
      if (d > tol.trace * widen && where.empty()) where = "first deviation at step " + std::to_string(j);
      worst = std::max(worst, d);
    }
    const double last = ct.steps() == n ? ct.residual_norms.back() / p.f[0] : std::numeric_limits<double>::infinity();
    if (last > tol.trace * widen && where.empty()) where = "residual at step n is not zero";
    rep.add("residual_trace", std::max(worst, last), tol.trace * widen, where);
  }
  {
    double worst = 0.0;
    for (Index j = 1; j < n; ++j)
      worst = std::max(worst, j <= ct.steps() ? multiset_distance(ct.ritz[static_cast<std::size_t>(j - 1)],
                                                                  p.ritz[static_cast<std::size_t>(j - 1)])
                                              : std::numeric_limits<double>::infinity());
    rep.add("ritz_values", worst, tol.ritz * widen);
  }
  rep.add("eigenvalues", multiset_distance(eig(c.A), p.eigenvalues), tol.eigenvalues * widen);
  return rep;
}

inline VerificationReport verify_scalar(const ScalarConstruction& c, const ScalarPrescription& p,
                                        const Tolerances& tol = {}) {
  std::vector<std::vector<Matrix>> F;
  for (Index k = 0; k < p.cycles; ++k) {
    std::vector<Matrix> row;
    for (double v : p.f[static_cast<std::size_t>(k)]) row.push_back(Matrix::Constant(1, 1, v));
    F.push_back(std::move(row));
  }
  std::vector<Matrix> g;
  std::vector<Matrix> next;
  for (Index k = 0; k + 1 < p.cycles; ++k) {
    g.push_back(c.factors[static_cast<std::size_t>(k)].g);
    next.push_back(Matrix::Constant(1, 1, p.f[static_cast<std::size_t>(k + 1)][0]));
  }
  VerificationReport rep = detail::verify_restarted(c, F, p.ritz, g, next, tol);
  // spectra of the cycle Hessenberg matrices
  double worst = 0.0;
  for (Index k = 0; k < p.cycles; ++k)
    worst = std::max(worst, multiset_distance(eig(c.factors[static_cast<std::size_t>(k)].H), p.cycle_spectrum(k)));
  rep.add("cycle_spectra", worst, rep.find("eigenvalues")->tolerance);
  return rep;
}

// ---------------------------------------------------------------------------
// block
// ---------------------------------------------------------------------------

inline VerificationReport verify_full_block(const FullBlockConstruction& c, const FullBlockPrescription& p,
                                            const Tolerances& tol = {}) {
  VerificationReport rep;
  const double widen = detail::condition_guard(rep, {c.factor.cond_T}, 1.0, tol);
  const Index N = p.N();
  RunTrace tr = block_gmres_run(c.A, c.B, N);
  const CycleTrace& ct = tr.cycles.front();
  {
    double worst = 0.0;
    std::string where;
    for (Index j = 0; j < N; ++j) {
      const Matrix& want = p.F[static_cast<std::size_t>(j)].matrix();
      const double d = j <= ct.steps()
                           ? (ct.residual_nq[static_cast<std::size_t>(j)].matrix() - want).norm() / want.norm()
                           : std::numeric_limits<double>::infinity();
      if (d > tol.trace * widen && where.empty()) where = "first deviation at step " + std::to_string(j);
      worst = std::max(worst, d);
    }
    const double last = ct.steps() == N ? ct.residual_norms.back() / p.F[0].matrix().norm()
                                        : std::numeric_limits<double>::infinity();
    rep.add("residual_trace", std::max(worst, last), tol.trace * widen, where);
  }
  {
    double worst = 0.0;
    for (Index j = 1; j < N; ++j)
      worst = std::max(worst, j <= ct.steps() ? multiset_distance(ct.ritz[static_cast<std::size_t>(j - 1)],
                                                                  latent_roots(p.ritz[static_cast<std::size_t>(j - 1)]))
                                              : std::numeric_limits<double>::infinity());
    rep.add("ritz_values", worst, tol.ritz * widen);
  }
  rep.add("eigenvalues", multiset_distance(eig(c.A), latent_roots(p.spectrum)), tol.eigenvalues * widen);
  return rep;
}

inline VerificationReport verify_block(const BlockConstruction& c, const BlockPrescription& p,
                                       const Tolerances& tol = {}) {
  std::vector<std::vector<Matrix>> F;
  std::vector<std::vector<Multiset>> ritz;
  for (Index k = 0; k < p.cycles; ++k) {
    std::vector<Matrix> row;
    for (const NormalizingQuantity& q : p.F[static_cast<std::size_t>(k)]) row.push_back(q.matrix());
    F.push_back(std::move(row));
    std::vector<Multiset> rr;
    for (const MatrixPolynomialSpec& s : p.ritz[static_cast<std::size_t>(k)]) rr.push_back(latent_roots(s));
    ritz.push_back(std::move(rr));
  }
  std::vector<Matrix> g;
  std::vector<Matrix> next;
  for (Index k = 0; k + 1 < p.cycles; ++k) {
    g.push_back(c.factors[static_cast<std::size_t>(k)].G);
    next.push_back(p.F[static_cast<std::size_t>(k + 1)][0].matrix());
  }
  VerificationReport rep = detail::verify_restarted(c, F, ritz, g, next, tol);
  double worst = 0.0;
  for (Index k = 0; k < p.cycles; ++k)
    worst = std::max(worst, multiset_distance(eig(c.factors[static_cast<std::size_t>(k)].H), latent_roots(p.cycle_spectrum(k))));
  rep.add("cycle_spectra", worst, rep.find("eigenvalues")->tolerance);
  return rep;
}

// ---------------------------------------------------------------------------
// structural checks
// ---------------------------------------------------------------------------

struct MirrorFinding {
  Index cycle = 0;          ///< cycle whose end stagnates (0-based)
  Index length = 0;         ///< s
  Index mirrored = 0;       ///< flat steps at the start of the next cycle along u
  double deviation = 0.0;   ///< |u^*(G_0 - G_s)u| / ||G_0|| in the next cycle
  Vector direction;
};

struct MirroringReport {
  Check check;
  std::vector<MirrorFinding> findings;
};

/// Every end-of-cycle stagnation of length s along u must be followed by s
/// flat steps along u at the start of the next cycle.
inline MirroringReport check_mirroring(const RunTrace& trace, double tol = 1e-8) {
  MirroringReport out;
  out.check = {"mirroring", true, 0.0, tol, {}};
  for (const StagnationEvent& ev : trace.stagnation) {
    if (!ev.end_of_cycle || static_cast<std::size_t>(ev.cycle + 1) >= trace.cycles.size()) continue;
    const CycleTrace& nx = trace.cycles[static_cast<std::size_t>(ev.cycle + 1)];
    MirrorFinding f;
    f.cycle = ev.cycle;
    f.length = ev.length;
    f.direction = ev.direction;
    const Matrix G0 = nx.residual_nq[0].gram();
    const double scale = norm2(G0);
    auto along = [&](Index j) {
      const Matrix Gj = nx.residual_nq[static_cast<std::size_t>(j)].gram();
      return std::abs((ev.direction.adjoint() * (G0 - Gj) * ev.direction)(0, 0)) / scale;
    };
    if (ev.length > nx.steps()) {
      f.deviation = std::numeric_limits<double>::infinity();
    } else {
      f.deviation = along(ev.length);
    }
    while (f.mirrored < nx.steps() && along(f.mirrored + 1) <= tol) ++f.mirrored;
    if (!(f.deviation <= tol) || f.mirrored < f.length) {
      out.check.pass = false;
      if (out.check.detail.empty())
        out.check.detail = "cycle " + std::to_string(ev.cycle + 2) + " does not mirror " + std::to_string(ev.length) +
                           " stagnating steps";
    }
    out.check.deviation = std::max(out.check.deviation, f.deviation);
    out.findings.push_back(std::move(f));
  }
  if (out.findings.empty()) out.check.detail = "no end-of-cycle stagnation";
  return out;
}

struct PeakPlateauReport {
  Check check;
  Index steps_checked = 0;
  Index nonexistent_steps = 0;
};

/// GMRES/FOM peak-plateau identity. With T the end-of-cycle residual
/// coefficients and G = T^*T, G^-1 T_i^* T_i G^-1 equals the inverse FOM
/// Gram matrix at step i (scalar: |t_{i+1}| ||r_i^F|| = ||r_m||^2). Where FOM
/// does not exist, the GMRES step must stagnate (singular Gram difference).
/// Cycles whose final residual vanishes are skipped.
inline PeakPlateauReport check_peak_plateau(const RunTrace& trace, double tol = 1e-8) {
  PeakPlateauReport out;
  out.check = {"peak_plateau", true, 0.0, tol, {}};
  const Index p = trace.p;
  auto fail = [&](const std::string& why) {
    out.check.pass = false;
    if (out.check.detail.empty()) out.check.detail = why;
  };
  for (std::size_t k = 0; k < trace.cycles.size(); ++k) {
    const CycleTrace& ct = trace.cycles[k];
    const Index s = ct.steps();
    const double r0 = ct.residual_norms.front();
    // existence of FOM against singular Gram differences, every step
    for (Index i = 1; i <= s; ++i) {
      const Matrix Ga = ct.residual_nq[static_cast<std::size_t>(i - 1)].gram();
      const Matrix Gb = ct.residual_nq[static_cast<std::size_t>(i)].gram();
      const double scale = norm2(Ga);
      const bool singular = scale > 0.0 && hermitian_eig(Ga - Gb).values(0) <= kStagnationTolerance * scale;
      if (singular == static_cast<bool>(ct.fom_exists[static_cast<std::size_t>(i)]))
        fail("FOM existence disagrees with stagnation at " + detail::at(static_cast<Index>(k), i));
      if (!ct.fom_exists[static_cast<std::size_t>(i)]) ++out.nonexistent_steps;
    }
    if (ct.residual_norms.back() <= 1e-10 * r0) continue;
    // (T^*T)^-1 = R^-1 R^-*, worked through the triangular factor so the
    // Gram matrix is never formed
    const Matrix& T = ct.residual_coeffs.back();
    const Matrix Rinv = upper_inverse(qr(T).R);
    for (Index i = 0; i <= s; ++i) {
      const Matrix Ti = T.middleRows(i * p, p);
      const Matrix X = Ti * Rinv * Rinv.adjoint();
      const Matrix lhs = X.adjoint() * X;
      if (ct.fom_exists[static_cast<std::size_t>(i)]) {
        const Matrix Finv = ct.fom_nq[static_cast<std::size_t>(i)].matrix().inverse();
        const Matrix rhs = Finv * Finv.adjoint();
        const double d = (lhs - rhs).norm() / rhs.norm();
        out.check.deviation = std::max(out.check.deviation, d);
        if (d > tol) fail("identity violated at " + detail::at(static_cast<Index>(k), i));
        ++out.steps_checked;
      } else if (min_singular_value(Ti) > 10.0 * std::sqrt(kStagnationTolerance) * norm2(T)) {
        fail("FOM missing but the residual component is nonsingular at " + detail::at(static_cast<Index>(k), i));
      }
    }
  }
  return out;
}

/// Full rank of the restarted Krylov matrix if and only if no cycle that has
/// a successor ends in stagnation.
inline Check check_rank(const KrylovRankReport& rep) {
  bool stagnation = false;
  for (const StagnationEvent& ev : rep.trace.stagnation)
    if (ev.end_of_cycle && static_cast<std::size_t>(ev.cycle + 1) < rep.trace.cycles.size()) stagnation = true;
  Check c{"krylov_rank", false, rep.min_diag, rep.threshold, {}};
  if (rep.K.cols() < rep.K.rows()) {
    c.pass = !rep.full_rank;
    c.detail = "run ended before all cycles; the restarted Krylov matrix is short";
    return c;
  }
  c.pass = stagnation != rep.full_rank;
  c.detail = std::string(stagnation ? "end-of-cycle stagnation" : "no end-of-cycle stagnation") + ", " +
             (rep.full_rank ? "full rank" : "rank " + std::to_string(rep.rank));
  return c;
}

}  // namespace prescribe
