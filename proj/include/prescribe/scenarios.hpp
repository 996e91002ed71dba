#pragma once

/// \file prescribe/scenarios.hpp
/// \brief Seeded random prescriptions and a few hand-built systems with
/// stagnation, used by the demos and the test suites.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "prescribe/block_prescriber.hpp"
#include "prescribe/prescriber.hpp"

namespace prescribe {

class ScenarioRng {
 public:
  explicit ScenarioRng(std::uint64_t seed) : gen_(seed) {}

  double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(gen_); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(gen_); }

  /// Modulus uniform in [rmin, rmax], argument uniform in [0, 2 pi).
  cplx annulus(double rmin, double rmax) {
    const double r = uniform(rmin, rmax);
    const double t = uniform(0.0, 2.0 * std::numbers::pi);
    return std::polar(r, t);
  }

  Multiset annulus_set(std::size_t count, double rmin = 0.5, double rmax = 2.0) {
    Multiset s;
    for (std::size_t i = 0; i < count; ++i) s.push_back(annulus(rmin, rmax));
    return s;
  }

  /// `count` values in (lo, hi], strictly decreasing, first value hi,
  /// log-uniformly spread.
  std::vector<double> decreasing(std::size_t count, double lo = 1e-4, double hi = 1.0) {
    std::vector<double> v{hi};
    while (v.size() < count) {
      const double x = std::exp(uniform(std::log(lo), std::log(hi)));
      if (std::find(v.begin(), v.end(), x) == v.end() && x < hi) v.push_back(x);
    }
    std::sort(v.begin(), v.end(), std::greater<>());
    return v;
  }

  /// `count` values starting at hi, each the previous times a ratio drawn
  /// uniformly from [rlo, rhi].
  std::vector<double> geometric(std::size_t count, double rlo, double rhi, double hi = 1.0) {
    std::vector<double> v{hi};
    while (v.size() < count) v.push_back(v.back() * uniform(rlo, rhi));
    return v;
  }

  Matrix gaussian(Index rows, Index cols) {
    Matrix M(rows, cols);
    for (Index j = 0; j < cols; ++j)
      for (Index i = 0; i < rows; ++i) {
        const double re = normal();
        const double im = normal();
        M(i, j) = cplx(re, im) / std::sqrt(2.0);
      }
    return M;
  }

  std::mt19937_64& engine() { return gen_; }

 private:
  std::mt19937_64 gen_;
};

// ---------------------------------------------------------------------------
// scalar
// ---------------------------------------------------------------------------

inline FullPrescription random_full_prescription(Index n, std::uint64_t seed) {
  ScenarioRng rng(seed);
  FullPrescription p;
  p.f = rng.decreasing(static_cast<std::size_t>(n));
  for (Index j = 1; j < n; ++j) p.ritz.push_back(rng.annulus_set(static_cast<std::size_t>(j)));
  p.eigenvalues = rng.annulus_set(static_cast<std::size_t>(n));
  return p;
}

/// Residual norms fall by a ratio in [0.3, 0.7] per iteration. Nearly flat
/// steps at a restart blow up the coupling between cycles and make the
/// solver's trace sensitive to rounding, so they are avoided here. Ritz values
/// and cycle spectra lie in the annulus 0.5 <= |z| <= 2.
inline ScalarPrescription random_scalar_prescription(Index m, Index cycles, std::uint64_t seed,
                                                     BasisChoice basis = {}) {
  ScenarioRng rng(seed);
  ScalarPrescription p;
  p.m = m;
  p.cycles = cycles;
  p.n = m * cycles;
  p.basis = std::move(basis);
  const std::vector<double> all = rng.geometric(static_cast<std::size_t>(p.n + 1), 0.3, 0.7);
  for (Index k = 0; k < cycles; ++k) {
    p.f.emplace_back(all.begin() + k * m, all.begin() + (k + 1) * m);
    std::vector<Multiset> r;
    for (Index j = 1; j <= m; ++j) r.push_back(rng.annulus_set(static_cast<std::size_t>(j)));
    p.ritz.push_back(std::move(r));
    p.spectra.push_back(rng.annulus_set(static_cast<std::size_t>(m + 1)));
  }
  p.final_residual = all.back();
  return p;
}

// ---------------------------------------------------------------------------
// block
// ---------------------------------------------------------------------------

namespace detail {

/// Upper factor R with R^* R = G for Hermitian positive definite G.
inline NormalizingQuantity chol_upper(const Matrix& G) {
  Eigen::LLT<Matrix> llt(hermitian_part(G));
  if (llt.info() != Eigen::Success) throw numerical_error("chol_upper: matrix is not positive definite");
  const Matrix L = llt.matrixL();
  return NormalizingQuantity(L.adjoint());
}

}  // namespace detail

/// Solvent with eigenvalues in the annulus and a well-conditioned
/// eigenvector matrix.
inline Matrix random_solvent(ScenarioRng& rng, Index p) {
  const Multiset lam = rng.annulus_set(static_cast<std::size_t>(p));
  Vector l(p);
  for (Index i = 0; i < p; ++i) l(i) = lam[static_cast<std::size_t>(i)];
  const Matrix W = Matrix::Identity(p, p) + 0.3 * rng.gaussian(p, p);
  return W * l.asDiagonal() * W.inverse();
}

/// Loewner strictly decreasing sequence: G_j^-1 = G_{j-1}^-1 + P_j with P_j
/// random positive definite.
inline std::vector<NormalizingQuantity> random_decreasing_nq(ScenarioRng& rng, Index p, Index count) {
  std::vector<NormalizingQuantity> out;
  Matrix F0 = Matrix::Identity(p, p) + 0.2 * rng.gaussian(p, p).triangularView<Eigen::StrictlyUpper>().toDenseMatrix();
  out.push_back(NormalizingQuantity(F0));
  Matrix Ginv = out.back().gram().inverse();
  for (Index j = 1; j < count; ++j) {
    const Matrix X = rng.gaussian(p, p);
    const double scale = rng.uniform(0.2, 2.0);
    Ginv = hermitian_part(Ginv + scale * (X * X.adjoint() / static_cast<double>(p) + 0.2 * Matrix::Identity(p, p)));
    out.push_back(detail::chol_upper(Ginv.inverse()));
  }
  return out;
}

inline BlockPrescription random_block_prescription(Index p, Index M, Index cycles, std::uint64_t seed,
                                                   BasisChoice basis = {}) {
  ScenarioRng rng(seed);
  BlockPrescription pr;
  pr.p = p;
  pr.M = M;
  pr.cycles = cycles;
  pr.n = M * cycles * p;
  pr.basis = std::move(basis);
  const std::vector<NormalizingQuantity> all = random_decreasing_nq(rng, p, M * cycles + 1);
  for (Index k = 0; k < cycles; ++k) {
    pr.F.emplace_back(all.begin() + k * M, all.begin() + (k + 1) * M);
    std::vector<MatrixPolynomialSpec> r;
    for (Index j = 1; j <= M; ++j) {
      std::vector<Matrix> s;
      for (Index i = 0; i < j; ++i) s.push_back(random_solvent(rng, p));
      r.push_back(MatrixPolynomialSpec::from_solvents(std::move(s)));
    }
    pr.ritz.push_back(std::move(r));
    std::vector<Matrix> s;
    for (Index i = 0; i <= M; ++i) s.push_back(random_solvent(rng, p));
    pr.spectra.push_back(MatrixPolynomialSpec::from_solvents(std::move(s)));
  }
  pr.final_residual = all.back();
  return pr;
}

/// Block prescription with p = 1 carrying exactly the data of a scalar one
/// (Ritz polynomials as 1 x 1 coefficients).
inline BlockPrescription embed_scalar(const ScalarPrescription& s) {
  BlockPrescription b;
  b.p = 1;
  b.M = s.m;
  b.cycles = s.cycles;
  b.n = s.n;
  b.basis = s.basis;
  auto coeffs = [](const Multiset& roots) {
    std::vector<Matrix> c;
    for (const cplx& v : poly_from_roots(roots).c) c.push_back(Matrix::Constant(1, 1, v));
    return MatrixPolynomialSpec::from_coeffs(std::move(c));
  };
  for (Index k = 0; k < s.cycles; ++k) {
    std::vector<NormalizingQuantity> row;
    for (double v : s.f[static_cast<std::size_t>(k)]) row.push_back(NormalizingQuantity::scalar(v));
    b.F.push_back(std::move(row));
    std::vector<MatrixPolynomialSpec> r;
    for (const Multiset& th : s.ritz[static_cast<std::size_t>(k)]) r.push_back(coeffs(th));
    b.ritz.push_back(std::move(r));
    b.spectra.push_back(coeffs(s.cycle_spectrum(k)));
  }
  if (s.final_residual) b.final_residual = NormalizingQuantity::scalar(*s.final_residual);
  return b;
}

// ---------------------------------------------------------------------------
// systems with stagnation
// ---------------------------------------------------------------------------

/// Full GMRES prescription with n = 2(s+1): residuals 1, then 0.9 held for
/// s more steps, then 0.5, 0.2, ... with a zero Ritz value at each flat step.
/// Restarting it with cycle length s + 1 ends the first cycle in s
/// stagnating steps. s = 1 gives f = (1, 0.9, 0.9, 0.5).
inline FullPrescription flat_tail_prescription(Index s, std::uint64_t seed) {
  ScenarioRng rng(seed);
  const Index m = s + 1;
  const Index n = 2 * m;
  FullPrescription p;
  p.f.push_back(1.0);
  for (Index i = 0; i <= s; ++i) p.f.push_back(0.9);
  double v = 0.5;
  while (static_cast<Index>(p.f.size()) < n) {
    p.f.push_back(v);
    v *= 0.4;
  }
  for (Index j = 1; j < n; ++j) {
    Multiset th = rng.annulus_set(static_cast<std::size_t>(j));
    if (j >= 2 && j <= s + 1) th[0] = 0.0;
    p.ritz.push_back(std::move(th));
  }
  p.eigenvalues = rng.annulus_set(static_cast<std::size_t>(n));
  return p;
}

/// The restart cycle length that puts the flat tail at the end of cycle one.
inline Index flat_tail_cycle_length(Index s) { return s + 1; }

/// Decoupled block system A = blkdiag(A1, A2), B = blkdiag(b1, b2) where the
/// second block stagnates at the end of the first cycle (length s), so the
/// block residual stagnates partially, along e_2.
struct DecoupledBlockSystem {
  Matrix A;
  Matrix B;
  Index M = 0;
  Index cycles = 2;
};

inline DecoupledBlockSystem decoupled_stagnation_system(Index s, std::uint64_t seed) {
  const FullPrescription p2 = flat_tail_prescription(s, seed);
  ScenarioRng rng(seed + 1);
  FullPrescription p1;
  p1.f = rng.decreasing(p2.f.size(), 1e-2);
  for (std::size_t j = 1; j < p2.f.size(); ++j) p1.ritz.push_back(rng.annulus_set(j));
  p1.eigenvalues = rng.annulus_set(p2.f.size());
  const FullConstruction c1 = construct_full_gmres(p1);
  const FullConstruction c2 = construct_full_gmres(p2);
  const Index n1 = c1.A.rows();
  const Index n2 = c2.A.rows();
  DecoupledBlockSystem out;
  out.A = Matrix::Zero(n1 + n2, n1 + n2);
  out.A.topLeftCorner(n1, n1) = c1.A;
  out.A.bottomRightCorner(n2, n2) = c2.A;
  out.B = Matrix::Zero(n1 + n2, 2);
  out.B.col(0).head(n1) = c1.b;
  out.B.col(1).tail(n2) = c2.b;
  out.M = flat_tail_cycle_length(s);
  return out;
}

}  // namespace prescribe
