#include <gtest/gtest.h>

#include "prescribe/scenarios.hpp"
#include "prescribe/verifier.hpp"
#include "support/oracles.hpp"

using namespace prescribe;

namespace {

Matrix diag2(cplx a, cplx b) {
  Matrix D = Matrix::Zero(2, 2);
  D(0, 0) = a;
  D(1, 1) = b;
  return D;
}

bool has_code(const AdmissibilityReport& rep, const std::string& code) {
  for (const Violation& v : rep.violations)
    if (v.code == code) return true;
  return false;
}

FullBlockPrescription random_full_block(Index p, Index N, std::uint64_t seed) {
  ScenarioRng rng(seed);
  FullBlockPrescription pr;
  pr.p = p;
  pr.F = random_decreasing_nq(rng, p, N);
  for (Index j = 1; j < N; ++j) {
    std::vector<Matrix> s;
    for (Index i = 0; i < j; ++i) s.push_back(random_solvent(rng, p));
    pr.ritz.push_back(MatrixPolynomialSpec::from_solvents(std::move(s)));
  }
  std::vector<Matrix> s;
  for (Index i = 0; i < N; ++i) s.push_back(random_solvent(rng, p));
  pr.spectrum = MatrixPolynomialSpec::from_solvents(std::move(s));
  return pr;
}

}  // namespace

TEST(Solvents, KnownCoefficients) {
  std::vector<Matrix> c = solvents_to_coeffs({diag2(1, 2)});
  ASSERT_EQ(c.size(), 1u);
  EXPECT_LT((c[0] - diag2(1, 2)).norm(), 1e-14);

  c = solvents_to_coeffs({Matrix::Identity(2, 2), 2.0 * Matrix::Identity(2, 2)});
  ASSERT_EQ(c.size(), 2u);
  EXPECT_LT((c[0] + 2.0 * Matrix::Identity(2, 2)).norm(), 1e-13);
  EXPECT_LT((c[1] - 3.0 * Matrix::Identity(2, 2)).norm(), 1e-13);
}

TEST(Solvents, RightSolventsOfTheResult) {
  ScenarioRng rng(3);
  std::vector<Matrix> S;
  for (int i = 0; i < 3; ++i) S.push_back(random_solvent(rng, 2));
  const std::vector<Matrix> C = solvents_to_coeffs(S);
  Multiset all;
  for (const Matrix& Si : S) {
    Matrix lhs = Matrix::Zero(2, 2);
    Matrix pw = Matrix::Identity(2, 2);
    for (const Matrix& Ck : C) {
      lhs += Ck * pw;
      pw = pw * Si;
    }
    EXPECT_LT((pw - lhs).norm(), 1e-10 * std::max(1.0, pw.norm()));
    const Multiset e = eig(Si);
    all.insert(all.end(), e.begin(), e.end());
  }
  EXPECT_LT(oracle::nearest_distance(latent_roots(MatrixPolynomialSpec::from_solvents(S)), all), 1e-8);
}

TEST(Solvents, CoincidingSolventsAreRejected) {
  EXPECT_THROW(solvents_to_coeffs({diag2(1, 2), diag2(1, 2)}), error);
}

TEST(BlockCompanion, KroneckerOfTheScalarCase) {
  const Matrix C = block_companion({-2.0 * Matrix::Identity(2, 2), 3.0 * Matrix::Identity(2, 2)});
  EXPECT_LT(oracle::poly_distance(eig(C), {1.0, 1.0, 2.0, 2.0}), 1e-12);
  std::vector<Matrix> scalar{Matrix::Constant(1, 1, 6.0), Matrix::Constant(1, 1, -11.0), Matrix::Constant(1, 1, 6.0)};
  EXPECT_LT((block_companion(scalar) - companion(poly_from_roots({1.0, 2.0, 3.0}))).norm(), 1e-14);
}

TEST(BlockDU, DiagonalCase) {
  Matrix Ui = Matrix::Identity(4, 4);
  Ui.block(0, 2, 2, 2) = 3.0 * Matrix::Identity(2, 2);
  const BlockDU du = build_block_DU({NormalizingQuantity(Matrix::Identity(2, 2)),
                                     NormalizingQuantity(Matrix(0.5 * Matrix::Identity(2, 2)))},
                                    Ui);
  EXPECT_LT((du.D[1] - std::sqrt(3.0) * Matrix::Identity(2, 2)).norm(), 1e-13);
}

TEST(BlockDU, ScalarEmbeddingMatchesBuildD) {
  const std::vector<double> f{1.0, 0.6, 0.25, 0.1};
  const std::vector<Multiset> ritz{{2.0}, {1.0, cplx(0, 1)}, {-1.0, 0.5, 1.5}};
  const Matrix Ui = build_U_inv(ritz);
  const RealVector d = build_D(f, Ui);
  std::vector<NormalizingQuantity> F;
  for (double v : f) F.push_back(NormalizingQuantity::scalar(v));
  const BlockDU du = build_block_DU(F, Ui);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(du.D[i](0, 0).real(), d(i), 1e-13 * d(i));
}

TEST(Validate, BlockCodes) {
  FullBlockPrescription pr;
  pr.p = 2;
  pr.F = {NormalizingQuantity(Matrix(Matrix::Identity(2, 2))), NormalizingQuantity(Matrix(0.5 * Matrix::Identity(2, 2))),
          NormalizingQuantity(Matrix(0.25 * Matrix::Identity(2, 2)))};
  pr.ritz = {MatrixPolynomialSpec::from_solvents({diag2(2, 3)}),
             MatrixPolynomialSpec::from_solvents({diag2(1, 2), diag2(-1, 3)})};
  pr.spectrum = MatrixPolynomialSpec::from_solvents({diag2(1, 2), diag2(3, 4), diag2(5, 6)});
  EXPECT_TRUE(validate_block_admissible(pr).ok());

  FullBlockPrescription bad = pr;
  bad.F[1] = NormalizingQuantity(diag2(1, 2));
  bad.F[2] = NormalizingQuantity(diag2(2, 1));
  const AdmissibilityReport rep = validate_block_admissible(bad);
  EXPECT_TRUE(has_code(rep, "incomparable"));

  bad = pr;
  bad.F[1] = NormalizingQuantity(diag2(0.5, 1.0));
  const AdmissibilityReport partial = validate_block_admissible(bad);
  ASSERT_TRUE(has_code(partial, "partial-stagnation-unsupported"));
  ASSERT_TRUE(partial.violations.front().witness.has_value());
  EXPECT_NEAR(std::abs((*partial.violations.front().witness)(1)), 1.0, 1e-12);
  EXPECT_THROW(construct_full_block_gmres(bad), inadmissible_error);

  // equal transition in a restarted prescription
  BlockPrescription r = random_block_prescription(2, 2, 2, 4);
  r.F[1][0] = r.F[0][1];
  const AdmissibilityReport eq = validate_block_admissible(r);
  ASSERT_TRUE(has_code(eq, "non-strict-transition"));
  EXPECT_TRUE(eq.violations.front().witness.has_value());
}

TEST(ConstructFullBlock, AgainstOracle) {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    FullBlockPrescription pr = random_full_block(2, 3, seed);
    pr.basis = BasisChoice::random(seed);
    const FullBlockConstruction c = construct_full_block_gmres(pr);
    for (int j = 0; j < 3; ++j) {
      const Matrix R = oracle::r_factor(oracle::gmres_residual(c.A, c.B, j));
      const Matrix& want = pr.F[static_cast<std::size_t>(j)].matrix();
      EXPECT_LT((R - want).norm() / want.norm(), 1e-8) << "seed " << seed << " step " << j;
    }
    for (int j = 1; j < 3; ++j)
      EXPECT_LT(oracle::nearest_distance(oracle::ritz(c.A, c.B, j), latent_roots(pr.ritz[j - 1])), 1e-8);
    EXPECT_LT(oracle::nearest_distance(oracle::eigenvalues(c.A), latent_roots(pr.spectrum)), 1e-8);
    EXPECT_TRUE(verify_full_block(c, pr).pass());
  }
}

TEST(ConstructFullBlock, GramTelescoping) {
  // G^* G equals the Gram matrix of the final residual
  const FullBlockPrescription pr = random_full_block(2, 3, 9);
  const BlockCycleFactor cf = build_block_cycle(pr.F, {resolve_coeffs(pr.ritz[0]), resolve_coeffs(pr.ritz[1])},
                                                resolve_coeffs(pr.spectrum));
  const Matrix want = pr.F.back().gram();
  EXPECT_LT((cf.G.adjoint() * cf.G - want).norm(), 1e-10 * want.norm());
}

TEST(ConstructRestartedBlock, AgainstOracle) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const BlockPrescription pr = random_block_prescription(2, 2, 3, seed);
    const BlockConstruction c = construct_restarted_block(pr);
    const auto ref = oracle::restarted_trace(c.A, c.B, 2, 3);
    for (int k = 0; k < 3; ++k) {
      const auto v = pr.cycle_values(k);
      // the closing step of the last cycle is not prescribed
      for (int j = 0; j <= (k == 2 ? 1 : 2); ++j)
        EXPECT_NEAR(ref[k][j] / v[j].matrix().norm(), 1.0, 1e-8) << "seed " << seed << " cycle " << k;
    }
    EXPECT_TRUE(verify_block(c, pr).pass()) << "seed " << seed;
  }
}

TEST(ConstructRestartedBlock, ScalarEmbeddingAgrees) {
  const ScalarPrescription s = random_scalar_prescription(3, 3, 21);
  const ScalarConstruction a = construct_restarted(s);
  const BlockConstruction b = construct_restarted_block(embed_scalar(s));
  EXPECT_LT((a.A - b.A).norm(), 1e-12 * a.A.norm());
  EXPECT_LT((a.B - b.B).norm(), 1e-12 * a.B.norm());
  EXPECT_EQ(verify_scalar(a, s).pass(), verify_block(b, embed_scalar(s)).pass());
}

TEST(ConstructRestartedBlock, TailKeepsEarlierCycles) {
  const BlockPrescription pr = random_block_prescription(2, 2, 2, 6);
  const BlockConstruction base = construct_restarted_block(pr);
  EXPECT_EQ(block_tail_rank_one(base, Matrix::Zero(pr.n, 2)).A, base.A);
  const RestartedConstruction t = block_tail_rank_one(base, oracle::gaussian(pr.n, 2, 5));
  const auto ref = oracle::restarted_trace(t.A, t.B, 2, 2);
  const auto want = oracle::restarted_trace(base.A, base.B, 2, 2);
  for (int j = 0; j <= 2; ++j) EXPECT_NEAR(ref[0][j], want[0][j], 1e-10);
  EXPECT_NEAR(ref[1][0], want[1][0], 1e-10);
  EXPECT_NEAR(ref[1][1], want[1][1], 1e-10);
  const RunTrace tr = restarted_block_gmres(t.A, t.B, 2, 2);
  EXPECT_NEAR(closed_form_residual(t, tr.X).norm(), tr.cycles.back().residual_norms.back(), 1e-10);
}

TEST(VerifyBlock, SwappedPrescriptionNamesTheFirstStep) {
  const BlockPrescription pr = random_block_prescription(2, 2, 3, 2);
  const BlockConstruction c = construct_restarted_block(pr);
  BlockPrescription wrong = pr;
  std::swap(wrong.F[1][0], wrong.F[1][1]);
  const VerificationReport rep = verify_block(c, wrong);
  EXPECT_FALSE(rep.pass());
  const Check* tr = rep.find("residual_trace");
  ASSERT_NE(tr, nullptr);
  EXPECT_FALSE(tr->pass);
  EXPECT_EQ(tr->detail, "first deviation at cycle 2 step 0");
}

TEST(DirectionalStagnation, DecoupledSystem) {
  const DecoupledBlockSystem sys = decoupled_stagnation_system(1, 3);
  const RunTrace tr = restarted_block_gmres(sys.A, sys.B, sys.M, sys.cycles);
  const auto events = detect_direction_stagnation(tr);
  bool end_found = false;
  for (const StagnationEvent& ev : events)
    if (ev.end_of_cycle && ev.cycle == 0) {
      end_found = true;
      EXPECT_FALSE(ev.total);
      EXPECT_NEAR(std::abs(ev.direction(1)), 1.0, 1e-8);
    }
  EXPECT_TRUE(end_found);
  EXPECT_TRUE(check_mirroring(tr).check.pass);
  const KrylovRankReport rk = restarted_block_krylov_matrix(sys.A, sys.B, sys.M, sys.cycles);
  EXPECT_FALSE(rk.full_rank);
  EXPECT_TRUE(check_rank(rk).pass);
}

TEST(DirectionalStagnation, StrictlyDecreasingHasNone) {
  const BlockConstruction c = construct_restarted_block(random_block_prescription(2, 2, 3, 8));
  EXPECT_TRUE(detect_direction_stagnation(restarted_block_gmres(c.A, c.B, 2, 3)).empty());
}
