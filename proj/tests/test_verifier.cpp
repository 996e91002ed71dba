#include <gtest/gtest.h>

#include "prescribe/scenarios.hpp"
#include "prescribe/verifier.hpp"
#include "support/oracles.hpp"

using namespace prescribe;

namespace {

Matrix perturbed(const Matrix& A, unsigned seed, double eps = 1e-3) {
  const Matrix E = oracle::gaussian(A.rows(), A.cols(), seed);
  return A + eps * A.norm() / E.norm() * E;
}

Tolerances scaled(double s) {
  Tolerances t;
  t.trace *= s;
  t.ritz *= s;
  t.eigenvalues *= s;
  t.relation *= s;
  t.coupling *= s;
  t.widened *= s;
  return t;
}

}  // namespace

TEST(VerifyFull, PassAndNegativeControl) {
  const FullPrescription p = random_full_prescription(8, 4);
  FullConstruction c = construct_full_gmres(p);
  EXPECT_TRUE(verify_full(c, p).pass());
  c.A = perturbed(c.A, 1);
  const VerificationReport rep = verify_full(c, p);
  EXPECT_FALSE(rep.pass());
  const Check* tr = rep.find("residual_trace");
  ASSERT_NE(tr, nullptr);
  EXPECT_FALSE(tr->pass);
  EXPECT_GT(tr->deviation, tr->tolerance);
}

TEST(VerifyScalar, PassAndNegativeControl) {
  const ScalarPrescription p = random_scalar_prescription(3, 4, 12);
  ScalarConstruction c = construct_restarted(p);
  const VerificationReport ok = verify_scalar(c, p);
  EXPECT_TRUE(ok.pass()) << ok.checks.front().name;
  c.A = perturbed(c.A, 2);
  const VerificationReport bad = verify_scalar(c, p);
  EXPECT_FALSE(bad.pass());
  EXPECT_FALSE(bad.find("residual_trace")->pass);
}

TEST(VerifyScalar, SingleCycleVerdictMatchesFull) {
  ScalarPrescription s;
  s.n = s.m = 3;
  s.cycles = 1;
  s.f = {{1.0, 0.4, 0.1}};
  s.ritz = {{{1.5}, {cplx(1, 1), cplx(1, -1)}, {0.7, 2.0, -1.0}}};
  FullPrescription f;
  f.f = s.f[0];
  f.ritz = {s.ritz[0][0], s.ritz[0][1]};
  f.eigenvalues = s.ritz[0][2];
  ScalarConstruction c = construct_restarted(s);
  FullConstruction fc = construct_full_gmres(f);
  EXPECT_EQ(verify_scalar(c, s).pass(), verify_full(fc, f).pass());
  EXPECT_TRUE(verify_scalar(c, s).pass());
  c.A = perturbed(c.A, 3);
  fc.A = perturbed(fc.A, 3);
  EXPECT_EQ(verify_scalar(c, s).pass(), verify_full(fc, f).pass());
}

TEST(VerifyScalar, LooserTolerancesNeverFlipPassToFail) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const ScalarPrescription p = random_scalar_prescription(3, 3, seed);
    ScalarConstruction c = construct_restarted(p);
    c.A = perturbed(c.A, static_cast<unsigned>(seed), 1e-7);
    bool passed = false;
    for (double s : {1e-2, 1.0, 1e2, 1e4, 1e6}) {
      const bool now = verify_scalar(c, p, scaled(s)).pass();
      EXPECT_FALSE(passed && !now) << "seed " << seed << " scale " << s;
      passed = passed || now;
    }
  }
}

TEST(Mirroring, FlatTailOfLengthOne) {
  const FullConstruction c = construct_full_gmres(flat_tail_prescription(1, 5));
  const RunTrace tr = restarted_gmres(c.A, c.b, 2, 2);
  ASSERT_EQ(tr.cycles.size(), 2u);
  EXPECT_NEAR(tr.cycles[1].residual_norms[0], 0.9, 1e-10);
  EXPECT_NEAR(tr.cycles[1].residual_norms[1], 0.9, 1e-10);
  const MirroringReport rep = check_mirroring(tr);
  EXPECT_TRUE(rep.check.pass);
  ASSERT_EQ(rep.findings.size(), 1u);
  EXPECT_EQ(rep.findings[0].length, 1);
  EXPECT_GE(rep.findings[0].mirrored, 1);
}

TEST(Mirroring, FlatTailOfLengthTwo) {
  const FullConstruction c = construct_full_gmres(flat_tail_prescription(2, 6));
  const RunTrace tr = restarted_gmres(c.A, c.b, 3, 2);
  const MirroringReport rep = check_mirroring(tr);
  EXPECT_TRUE(rep.check.pass) << rep.check.detail;
  ASSERT_EQ(rep.findings.size(), 1u);
  EXPECT_EQ(rep.findings[0].length, 2);
  EXPECT_GE(rep.findings[0].mirrored, 2);
}

TEST(Mirroring, VacuousWithoutStagnation) {
  const ScalarConstruction c = construct_restarted(random_scalar_prescription(3, 3, 7));
  const MirroringReport rep = check_mirroring(restarted_gmres(c.A, c.b(), 3, 3));
  EXPECT_TRUE(rep.check.pass);
  EXPECT_TRUE(rep.findings.empty());
  EXPECT_EQ(rep.check.detail, "no end-of-cycle stagnation");
}

TEST(PeakPlateau, RandomOperators) {
  for (unsigned seed = 1; seed <= 10; ++seed) {
    const Matrix A = oracle::gaussian(8, 8, seed);
    const Vector b = oracle::gaussian(8, 1, seed + 100);
    const PeakPlateauReport rep = check_peak_plateau(gmres_run(A, b, 6));
    EXPECT_TRUE(rep.check.pass) << "seed " << seed << ": " << rep.check.detail;
    EXPECT_GT(rep.steps_checked, 0);
  }
}

TEST(PeakPlateau, ScalarIdentityByHand) {
  // 1 / ||r_i^F||^2 = 1 / ||r_i||^2 - 1 / ||r_{i-1}||^2
  const Matrix A = oracle::gaussian(6, 6, 40);
  const Vector b = oracle::gaussian(6, 1, 41);
  for (int i = 1; i <= 4; ++i) {
    const double g = oracle::gmres_residual(A, b, i).norm();
    const double gp = oracle::gmres_residual(A, b, i - 1).norm();
    const double f = oracle::fom_residual(A, b, i).norm();
    EXPECT_NEAR(1.0 / (f * f), 1.0 / (g * g) - 1.0 / (gp * gp), 1e-8 / (g * g));
  }
}

TEST(PeakPlateau, StagnationMeansNoFom) {
  const FullConstruction c = construct_full_gmres(flat_tail_prescription(1, 7));
  const RunTrace tr = gmres_run(c.A, c.b, 4);
  const PeakPlateauReport rep = check_peak_plateau(tr);
  EXPECT_TRUE(rep.check.pass) << rep.check.detail;
  EXPECT_EQ(rep.nonexistent_steps, 1);
  EXPECT_FALSE(tr.cycles[0].fom_exists[2]);
}

TEST(PeakPlateau, BlockGramIdentity) {
  for (unsigned seed = 1; seed <= 5; ++seed) {
    Matrix A = oracle::gaussian(10, 10, seed);
    const Matrix B = oracle::gaussian(10, 2, seed + 50);
    const PeakPlateauReport rep = check_peak_plateau(block_gmres_run(A, B, 3));
    EXPECT_TRUE(rep.check.pass) << "seed " << seed << ": " << rep.check.detail;
  }
}

TEST(PeakPlateau, ConstructedScenarios) {
  const ScalarConstruction c = construct_restarted(random_scalar_prescription(3, 4, 13));
  EXPECT_TRUE(check_peak_plateau(restarted_gmres(c.A, c.b(), 3, 4)).check.pass);
  const BlockConstruction bc = construct_restarted_block(random_block_prescription(2, 2, 3, 13));
  EXPECT_TRUE(check_peak_plateau(restarted_block_gmres(bc.A, bc.B, 2, 3)).check.pass);
}
