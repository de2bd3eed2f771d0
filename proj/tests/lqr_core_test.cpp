#include <gtest/gtest.h>

#include <random>

#include "gail_lqr/lqr_core.hpp"
#include "gail_lqr/riccati.hpp"
#include "test_support.hpp"

namespace gail_lqr {
namespace {

using testing::DrawTriple;
using testing::RelErr;
using testing::Scalar;
using testing::ScalarInstance;
using testing::ScalarLoop;
using testing::ScalarTheta;

TEST(SpectralRadius, Examples) {
  EXPECT_NEAR(SpectralRadius(0.5 * Matrix::Identity(2, 2)), 0.5, 1e-15);
  Matrix nil(2, 2);
  nil << 0, 1, 0, 0;
  EXPECT_NEAR(SpectralRadius(nil), 0.0, 1e-15);
  Matrix rot(2, 2);
  rot << 0, 1, -1, 0;
  // char. polynomial x^2 + 1
  EXPECT_NEAR(SpectralRadius(rot), 1.0, 1e-14);
}

TEST(IsStabilizing, ScalarCases) {
  EXPECT_TRUE(IsStabilizing(ScalarInstance(0.5, 1), Policy(Scalar(0.0))));
  EXPECT_FALSE(IsStabilizing(ScalarInstance(2.0, 1), Policy(Scalar(0.5))));
  EXPECT_TRUE(IsStabilizing(ScalarInstance(2.0, 1), Policy(Scalar(1.5))));
  EXPECT_FALSE(IsStabilizing(ScalarInstance(0.5, 1), Policy(Scalar(0.0)), 0.6));
}

TEST(SolveClosedLoop, ScalarGeometricSeries) {
  const auto cl = SolveClosedLoop(ScalarInstance(0.5, 1), ScalarTheta(1, 1),
                                  Policy(Scalar(0.0)));
  EXPECT_NEAR(cl.sigma(0, 0), 4.0 / 3.0, 1e-14);
  EXPECT_NEAR(cl.P(0, 0), 4.0 / 3.0, 1e-14);
  EXPECT_NEAR(cl.rho, 0.5, 1e-15);
}

TEST(SolveClosedLoop, ZeroClosedLoop) {
  Matrix A(2, 2), B = Matrix::Identity(2, 2), S0(2, 2);
  A << 0.7, 0.2, -0.1, 0.4;
  S0 << 2.0, 0.3, 0.3, 1.0;
  const LqrInstance inst(A, B, S0);
  Matrix Q(2, 2), R(2, 2);
  Q << 1.0, 0.1, 0.1, 3.0;
  R << 2.0, 0.0, 0.0, 0.5;
  const CostParam theta(Q, R);
  const Policy pol(A);  // B K = A
  const auto cl = SolveClosedLoop(inst, theta, pol);
  EXPECT_LT(cl.T.norm(), 1e-15);
  EXPECT_LT((cl.sigma - S0).norm(), 1e-14);
  EXPECT_LT((cl.P - (Q + A.transpose() * R * A)).norm(), 1e-13);
  const double expect = (S0 * Q).trace() + (A * S0 * A.transpose() * R).trace();
  EXPECT_NEAR(Cost(inst, theta, pol), expect, 1e-13);
}

TEST(SolveClosedLoop, RejectsUnstable) {
  try {
    SolveClosedLoop(ScalarInstance(2.0, 1), ScalarTheta(1, 1), Policy(Scalar(0.5)));
    FAIL() << "expected InstabilityError";
  } catch (const InstabilityError& e) {
    EXPECT_NEAR(e.rho(), 1.5, 1e-14);
  }
}

TEST(SolveClosedLoop, RandomResidualsAndSeriesOracle) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    const auto t = DrawTriple(rng, 3, 2, 0.9);
    const auto cl = SolveClosedLoop(t.inst, t.theta, t.pol);
    const Matrix& T = cl.T;
    const Matrix& K = t.pol.K();
    const Matrix rs = cl.sigma - t.inst.sigma0() - T * cl.sigma * T.transpose();
    const Matrix Qk = t.theta.Q() + K.transpose() * t.theta.R() * K;
    const Matrix rp = cl.P - Qk - T.transpose() * cl.P * T;
    EXPECT_LE(rs.norm() / cl.sigma.norm(), 1e-10);
    EXPECT_LE(rp.norm() / cl.P.norm(), 1e-10);
    // rho <= 0.9: 600 terms leave a remainder below 0.9^1200.
    EXPECT_LE(RelErr(cl.sigma, testing::SeriesLyapunov(T, t.inst.sigma0(), 600)),
              1e-10);
  }
}

TEST(SolveDiscreteLyapunov, DoublingMatchesKronecker) {
  std::mt19937_64 rng(5);
  const auto t = DrawTriple(rng, 5, 2, 0.9);
  const Matrix T = ClosedLoopMatrix(t.inst, t.pol);
  NumericsConfig doubling;
  doubling.kronecker_max_dim = 0;
  const Matrix x1 = SolveDiscreteLyapunov(T, t.inst.sigma0());
  const Matrix x2 = SolveDiscreteLyapunov(T, t.inst.sigma0(), doubling);
  EXPECT_LE(RelErr(x2, x1), 1e-11);
}

TEST(Cost, Examples) {
  EXPECT_NEAR(Cost(ScalarInstance(0.5, 1), ScalarTheta(1, 1), Policy(Scalar(0))),
              4.0 / 3.0, 1e-14);
  const LqrInstance inst(0.5 * Matrix::Identity(2, 2), Matrix::Identity(2, 2),
                         Matrix::Identity(2, 2));
  EXPECT_NEAR(Cost(inst, testing::IdentityTheta(2, 2), Policy(Matrix::Zero(2, 2))),
              8.0 / 3.0, 1e-14);
}

TEST(Cost, TwoFormulasAgree) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const auto t = DrawTriple(rng, 1 + trial % 5, 1 + trial % 3);
    const auto cl = SolveClosedLoop(t.inst, t.theta, t.pol);
    const double trace_form = CostFromCovariance(t.theta, t.pol, cl.sigma);
    const double inner = (t.inst.sigma0() * cl.P).trace();
    EXPECT_LE(std::abs(trace_form - inner) / std::abs(inner), 1e-8);
  }
}

TEST(PolicyGradient, ScalarExample) {
  const auto g = ComputePolicyGradient(ScalarInstance(0.5, 1), ScalarTheta(1, 1),
                                       Policy(Scalar(0)));
  EXPECT_NEAR(g.E(0, 0), -2.0 / 3.0, 1e-14);
  EXPECT_NEAR(g.gradient(0, 0), -16.0 / 9.0, 1e-14);
  const ScalarLoop loop{0.5, 1.0, 1.0};
  EXPECT_NEAR(loop.Gradient(0.0, 1, 1), -16.0 / 9.0, 1e-14);
}

TEST(PolicyGradient, VanishesAtRiccatiGain) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    const auto t = DrawTriple(rng, 3, 2);
    const Policy opt = SolveDare(t.inst, t.theta).policy();
    EXPECT_LT(ComputePolicyGradient(t.inst, t.theta, opt).gradient.norm(), 1e-8);
  }
}

Matrix CentralDifference(const LqrInstance& inst, const CostParam& theta,
                         const Matrix& K, double h) {
  Matrix g(K.rows(), K.cols());
  for (Eigen::Index i = 0; i < K.rows(); ++i)
    for (Eigen::Index j = 0; j < K.cols(); ++j) {
      Matrix kp = K, km = K;
      kp(i, j) += h;
      km(i, j) -= h;
      g(i, j) = (Cost(inst, theta, Policy(kp)) - Cost(inst, theta, Policy(km))) /
                (2.0 * h);
    }
  return g;
}

TEST(PolicyGradient, MatchesFiniteDifferences) {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 40; ++trial) {
    const int d = trial < 20 ? 3 : 1 + trial % 5;
    const int k = trial < 20 ? 2 : 1 + trial % 3;
    const auto t = DrawTriple(rng, d, k, 0.9);
    const Matrix g = ComputePolicyGradient(t.inst, t.theta, t.pol).gradient;
    EXPECT_LE(RelErr(CentralDifference(t.inst, t.theta, t.pol.K(), 1e-6), g), 1e-5)
        << "trial " << trial;
  }
}

TEST(Contracts, ShapeAndDefiniteness) {
  EXPECT_THROW(LqrInstance(Matrix::Identity(2, 3), Matrix::Identity(2, 1),
                           Matrix::Identity(2, 2)),
               ContractError);
  EXPECT_THROW(LqrInstance(Matrix::Identity(2, 2), Matrix::Identity(3, 1),
                           Matrix::Identity(2, 2)),
               ContractError);
  Matrix singular = Matrix::Zero(2, 2);
  singular(0, 0) = 1.0;
  EXPECT_THROW(LqrInstance(Matrix::Identity(2, 2), Matrix::Identity(2, 1), singular),
               ContractError);
  Matrix asym = Matrix::Identity(2, 2);
  asym(0, 1) = 0.1;
  EXPECT_THROW(CostParam(asym, Scalar(1)), ContractError);
  EXPECT_THROW(CostParam(Matrix::Identity(2, 2), Scalar(-1)), ContractError);
  EXPECT_THROW(Cost(ScalarInstance(0.5, 1), ScalarTheta(1, 1), Policy(Matrix::Zero(1, 2))),
               ContractError);
}

TEST(Cost, NonnegativeAndMinimizedByRiccati) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 5; ++trial) {
    const auto t = DrawTriple(rng, 3, 2);
    const Policy opt = SolveDare(t.inst, t.theta).policy();
    const double copt = Cost(t.inst, t.theta, opt);
    for (int j = 0; j < 100; ++j) {
      const Matrix K = opt.K() + 0.2 * testing::Gaussian(rng, 2, 3);
      if (!IsStabilizing(t.inst, Policy(K))) continue;
      const double c = Cost(t.inst, t.theta, Policy(K));
      EXPECT_GE(c, 0.0);
      EXPECT_GE(c, copt * (1.0 - 1e-12));
    }
  }
}

}  // namespace
}  // namespace gail_lqr
