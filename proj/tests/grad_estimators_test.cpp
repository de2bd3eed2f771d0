#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "gail_lqr/grad_estimators.hpp"
#include "gail_lqr/riccati.hpp"
#include "test_support.hpp"

namespace gail_lqr {
namespace {

using testing::Scalar;
using testing::ScalarInstance;
using testing::ScalarTheta;

const double kTrueGradient = -16.0 / 9.0;  // a = 0.5, b = 1, K = 0

double Slope(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= x.size();
  my /= y.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

double EsScalar(int n, double sigma, std::uint64_t seed, bool antithetic = true) {
  EstimatorConfig cfg;
  cfg.n_samples = n;
  cfg.sigma_pert = sigma;
  cfg.seed = seed;
  cfg.antithetic = antithetic;
  return EsGradient(ScalarInstance(0.5, 1), ScalarTheta(1, 1), Policy(Scalar(0)), cfg)
      .gradient(0, 0);
}

TEST(EsGradient, ScalarWithinFivePercent) {
  const double g = EsScalar(200000, 1e-3, 1);
  EXPECT_LE(std::abs(g / kTrueGradient - 1.0), 0.05);
}

TEST(EsGradient, Deterministic) {
  EXPECT_EQ(EsScalar(1000, 1e-2, 3), EsScalar(1000, 1e-2, 3));
  EXPECT_NE(EsScalar(1000, 1e-2, 3), EsScalar(1000, 1e-2, 4));
}

double RmsError(int n, bool antithetic, int seeds) {
  double ss = 0.0;
  for (int s = 0; s < seeds; ++s) {
    const double e = EsScalar(n, 1e-2, 100 + s, antithetic) - kTrueGradient;
    ss += e * e;
  }
  return std::sqrt(ss / seeds);
}

TEST(EsGradient, AntitheticReducesVariance) {
  EXPECT_LT(RmsError(2000, true, 30), 0.2 * RmsError(2000, false, 30));
}

TEST(EsGradient, StatisticalErrorScalesAsInverseRootN) {
  std::vector<double> x, y;
  for (int n : {500, 2000, 8000}) {
    x.push_back(std::log(n));
    y.push_back(std::log(RmsError(n, true, 40)));
  }
  EXPECT_NEAR(Slope(x, y), -0.5, 0.15);
}

TEST(EsGradient, SmoothingBiasScalesAsSigmaSquared) {
  // Common random numbers: every sigma reuses the same normal draws, so the
  // sampling noise cancels in the difference to the sigma = 1e-3 estimate.
  const double base = EsScalar(100000, 1e-3, 5);
  std::vector<double> x, y;
  for (double sigma : {0.0125, 0.025, 0.05}) {
    x.push_back(std::log(sigma));
    y.push_back(std::log(std::abs(EsScalar(100000, sigma, 5) - base)));
  }
  EXPECT_NEAR(Slope(x, y), 2.0, 0.6);
}

TEST(EsGradient, SmallAtOptimum) {
  const LqrInstance inst = ScalarInstance(0.5, 1);
  const Policy opt = SolveDare(inst, ScalarTheta(1, 1)).policy();
  EstimatorConfig cfg;
  cfg.n_samples = 100000;
  cfg.sigma_pert = 1e-3;
  const Matrix g = EsGradient(inst, ScalarTheta(1, 1), opt, cfg).gradient;
  EXPECT_LT(g.norm(), 0.1 * std::abs(kTrueGradient));
}

TEST(EsGradient, MultivariateAgreesWithExact) {
  std::mt19937_64 rng(7);
  const auto t = testing::DrawTriple(rng, 3, 2, 0.8);
  EstimatorConfig cfg;
  cfg.n_samples = 100000;
  cfg.sigma_pert = 1e-3;
  const Matrix g = EsGradient(t.inst, t.theta, t.pol, cfg).gradient;
  const Matrix exact = ComputePolicyGradient(t.inst, t.theta, t.pol).gradient;
  EXPECT_LE(testing::RelErr(g, exact), 0.05);
}

TEST(EsGradient, RejectionsSurfaced) {
  // T = 0.95: perturbations of scale 0.5 destabilize most draws.
  EstimatorConfig cfg;
  cfg.n_samples = 2000;
  cfg.sigma_pert = 0.5;
  try {
    EsGradient(ScalarInstance(0.5, 1), ScalarTheta(1, 1), Policy(Scalar(-0.45)), cfg);
    FAIL() << "expected MarginTooSmallError";
  } catch (const MarginTooSmallError& e) {
    EXPECT_GT(2 * e.rejected(), e.drawn());
  }
  cfg.sigma_pert = 0.02;
  const auto ok =
      EsGradient(ScalarInstance(0.5, 1), ScalarTheta(1, 1), Policy(Scalar(-0.45)), cfg);
  EXPECT_GT(ok.rejected, 0);
  EXPECT_EQ(ok.drawn, 2000);
  EXPECT_THROW(EsGradient(ScalarInstance(2, 1), ScalarTheta(1, 1), Policy(Scalar(0)), cfg),
               InstabilityError);
}

TEST(EstimatorConfig, Validation) {
  EstimatorConfig cfg;
  cfg.n_samples = 0;
  EXPECT_THROW(cfg.Validate(), ContractError);
  cfg = {};
  cfg.sigma_pert = 0.0;
  EXPECT_THROW(cfg.Validate(), ContractError);
  cfg = {};
  cfg.horizon = 0;
  EXPECT_THROW(cfg.Validate(), ContractError);
}

TEST(RolloutSigma, HorizonOneEstimatesSigma0) {
  Matrix S0(2, 2);
  S0 << 2.0, 0.3, 0.3, 1.0;
  const LqrInstance inst(0.5 * Matrix::Identity(2, 2), Matrix::Identity(2, 1), S0);
  EstimatorConfig cfg;
  cfg.horizon = 1;
  cfg.n_rollouts = 20000;
  const RolloutSigmaResult r = RolloutSigma(inst, Policy(Matrix::Zero(1, 2)), cfg);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      const double se = std::sqrt((S0(i, i) * S0(j, j) + S0(i, j) * S0(i, j)) / 20000.0);
      EXPECT_NEAR(r.sigma(i, j), S0(i, j), 5.0 * se);
    }
  EXPECT_LT((r.sigma - r.sigma.transpose()).norm(), 1e-15);
}

TEST(RolloutSigma, ScalarLyapunovValue) {
  EstimatorConfig cfg;
  cfg.horizon = 50;
  cfg.n_rollouts = 100000;
  const RolloutSigmaResult r =
      RolloutSigma(ScalarInstance(0.5, 1), Policy(Scalar(0)), cfg);
  EXPECT_NEAR(r.sigma(0, 0), 4.0 / 3.0, 0.02 * 4.0 / 3.0);
  EXPECT_NEAR(r.rho, 0.5, 1e-15);
  EXPECT_NEAR(r.bias, std::pow(0.25, 50) * 4.0 / 3.0, 1e-40);
}

TEST(TruncatedSigma, EqualsPartialSum) {
  std::mt19937_64 rng(9);
  const auto t = testing::DrawTriple(rng, 3, 2, 0.9);
  const Matrix T = ClosedLoopMatrix(t.inst, t.pol);
  for (int H : {1, 2, 7, 40}) {
    Matrix sum = Matrix::Zero(3, 3), Tt = Matrix::Identity(3, 3);
    for (int s = 0; s < H; ++s) {
      sum += Tt * t.inst.sigma0() * Tt.transpose();
      Tt = T * Tt;
    }
    EXPECT_LE((TruncatedSigma(t.inst, t.pol, H) - sum).norm(), 1e-12 * sum.norm());
  }
  const Matrix full = StateCovariance(t.inst, t.pol);
  EstimatorConfig cfg;
  cfg.horizon = 20;
  cfg.n_rollouts = 1;
  const double bias = RolloutSigma(t.inst, t.pol, cfg).bias;
  EXPECT_NEAR(SpectralNorm(full - TruncatedSigma(t.inst, t.pol, 20)), bias, 1e-12 * full.norm());
}

}  // namespace
}  // namespace gail_lqr
