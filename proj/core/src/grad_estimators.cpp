/*
 * Copyright 2026 The gail-lqr Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#include "gail_lqr/grad_estimators.hpp"

#include <cmath>
#include <optional>
#include <random>
#include <string>

#include <Eigen/Cholesky>

namespace gail_lqr {
namespace {

Matrix Gaussian(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols,
                double scale) {
  std::normal_distribution<double> normal(0.0, scale);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  return m;
}

// Cost of a perturbed policy, or nullopt if it is not stabilizing.
std::optional<double> PerturbedCost(const LqrInstance& inst,
                                    const CostParam& theta, const Matrix& K,
                                    const NumericsConfig& numerics) {
  const Policy p(K);
  if (!IsStabilizing(inst, p, numerics.stability_margin)) return std::nullopt;
  try {
    return CostFromCovariance(theta, p, StateCovariance(inst, p, numerics));
  } catch (const NumericalFailure&) {
    return std::nullopt;
  }
}

}  // namespace

void EstimatorConfig::Validate() const {
  if (!(sigma_pert > 0.0)) throw ContractError("sigma_pert must be > 0");
  if (n_samples < 1) throw ContractError("n_samples must be >= 1");
  if (horizon < 1) throw ContractError("horizon must be >= 1");
  if (n_rollouts < 1) throw ContractError("n_rollouts must be >= 1");
}

EsGradientResult EsGradient(const LqrInstance& inst, const CostParam& theta,
                            const Policy& pol, const EstimatorConfig& cfg,
                            const NumericsConfig& numerics) {
  cfg.Validate();
  const Matrix& K = pol.K();
  const double base =
      CostFromCovariance(theta, pol, StateCovariance(inst, pol, numerics));
  const double offset = cfg.baseline ? base : 0.0;
  const double var = cfg.sigma_pert * cfg.sigma_pert;

  EsGradientResult out;
  out.gradient = Matrix::Zero(K.rows(), K.cols());
  int accepted = 0;
  const int draws = cfg.antithetic ? (cfg.n_samples + 1) / 2 : cfg.n_samples;
  // Accumulate in index order so the result depends only on the seed.
  for (int i = 0; i < draws; ++i) {
    std::mt19937_64 rng(DeriveSeed(cfg.seed, static_cast<std::uint64_t>(i)));
    const Matrix eps = Gaussian(rng, K.rows(), K.cols(), cfg.sigma_pert);
    if (cfg.antithetic) {
      out.drawn += 2;
      const auto plus = PerturbedCost(inst, theta, K + eps, numerics);
      const auto minus = PerturbedCost(inst, theta, K - eps, numerics);
      if (!plus || !minus) {
        out.rejected += 2;
        continue;
      }
      out.gradient += ((*plus - offset) - (*minus - offset)) / var * eps;
      accepted += 2;
    } else {
      ++out.drawn;
      const auto c = PerturbedCost(inst, theta, K + eps, numerics);
      if (!c) {
        ++out.rejected;
        continue;
      }
      out.gradient += (*c - offset) / var * eps;
      ++accepted;
    }
  }
  if (2 * out.rejected > out.drawn)
    throw MarginTooSmallError(
        std::to_string(out.rejected) + " of " + std::to_string(out.drawn) +
            " perturbed policies were destabilizing; reduce sigma_pert",
        out.rejected, out.drawn);
  out.gradient /= static_cast<double>(accepted);
  return out;
}

RolloutSigmaResult RolloutSigma(const LqrInstance& inst, const Policy& pol,
                                const EstimatorConfig& cfg) {
  cfg.Validate();
  const Matrix T = ClosedLoopMatrix(inst, pol);
  RolloutSigmaResult out;
  out.rho = SpectralRadius(T);
  if (!(out.rho < 1.0))
    throw InstabilityError(
        "policy is not stabilizing (rho = " + std::to_string(out.rho) + ")",
        out.rho);
  const Eigen::Index d = inst.state_dim();
  const Eigen::LLT<Matrix> chol(inst.sigma0());
  const Matrix L = chol.matrixL();
  out.sigma = Matrix::Zero(d, d);
  for (int r = 0; r < cfg.n_rollouts; ++r) {
    std::mt19937_64 rng(DeriveSeed(cfg.seed, static_cast<std::uint64_t>(r)));
    Vector x = L * Gaussian(rng, d, 1, 1.0);
    for (int t = 0; t < cfg.horizon; ++t) {
      out.sigma.noalias() += x * x.transpose();
      x = T * x;
    }
  }
  out.sigma = Symmetrize(out.sigma / cfg.n_rollouts);
  // Sigma_K - sum_{t<H} T^t Sigma0 T'^t = T^H Sigma_K T'^H exactly.
  Matrix TH = Matrix::Identity(d, d);
  for (int t = 0; t < cfg.horizon; ++t) TH = T * TH;
  out.bias = SpectralNorm(TH * SolveDiscreteLyapunov(T, inst.sigma0()) *
                          TH.transpose());
  return out;
}

Matrix TruncatedSigma(const LqrInstance& inst, const Policy& pol, int horizon) {
  if (horizon < 1) throw ContractError("horizon must be >= 1");
  const Matrix T = ClosedLoopMatrix(inst, pol);
  Matrix term = inst.sigma0();
  Matrix sum = Matrix::Zero(term.rows(), term.cols());
  for (int t = 0; t < horizon; ++t) {
    sum += term;
    term = T * term * T.transpose();
  }
  return Symmetrize(sum);
}

}  // namespace gail_lqr
