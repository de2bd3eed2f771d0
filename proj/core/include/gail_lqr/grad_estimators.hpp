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


#pragma once

#include <cstdint>

#include "gail_lqr/lqr_core.hpp"

namespace gail_lqr {

struct EstimatorConfig {
  double sigma_pert = 1e-3;  ///< perturbation scale sigma
  int n_samples = 10000;     ///< perturbations (pairs count as two)
  int horizon = 100;         ///< rollout truncation H
  int n_rollouts = 1000;
  std::uint64_t seed = 0;
  /// Draw (eps, -eps) pairs.
  bool antithetic = true;
  /// Subtract C(K) from every sampled cost.
  bool baseline = false;

  /// Throws ContractError on non-positive sizes or scale.
  void Validate() const;
};

struct EsGradientResult {
  Matrix gradient;
  int drawn = 0;
  int rejected = 0;
};

/// Mean of C(K + eps; theta) eps / sigma^2 over eps with i.i.d. N(0, sigma^2)
/// entries. Draws whose perturbed policy is not stabilizing are rejected
/// (for antithetic sampling the whole pair is rejected). Throws
/// MarginTooSmallError when more than half the draws are rejected and
/// InstabilityError when pol itself is not stabilizing.
EsGradientResult EsGradient(const LqrInstance& inst, const CostParam& theta,
                            const Policy& pol, const EstimatorConfig& cfg,
                            const NumericsConfig& numerics = {});

struct RolloutSigmaResult {
  Matrix sigma;
  /// Truncation bias ||Sigma_K - E[estimate]|| = ||T^H Sigma_K T'^H||.
  double bias = 0.0;
  double rho = 0.0;
};

/// Average over n_rollouts of sum_{t<H} x_t x_t' with x_0 ~ N(0, Sigma0) and
/// x_{t+1} = (A - BK) x_t.
RolloutSigmaResult RolloutSigma(const LqrInstance& inst, const Policy& pol,
                                const EstimatorConfig& cfg);

/// sum_{t<H} T^t Sigma0 (T')^t, the noise-free counterpart of RolloutSigma.
Matrix TruncatedSigma(const LqrInstance& inst, const Policy& pol, int horizon);

}  // namespace gail_lqr
