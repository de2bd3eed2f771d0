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
#include <optional>
#include <string>
#include <vector>

#include "gail_lqr/gail_solver.hpp"

namespace gail_lqr {

/// Lipschitz and smoothness moduli of Sigma_K and V(K) = diag(Sigma_K,
/// K Sigma_K K') over {K : ||Sigma_K|| <= S}. Sampled, so they are
/// lower-bound-style estimates inflated by a safety factor.
struct LipschitzEstimates {
  double tau_sigma = 0.0;
  double nu_sigma = 0.0;
  double tau_V = 0.0;
  double nu_V = 0.0;
  double region_bound = 0.0;  ///< S
  int accepted = 0;
  int drawn = 0;
  bool estimated = true;  ///< false when supplied by the user
};

/// Moduli of K*(theta) and m*(theta) = m(K*(theta), theta) near theta*.
struct LocalModuli {
  double tau_Kstar = 0.0;
  double nu_Kstar = 0.0;
  double nu_mstar = 0.0;
  double radius = 0.0;
  int accepted = 0;
};

/// Closed-form problem constants plus optional estimated moduli.
/// gamma and nu are the regularizer's strong-convexity and smoothness moduli.
struct ProblemConstants {
  int d = 0;
  int k = 0;
  ThetaBox box;
  double alpha = 0.0;
  double mu = 0.0;
  double sigma_theta = 0.0;
  double M = 0.0;
  double F = 0.0;
  double kappa1 = 0.0;
  double kappa2 = 0.0;
  double B_norm = 0.0;  ///< ||B|| (operator norm)
  double gamma = 0.0;
  double nu = 0.0;
  std::optional<LipschitzEstimates> lipschitz;
  std::optional<LocalModuli> local;

  /// alpha F + 2M, the cost envelope along the solution path.
  double Envelope() const { return alpha * F + 2.0 * M; }
};

/// alpha, mu, sigma_theta, M (at K0), F, kappa1, kappa2 and the regularizer
/// moduli. Throws InstabilityError if K0 is not stabilizing.
ProblemConstants ComputeConstants(const GailProblem& problem, const Policy& K0);

/// One scalar requirement value <= bound (or < bound when strict).
struct BoundCheck {
  std::string name;
  double value = 0.0;
  double bound = 0.0;
  bool strict = false;
  bool pass = false;
};

struct ConditionVerdict {
  std::string condition;
  bool pass = false;
  std::vector<BoundCheck> checks;
  /// The check with the largest value/bound ratio.
  std::string binding;
};

ConditionVerdict CheckCondition1(const ProblemConstants& c, double eta,
                                 double lambda);
/// Throws UnsupportedError without nu_V.
ConditionVerdict CheckCondition2(const ProblemConstants& c);
/// Throws UnsupportedError without tau_V, nu_V.
ConditionVerdict CheckCondition3(const ProblemConstants& c, double eta,
                                 double lambda);
/// Throws UnsupportedError without the local moduli.
ConditionVerdict CheckCondition5(const ProblemConstants& c, double eta,
                                 double lambda);

/// The three eta bounds of Condition 1 and its lambda/eta ratio bound.
struct Condition1Bounds {
  double eta_curvature = 0.0;
  double eta_smoothness = 0.0;
  double eta_cap = 0.0;
  double ratio = 0.0;
  double eta_max() const;
};
Condition1Bounds Condition1Limits(const ProblemConstants& c);

/// Local contraction factor upsilon and the weight a used in Z_i.
/// Throws UnsupportedError without tau_V and the local moduli.
struct UpsilonReport {
  double a = 0.0;
  double upsilon = 0.0;
  double branch_theta = 0.0;
  double branch_policy = 0.0;
};
UpsilonReport ComputeUpsilon(const ProblemConstants& c, double eta,
                             double lambda);

struct AutoStepsizes {
  double eta = 0.0;
  double lambda = 0.0;
  /// True when the Condition 3 bounds were also imposed.
  bool clamped_to_condition3 = false;
  /// True when lambda/eta was also kept below the ratio that makes the
  /// policy branch of upsilon smaller than one.
  bool targets_contraction = false;
};

struct StepsizePolicy {
  /// Impose the Condition 3 bounds when the Lipschitz moduli are present.
  bool condition3 = true;
  /// Keep lambda/eta below the ratio that makes upsilon < 1 when the
  /// Lipschitz and local moduli are present.
  bool contraction = true;
};

/// Largest eta passing Condition 1 and lambda = eta * ratio / 2. Depending
/// on `policy` and the available moduli the pair is further reduced to
/// satisfy Condition 3 and to make upsilon < 1; inside the resulting
/// lambda/eta window the ratio is the geometric mean of its ends. Throws
/// NumericalFailure when the constants admit no passing pair (e.g. NaN).
AutoStepsizes ChooseStepsizes(const ProblemConstants& c,
                              const StepsizePolicy& policy = {});

/// Samples policy pairs in {K : ||Sigma_K|| <= S} along random rays from
/// `anchor` and returns the largest observed difference ratios times
/// `safety`. Sample i draws from DeriveSeed(seed, i), so the estimates are
/// nondecreasing in `samples`. Throws InsufficientCoverageError when fewer
/// than 10 samples land in the region.
LipschitzEstimates EstimateLipschitz(const LqrInstance& inst,
                                     const Policy& anchor, double S,
                                     int samples, std::uint64_t seed,
                                     double safety = 2.0,
                                     const NumericsConfig& numerics = {});

/// S = (alpha F + 2M) / alpha_Q.
double DefaultRegionBound(const ProblemConstants& c);

/// Samples theta in a Frobenius ball of `radius` around theta_star and
/// estimates tau_{K*}, nu_{K*} (second differences of K*(theta)) and
/// nu_{m*} (difference ratios of grad m*(theta) = V(K*(theta)) - V(K_E) -
/// grad psi(theta)), each times `safety`.
LocalModuli EstimateLocalModuli(const GailProblem& problem,
                                const CostParam& theta_star, double radius,
                                int samples, std::uint64_t seed,
                                double safety = 2.0);

/// Derivative of Sigma_K along dK: solves X = T X T' - B dK Sigma T' -
/// T Sigma dK' B'.
Matrix SigmaDirectional(const LqrInstance& inst, const Policy& pol,
                        const Matrix& sigma, const Matrix& dK,
                        const NumericsConfig& numerics = {});

}  // namespace gail_lqr
