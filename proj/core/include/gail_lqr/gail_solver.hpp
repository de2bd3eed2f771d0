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

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gail_lqr/lqr_core.hpp"

namespace gail_lqr {

/// Feasible set of cost parameters:
///   alpha_Q I <= Q <= beta_Q I,  alpha_R I <= R <= beta_R I.
struct ThetaBox {
  double alpha_Q = 1.0;
  double beta_Q = 1.0;
  double alpha_R = 1.0;
  double beta_R = 1.0;

  /// Throws ContractError unless 0 < alpha <= beta for both blocks.
  void Validate() const;
  /// min(alpha_Q, alpha_R).
  double alpha() const;
  /// sup over the box of sqrt(||Q||_F^2 + ||R||_F^2), attained at beta I.
  double SigmaTheta(int d, int k) const;
  /// Eigenvalues of both blocks lie in their intervals, up to tol.
  bool Contains(const CostParam& theta, double tol = 1e-12) const;
};

/// An unconstrained symmetric pair (dQ, dR): gradients and raw steps in
/// cost-parameter space.
struct ThetaPair {
  Matrix Q;
  Matrix R;

  static ThetaPair Of(const CostParam& theta) { return {theta.Q(), theta.R()}; }
  double norm() const;
  double squaredNorm() const;
  ThetaPair operator+(const ThetaPair& o) const { return {Q + o.Q, R + o.R}; }
  ThetaPair operator-(const ThetaPair& o) const { return {Q - o.Q, R - o.R}; }
  ThetaPair operator*(double s) const { return {Q * s, R * s}; }
};

/// Regularizer contract: value, gradient, and the strong-convexity and
/// smoothness moduli that enter the stepsize conditions.
class CostRegularizer {
 public:
  virtual ~CostRegularizer() = default;

  virtual double Value(const CostParam& theta) const = 0;
  virtual ThetaPair Gradient(const CostParam& theta) const = 0;
  virtual double StrongConvexity() const = 0;
  virtual double Smoothness() const = 0;

  struct GradientBound {
    double q = 0.0;  ///< sup over the box of ||grad_Q psi||_F
    double r = 0.0;  ///< sup over the box of ||grad_R psi||_F
  };
  /// Suprema of the gradient block norms over the feasible set.
  virtual GradientBound SupGradientNorm(const ThetaBox& box) const = 0;
  /// sup over the feasible set of psi.
  virtual double SupValue(const ThetaBox& box) const = 0;
  /// A reference point used for distance reporting, if the regularizer has
  /// one.
  virtual const CostParam* center() const { return nullptr; }
};

/// psi(Q, R) = gamma * (||Q - Qbar||_F^2 + ||R - Rbar||_F^2).
/// Strongly convex and smooth with modulus 2 gamma.
class SquaredPenalty final : public CostRegularizer {
 public:
  SquaredPenalty(double gamma, CostParam center);

  double gamma() const noexcept { return gamma_; }

  double Value(const CostParam& theta) const override;
  ThetaPair Gradient(const CostParam& theta) const override;
  double StrongConvexity() const override { return 2.0 * gamma_; }
  double Smoothness() const override { return 2.0 * gamma_; }
  GradientBound SupGradientNorm(const ThetaBox& box) const override;
  double SupValue(const ThetaBox& box) const override;
  const CostParam* center() const override { return &center_; }

 private:
  double gamma_;
  CostParam center_;
};

/// Frobenius projection onto the feasible set: each block is symmetrized
/// (asymmetry up to numerics.projection_symmetry_tol is accepted) and its
/// eigenvalues are clipped to the block interval.
CostParam ProjectTheta(const ThetaPair& raw, const ThetaBox& box,
                       const NumericsConfig& numerics = {});

/// Static data of one imitation problem: dynamics, expert, feasible set and
/// regularizer. Caches the expert's occupancy V(K_E) = (Sigma_E, K_E Sigma_E K_E').
class GailProblem {
 public:
  GailProblem(LqrInstance instance, Policy expert, ThetaBox box,
              std::shared_ptr<const CostRegularizer> regularizer,
              const NumericsConfig& numerics = {});

  const LqrInstance& instance() const noexcept { return instance_; }
  const Policy& expert() const noexcept { return expert_; }
  const ThetaBox& box() const noexcept { return box_; }
  const CostRegularizer& regularizer() const noexcept { return *regularizer_; }
  const NumericsConfig& numerics() const noexcept { return numerics_; }
  /// (Sigma_{K_E}, K_E Sigma_{K_E} K_E').
  const ThetaPair& expert_occupancy() const noexcept { return expert_occ_; }

 private:
  LqrInstance instance_;
  Policy expert_;
  ThetaBox box_;
  std::shared_ptr<const CostRegularizer> regularizer_;
  NumericsConfig numerics_;
  ThetaPair expert_occ_;
};

/// (Sigma_K, K Sigma_K K') for a given Sigma_K.
ThetaPair Occupancy(const Policy& pol, const Matrix& sigma);

/// m(K, theta) = C(K; theta) - C(K_E; theta) - psi(theta).
/// Throws InstabilityError naming the offending policy.
double ObjectiveM(const GailProblem& problem, const CostParam& theta,
                  const Policy& pol);

/// (grad_Q m, grad_R m) at (pol_next, theta): occupancy difference minus
/// grad psi(theta).
ThetaPair GradThetaM(const GailProblem& problem, const CostParam& theta,
                     const Policy& pol_next);

struct SolverState {
  Policy K;
  CostParam theta;
};

enum class EvaluationStage { kPolicyGradient, kCostGradient };

/// Observer called with the policy at which each gradient is evaluated.
using EvaluationHook = std::function<void(EvaluationStage, const Matrix& K)>;

struct SolverConfig {
  double eta = 1e-3;     ///< policy stepsize
  double lambda = 1e-4;  ///< cost-parameter stepsize
  double eps = 1e-12;    ///< stop when ||L||_F^2 <= eps
  int max_iter = 100000;
  NumericsConfig numerics{};
  EvaluationHook on_evaluate{};

  /// Throws ContractError unless eta, lambda, eps > 0 and max_iter >= 1.
  void Validate() const;
};

/// One alternating iteration: gradient descent on K at (K_i, theta_i), then
/// projected ascent on theta using the gradient at (K_{i+1}, theta_i).
/// Throws InstabilityError if K_{i+1} is not stabilizing.
SolverState Step(const GailProblem& problem, const SolverState& state,
                 const SolverConfig& config);

struct ProximalGradient {
  Matrix K_block;      ///< grad_K m(K, theta)
  ThetaPair theta_block;  ///< theta - Proj[theta + grad_theta m(K, theta)]
  double norm = 0.0;   ///< Frobenius norm of both blocks together
};

/// Stationarity measure L(K, theta); zero exactly at the saddle point.
ProximalGradient ComputeProximalGradient(const GailProblem& problem,
                                         const SolverState& state);

struct IterateRecord {
  int iter = 0;
  Policy K;
  CostParam theta;
  double cost = 0.0;           ///< C(K_i; theta_i)
  double objective = 0.0;      ///< m(K_i, theta_i)
  double prox_grad_norm = 0.0; ///< ||L(K_i, theta_i)||_F
  double rho = 0.0;            ///< rho(A - B K_i)
  double K_dist_to_expert = 0.0;
  double theta_dist_to_center = 0.0;  ///< NaN without a regularizer center
  double sigma_norm = 0.0;     ///< ||Sigma_{K_i}|| (operator norm)
  double K_norm = 0.0;         ///< ||K_i|| (operator norm)
  double K_step_sq = 0.0;      ///< ||K_i - K_{i-1}||_F^2, 0 at i = 0
  double theta_step_sq = 0.0;  ///< ||theta_i - theta_{i-1}||_F^2, 0 at i = 0
  std::optional<double> potential{};  ///< P_i, filled by diagnostics
  std::optional<double> z_local{};    ///< Z_i, filled by diagnostics
  double wall_time_ms = 0.0;
};

struct IterateTrace {
  std::vector<IterateRecord> records;

  bool empty() const noexcept { return records.empty(); }
  std::size_t size() const noexcept { return records.size(); }
  const IterateRecord& back() const { return records.back(); }
  /// Smallest index with ||L||_F^2 <= eps, if any.
  std::optional<int> GammaIndex(double eps) const;
};

enum class SolveStatus { kConverged, kMaxIterations, kUnstable };

std::string ToString(SolveStatus status);

struct SolveResult {
  SolveStatus status = SolveStatus::kMaxIterations;
  /// Final iterate; the last stabilizing one when status is kUnstable.
  SolverState state;
  IterateTrace trace;
  /// First index meeting ||L||_F^2 <= eps.
  std::optional<int> gamma_eps;
  /// Closed-loop spectral radius of the rejected policy when kUnstable.
  std::optional<double> unstable_rho;
  std::string message;
};

/// Runs Step until ||L||_F^2 <= eps or max_iter steps were taken. Instability
/// halts the run and is reported through the status with the trace so far.
SolveResult Solve(const GailProblem& problem, const Policy& K0,
                  const CostParam& theta0, const SolverConfig& config);

}  // namespace gail_lqr
