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

#include "gail_lqr/lqr_core.hpp"

namespace gail_lqr {

/// Stabilizing solution of the discrete algebraic Riccati equation
///   f(P) = P - A'PA - Q + A'PB (B'PB + R)^{-1} B'PA = 0
/// and the optimal gain K* = (B'PB + R)^{-1} B'PA.
struct RiccatiSolution {
  Matrix P;
  Matrix K;
  /// ||f(P)||_F / max(1, ||P||_F).
  double residual = 0.0;
  int iterations = 0;

  Policy policy() const { return Policy(K); }
};

/// f(P, Q, R).
Matrix RiccatiResidual(const LqrInstance& inst, const CostParam& theta,
                       const Matrix& P);

/// (B'PB + R)^{-1} B'PA.
Matrix RiccatiGain(const LqrInstance& inst, const CostParam& theta,
                   const Matrix& P);

/// Value iteration from P0 = Q until the Frobenius change drops below
/// numerics.riccati_change_tol (scaled by max(1, ||P||_F)), then Newton
/// refinement while the residual exceeds numerics.riccati_rel_residual.
/// Throws NotStabilizableError on divergence or when the iteration cap is
/// reached.
RiccatiSolution SolveDare(const LqrInstance& inst, const CostParam& theta,
                          const NumericsConfig& numerics = {});

/// Policy iteration (Hewer) started from a stabilizing gain; converges
/// quadratically and is used when a nearby solution is already known.
RiccatiSolution SolveDareFrom(const LqrInstance& inst, const CostParam& theta,
                              const Policy& stabilizing,
                              const NumericsConfig& numerics = {});

/// K_E = argmin_K C(K; theta_tilde).
Policy ExpertPolicy(const LqrInstance& inst, const CostParam& theta_tilde,
                    const NumericsConfig& numerics = {});

/// Directional derivative of f with respect to P, at P, along delta.
Matrix RiccatiDirectionalDerivative(const LqrInstance& inst,
                                    const CostParam& theta, const Matrix& P,
                                    const Matrix& delta);

/// d^2 x d^2 Jacobian Y with Y[i*d + j, k*d + l] = d f_ij / d P_kl at P.
Matrix RiccatiJacobianAt(const LqrInstance& inst, const CostParam& theta,
                         const Matrix& P);

/// Jacobian Y at the stabilizing solution P*(theta).
Matrix RiccatiJacobian(const LqrInstance& inst, const CostParam& theta,
                       const NumericsConfig& numerics = {});

struct Condition4Report {
  bool holds = false;
  double sigma_min = 0.0;
  double sigma_max = 0.0;
};

/// Regularity of the Riccati map: sigma_min(Y) > gate * sigma_max(Y).
Condition4Report CheckCondition4(const LqrInstance& inst,
                                 const CostParam& theta,
                                 const NumericsConfig& numerics = {});

}  // namespace gail_lqr
