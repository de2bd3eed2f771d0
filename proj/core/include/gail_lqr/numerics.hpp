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

#include <Eigen/Core>

namespace gail_lqr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Every tolerance used by the solvers and validators, in one place.
struct NumericsConfig {
  /// Max absolute asymmetry accepted for matrices declared symmetric.
  double symmetry_tol = 1e-12;
  /// Relative Frobenius residual bound on Lyapunov solves.
  double lyapunov_rel_residual = 1e-10;
  /// Relative agreement between Tr(Sigma Q)+Tr(K Sigma K' R) and <Sigma0, P>.
  double cost_crosscheck_rel = 1e-8;
  /// A policy is stabilizing iff rho(A - BK) < 1 - stability_margin.
  double stability_margin = 0.0;
  /// Lyapunov equations up to this state dimension use the Kronecker form.
  int kronecker_max_dim = 4;
  /// Squaring steps allowed in the doubling iteration.
  int doubling_max_iter = 200;
  /// DARE value iteration stops when ||P_{j+1} - P_j||_F <= this.
  double riccati_change_tol = 1e-13;
  /// Relative residual bound on the DARE; a Newton step is taken above it.
  double riccati_rel_residual = 1e-10;
  int riccati_max_iter = 100000;
  double riccati_divergence_norm = 1e12;
  /// Asymmetry tolerated (and removed) by the feasible-set projection.
  double projection_symmetry_tol = 1e-9;
  /// Condition on the Riccati Jacobian: sigma_min(Y) > gate * sigma_max(Y).
  double condition4_rel_gate = 1e-8;
};

/// (M + M') / 2.
inline Matrix Symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

/// max |M_ij - M_ji|.
inline double MaxAsymmetry(const Matrix& m) {
  return (m - m.transpose()).cwiseAbs().maxCoeff();
}

/// Smallest eigenvalue of a symmetric matrix.
double MinEigenvalue(const Matrix& symmetric);

/// Largest eigenvalue of a symmetric matrix.
double MaxEigenvalue(const Matrix& symmetric);

/// Operator 2-norm (largest singular value).
double SpectralNorm(const Matrix& m);

/// Smallest singular value.
double MinSingularValue(const Matrix& m);

/// Row-major flattening, matching the (i-1)d + j indexing of the Riccati
/// Jacobian.
Vector FlattenRowMajor(const Matrix& m);

/// Derives an independent 64-bit stream seed from a root seed and an index.
/// Used so per-sample randomness does not depend on evaluation order.
std::uint64_t DeriveSeed(std::uint64_t root, std::uint64_t index);

}  // namespace gail_lqr
