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

#include <utility>

#include "gail_lqr/errors.hpp"
#include "gail_lqr/numerics.hpp"

namespace gail_lqr {

/// Deterministic linear dynamics x_{t+1} = A x_t + B u_t with a random
/// initial state of second moment Sigma0 = E[x0 x0'].
///
/// The constructor validates shapes, symmetry of Sigma0 and Sigma0 > 0, and
/// caches mu = sigma_min(Sigma0).
class LqrInstance {
 public:
  LqrInstance(Matrix A, Matrix B, Matrix sigma0,
              const NumericsConfig& numerics = {});

  const Matrix& A() const noexcept { return a_; }
  const Matrix& B() const noexcept { return b_; }
  const Matrix& sigma0() const noexcept { return sigma0_; }
  int state_dim() const noexcept { return static_cast<int>(a_.rows()); }
  int input_dim() const noexcept { return static_cast<int>(b_.cols()); }
  /// Smallest eigenvalue of Sigma0.
  double mu() const noexcept { return mu_; }

 private:
  Matrix a_;
  Matrix b_;
  Matrix sigma0_;
  double mu_;
};

/// A cost parameter theta = (Q, R), both symmetric positive definite.
class CostParam {
 public:
  CostParam(Matrix Q, Matrix R, double symmetry_tol = 1e-12);

  const Matrix& Q() const noexcept { return q_; }
  const Matrix& R() const noexcept { return r_; }

  /// sqrt(||Q||_F^2 + ||R||_F^2).
  double norm() const;

 private:
  Matrix q_;
  Matrix r_;
};

/// Frobenius distance between two cost parameters of equal shape.
double Distance(const CostParam& a, const CostParam& b);

/// Linear state feedback u = -K x with K of shape k x d.
class Policy {
 public:
  explicit Policy(Matrix K) : k_(std::move(K)) {}

  const Matrix& K() const noexcept { return k_; }

 private:
  Matrix k_;
};

/// Closed-loop quantities of a stabilizing policy.
struct ClosedLoopSolution {
  Matrix T;      ///< A - B K
  Matrix sigma;  ///< solves Sigma = Sigma0 + T Sigma T'
  Matrix P;      ///< solves P = Q + K' R K + T' P T
  double rho;    ///< spectral radius of T
};

/// Largest eigenvalue modulus of a square matrix.
double SpectralRadius(const Matrix& m);

/// rho(A - BK) < 1 - margin.
bool IsStabilizing(const LqrInstance& inst, const Policy& pol,
                   double margin = 0.0);

/// A - B K, with dimension checks.
Matrix ClosedLoopMatrix(const LqrInstance& inst, const Policy& pol);

/// Solves X = S + T X T' for a Schur-stable T. Kronecker vectorization up to
/// numerics.kronecker_max_dim, Smith doubling above it. The relative
/// residual is checked against numerics.lyapunov_rel_residual.
Matrix SolveDiscreteLyapunov(const Matrix& T, const Matrix& S,
                             const NumericsConfig& numerics = {});

/// Sigma_K, the infinite-horizon state second moment under pol.
Matrix StateCovariance(const LqrInstance& inst, const Policy& pol,
                       const NumericsConfig& numerics = {});

/// Sigma_K and the cost-to-go P_K. Throws InstabilityError when pol is not
/// stabilizing.
ClosedLoopSolution SolveClosedLoop(const LqrInstance& inst,
                                   const CostParam& theta, const Policy& pol,
                                   const NumericsConfig& numerics = {});

/// Tr(Sigma Q) + Tr(K Sigma K' R) for a given Sigma_K.
double CostFromCovariance(const CostParam& theta, const Policy& pol,
                          const Matrix& sigma);

/// C(K; Q, R). Cross-checked against <Sigma0, P_K>; a disagreement beyond
/// numerics.cost_crosscheck_rel raises NumericalFailure.
double Cost(const LqrInstance& inst, const CostParam& theta, const Policy& pol,
            const NumericsConfig& numerics = {});

struct PolicyGradient {
  Matrix gradient;  ///< 2 E_K Sigma_K
  Matrix E;         ///< (R + B' P B) K - B' P A
  ClosedLoopSolution closed_loop;
};

/// Exact gradient of C(K; theta) with respect to K.
PolicyGradient ComputePolicyGradient(const LqrInstance& inst,
                                     const CostParam& theta, const Policy& pol,
                                     const NumericsConfig& numerics = {});

}  // namespace gail_lqr
