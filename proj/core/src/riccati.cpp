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

#include "gail_lqr/riccati.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <Eigen/SVD>

namespace gail_lqr {
namespace {

double RelativeNorm(const Matrix& residual, const Matrix& P) {
  return residual.norm() / std::max(1.0, P.norm());
}

// (B'PB + R)^{-1} applied through an LDLT factorization; B'PB + R is SPD
// whenever P is PSD. The Jacobian treats the entries of P independently, so
// f is also evaluated at non-symmetric P; those systems go through LU.
Matrix SolveGainSystem(const Matrix& lhs, const Matrix& rhs) {
  if (MaxAsymmetry(lhs) > 1e-14 * std::max(1.0, lhs.norm())) {
    Eigen::FullPivLU<Matrix> lu(lhs);
    if (!lu.isInvertible()) throw NumericalFailure("B'PB + R is not invertible");
    return lu.solve(rhs);
  }
  Eigen::LDLT<Matrix> ldlt(Symmetrize(lhs));
  if (ldlt.info() != Eigen::Success)
    throw NumericalFailure("B'PB + R is not invertible");
  return ldlt.solve(rhs);
}

void NewtonRefine(const LqrInstance& inst, const CostParam& theta,
                  RiccatiSolution& sol, const NumericsConfig& numerics) {
  for (int step = 0; step < 5 && sol.residual > numerics.riccati_rel_residual;
       ++step) {
    const Eigen::Index d = inst.state_dim();
    const Matrix Y = RiccatiJacobianAt(inst, theta, sol.P);
    const Vector f = FlattenRowMajor(RiccatiResidual(inst, theta, sol.P));
    const Vector delta = Y.partialPivLu().solve(-f);
    Matrix update(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = 0; j < d; ++j) update(i, j) = delta(i * d + j);
    sol.P = Symmetrize(sol.P + update);
    sol.residual = RelativeNorm(RiccatiResidual(inst, theta, sol.P), sol.P);
    ++sol.iterations;
  }
}

void Finalize(const LqrInstance& inst, const CostParam& theta,
              RiccatiSolution& sol, const NumericsConfig& numerics) {
  sol.residual = RelativeNorm(RiccatiResidual(inst, theta, sol.P), sol.P);
  NewtonRefine(inst, theta, sol, numerics);
  if (!(sol.residual <= numerics.riccati_rel_residual))
    throw NumericalFailure("Riccati residual " + std::to_string(sol.residual) +
                           " exceeds bound");
  sol.K = RiccatiGain(inst, theta, sol.P);
  const double rho = SpectralRadius(inst.A() - inst.B() * sol.K);
  if (!(rho < 1.0))
    throw NotStabilizableError("Riccati solution is not stabilizing (rho = " +
                               std::to_string(rho) + ")");
}

}  // namespace

Matrix RiccatiResidual(const LqrInstance& inst, const CostParam& theta,
                       const Matrix& P) {
  const Matrix& A = inst.A();
  const Matrix& B = inst.B();
  // A'PB written out rather than (B'PA)': f is also evaluated at
  // non-symmetric P when differentiated entrywise.
  const Matrix gain = SolveGainSystem(B.transpose() * P * B + theta.R(),
                                      B.transpose() * P * A);
  return P - A.transpose() * P * A - theta.Q() + A.transpose() * P * B * gain;
}

Matrix RiccatiGain(const LqrInstance& inst, const CostParam& theta,
                   const Matrix& P) {
  const Matrix& B = inst.B();
  return SolveGainSystem(B.transpose() * P * B + theta.R(),
                         B.transpose() * P * inst.A());
}

RiccatiSolution SolveDare(const LqrInstance& inst, const CostParam& theta,
                          const NumericsConfig& numerics) {
  if (theta.Q().rows() != inst.state_dim() ||
      theta.R().rows() != inst.input_dim())
    throw ContractError("cost parameter shape does not match the instance");
  const Matrix& A = inst.A();
  const Matrix& B = inst.B();
  RiccatiSolution sol;
  sol.P = theta.Q();
  bool converged = false;
  for (int it = 1; it <= numerics.riccati_max_iter; ++it) {
    const Matrix BtPA = B.transpose() * sol.P * A;
    const Matrix gain =
        SolveGainSystem(B.transpose() * sol.P * B + theta.R(), BtPA);
    Matrix next = Symmetrize(theta.Q() + A.transpose() * sol.P * A -
                             BtPA.transpose() * gain);
    const double change = (next - sol.P).norm();
    sol.P = std::move(next);
    sol.iterations = it;
    if (!sol.P.allFinite() || sol.P.norm() > numerics.riccati_divergence_norm)
      throw NotStabilizableError("Riccati iteration diverged");
    if (change <= numerics.riccati_change_tol * std::max(1.0, sol.P.norm())) {
      converged = true;
      break;
    }
  }
  if (!converged)
    throw NotStabilizableError("Riccati iteration hit the iteration cap");
  Finalize(inst, theta, sol, numerics);
  return sol;
}

RiccatiSolution SolveDareFrom(const LqrInstance& inst, const CostParam& theta,
                              const Policy& stabilizing,
                              const NumericsConfig& numerics) {
  Matrix K = stabilizing.K();
  RiccatiSolution sol;
  for (int it = 1; it <= 60; ++it) {
    const ClosedLoopSolution cl =
        SolveClosedLoop(inst, theta, Policy(K), numerics);
    sol.P = cl.P;
    sol.iterations = it;
    Matrix next = RiccatiGain(inst, theta, sol.P);
    const double change = (next - K).norm();
    K = std::move(next);
    if (change <= 1e-14 * std::max(1.0, K.norm())) break;
  }
  Finalize(inst, theta, sol, numerics);
  return sol;
}

Policy ExpertPolicy(const LqrInstance& inst, const CostParam& theta_tilde,
                    const NumericsConfig& numerics) {
  return SolveDare(inst, theta_tilde, numerics).policy();
}

Matrix RiccatiDirectionalDerivative(const LqrInstance& inst,
                                    const CostParam& theta, const Matrix& P,
                                    const Matrix& delta) {
  const Matrix& A = inst.A();
  const Matrix& B = inst.B();
  const Matrix At = A.transpose();
  const Matrix Bt = B.transpose();
  const Matrix W = Bt * P * B + theta.R();
  const Matrix WinvBtPA = SolveGainSystem(W, Bt * P * A);
  const Matrix WinvBtDA = SolveGainSystem(W, Bt * delta * A);
  const Matrix AtPB = At * P * B;
  return delta - At * delta * A + At * delta * B * WinvBtPA +
         AtPB * WinvBtDA - AtPB * SolveGainSystem(W, Bt * delta * B) * WinvBtPA;
}

Matrix RiccatiJacobianAt(const LqrInstance& inst, const CostParam& theta,
                         const Matrix& P) {
  const Eigen::Index d = inst.state_dim();
  Matrix Y(d * d, d * d);
  for (Eigen::Index k = 0; k < d; ++k) {
    for (Eigen::Index l = 0; l < d; ++l) {
      Matrix basis = Matrix::Zero(d, d);
      basis(k, l) = 1.0;
      Y.col(k * d + l) =
          FlattenRowMajor(RiccatiDirectionalDerivative(inst, theta, P, basis));
    }
  }
  return Y;
}

Matrix RiccatiJacobian(const LqrInstance& inst, const CostParam& theta,
                       const NumericsConfig& numerics) {
  return RiccatiJacobianAt(inst, theta, SolveDare(inst, theta, numerics).P);
}

Condition4Report CheckCondition4(const LqrInstance& inst,
                                 const CostParam& theta,
                                 const NumericsConfig& numerics) {
  const Matrix Y = RiccatiJacobian(inst, theta, numerics);
  Eigen::JacobiSVD<Matrix> svd(Y);
  const Vector& s = svd.singularValues();
  Condition4Report out;
  out.sigma_max = s(0);
  out.sigma_min = s(s.size() - 1);
  out.holds = out.sigma_min > numerics.condition4_rel_gate * out.sigma_max;
  return out;
}

}  // namespace gail_lqr
