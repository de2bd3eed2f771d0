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

#include "gail_lqr/lqr_core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

namespace gail_lqr {
namespace {

std::string Shape(const Matrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

void RequireSymmetricPositiveDefinite(const Matrix& m, const char* name,
                                      double symmetry_tol) {
  if (m.rows() != m.cols() || m.rows() == 0)
    throw ContractError(std::string(name) + " must be square and non-empty, got " +
                        Shape(m));
  if (!m.allFinite())
    throw ContractError(std::string(name) + " has non-finite entries");
  if (MaxAsymmetry(m) > symmetry_tol)
    throw ContractError(std::string(name) + " is not symmetric");
  if (Eigen::LLT<Matrix>(Symmetrize(m)).info() != Eigen::Success)
    throw ContractError(std::string(name) + " is not positive definite");
}

double RelativeResidual(const Matrix& residual, const Matrix& x) {
  return residual.norm() / std::max(1.0, x.norm());
}

Matrix LyapunovKronecker(const Matrix& T, const Matrix& S) {
  const Eigen::Index n = T.rows();
  const Eigen::Index n2 = n * n;
  // Column-major vec: vec(T X T') = (T kron T) vec(X).
  Matrix system = Matrix::Identity(n2, n2);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      system.block(i * n, j * n, n, n) -= T(i, j) * T;
  Eigen::PartialPivLU<Matrix> lu(system);
  Vector s = Eigen::Map<const Vector>(S.data(), n2);
  Vector x = lu.solve(s);
  // One step of iterative refinement.
  Vector r = s - system * x;
  x += lu.solve(r);
  return Eigen::Map<Matrix>(x.data(), n, n);
}

Matrix LyapunovDoubling(const Matrix& T, const Matrix& S, int max_iter) {
  Matrix x = S;
  Matrix power = T;
  for (int it = 0; it < max_iter; ++it) {
    Matrix increment = power * x * power.transpose();
    x += increment;
    if (increment.norm() <= 1e-18 * std::max(1.0, x.norm())) return x;
    power = power * power;
    if (!power.allFinite()) break;
  }
  throw NumericalFailure("Lyapunov doubling iteration did not converge");
}

}  // namespace

LqrInstance::LqrInstance(Matrix A, Matrix B, Matrix sigma0,
                         const NumericsConfig& numerics)
    : a_(std::move(A)), b_(std::move(B)), sigma0_(std::move(sigma0)) {
  if (a_.rows() < 1 || a_.rows() != a_.cols())
    throw ContractError("A must be square with d >= 1, got " + Shape(a_));
  if (b_.rows() != a_.rows() || b_.cols() < 1)
    throw ContractError("B must be " + std::to_string(a_.rows()) +
                        "xk with k >= 1, got " + Shape(b_));
  if (sigma0_.rows() != a_.rows() || sigma0_.cols() != a_.rows())
    throw ContractError("Sigma0 must match A, got " + Shape(sigma0_));
  if (!a_.allFinite() || !b_.allFinite())
    throw ContractError("A and B must be finite");
  RequireSymmetricPositiveDefinite(sigma0_, "Sigma0", numerics.symmetry_tol);
  mu_ = MinEigenvalue(sigma0_);
}

CostParam::CostParam(Matrix Q, Matrix R, double symmetry_tol)
    : q_(std::move(Q)), r_(std::move(R)) {
  RequireSymmetricPositiveDefinite(q_, "Q", symmetry_tol);
  RequireSymmetricPositiveDefinite(r_, "R", symmetry_tol);
}

double CostParam::norm() const {
  return std::sqrt(q_.squaredNorm() + r_.squaredNorm());
}

double Distance(const CostParam& a, const CostParam& b) {
  return std::sqrt((a.Q() - b.Q()).squaredNorm() +
                   (a.R() - b.R()).squaredNorm());
}

double SpectralRadius(const Matrix& m) {
  if (m.rows() != m.cols())
    throw ContractError("spectral radius needs a square matrix, got " +
                        Shape(m));
  if (m.size() == 0) return 0.0;
  if (m.rows() == 1) return std::abs(m(0, 0));
  Eigen::EigenSolver<Matrix> eig(m, false);
  if (eig.info() != Eigen::Success)
    throw NumericalFailure("eigenvalue iteration failed");
  return eig.eigenvalues().cwiseAbs().maxCoeff();
}

Matrix ClosedLoopMatrix(const LqrInstance& inst, const Policy& pol) {
  if (pol.K().rows() != inst.input_dim() || pol.K().cols() != inst.state_dim())
    throw ContractError("policy must be " + std::to_string(inst.input_dim()) +
                        "x" + std::to_string(inst.state_dim()) + ", got " +
                        Shape(pol.K()));
  return inst.A() - inst.B() * pol.K();
}

bool IsStabilizing(const LqrInstance& inst, const Policy& pol, double margin) {
  const Matrix T = ClosedLoopMatrix(inst, pol);
  if (!T.allFinite()) return false;
  return SpectralRadius(T) < 1.0 - margin;
}

Matrix SolveDiscreteLyapunov(const Matrix& T, const Matrix& S,
                             const NumericsConfig& numerics) {
  if (T.rows() != T.cols() || S.rows() != T.rows() || S.cols() != T.rows())
    throw ContractError("Lyapunov operands must be square and conformant");
  Matrix x = T.rows() <= numerics.kronecker_max_dim
                 ? LyapunovKronecker(T, S)
                 : LyapunovDoubling(T, S, numerics.doubling_max_iter);
  x = Symmetrize(x);
  const Matrix residual = x - S - T * x * T.transpose();
  const double rel = RelativeResidual(residual, x);
  if (!(rel <= numerics.lyapunov_rel_residual))
    throw NumericalFailure("Lyapunov residual " + std::to_string(rel) +
                           " exceeds bound");
  return x;
}

Matrix StateCovariance(const LqrInstance& inst, const Policy& pol,
                       const NumericsConfig& numerics) {
  const Matrix T = ClosedLoopMatrix(inst, pol);
  const double rho = T.allFinite() ? SpectralRadius(T) : INFINITY;
  if (!(rho < 1.0 - numerics.stability_margin))
    throw InstabilityError(
        "policy is not stabilizing (rho = " + std::to_string(rho) + ")", rho);
  return SolveDiscreteLyapunov(T, inst.sigma0(), numerics);
}

ClosedLoopSolution SolveClosedLoop(const LqrInstance& inst,
                                   const CostParam& theta, const Policy& pol,
                                   const NumericsConfig& numerics) {
  if (theta.Q().rows() != inst.state_dim() ||
      theta.R().rows() != inst.input_dim())
    throw ContractError("cost parameter shape does not match the instance");
  ClosedLoopSolution out;
  out.T = ClosedLoopMatrix(inst, pol);
  out.rho = out.T.allFinite() ? SpectralRadius(out.T) : INFINITY;
  if (!(out.rho < 1.0 - numerics.stability_margin))
    throw InstabilityError(
        "policy is not stabilizing (rho = " + std::to_string(out.rho) + ")",
        out.rho);
  const Matrix& K = pol.K();
  out.sigma = SolveDiscreteLyapunov(out.T, inst.sigma0(), numerics);
  out.P = SolveDiscreteLyapunov(out.T.transpose(),
                                theta.Q() + K.transpose() * theta.R() * K,
                                numerics);
  return out;
}

double CostFromCovariance(const CostParam& theta, const Policy& pol,
                          const Matrix& sigma) {
  const Matrix& K = pol.K();
  return (sigma * theta.Q()).trace() +
         (K * sigma * K.transpose() * theta.R()).trace();
}

double Cost(const LqrInstance& inst, const CostParam& theta, const Policy& pol,
            const NumericsConfig& numerics) {
  const ClosedLoopSolution cl = SolveClosedLoop(inst, theta, pol, numerics);
  const double via_sigma = CostFromCovariance(theta, pol, cl.sigma);
  const double via_p = (inst.sigma0().cwiseProduct(cl.P)).sum();
  const double scale = std::max(std::abs(via_sigma), 1e-300);
  if (std::abs(via_sigma - via_p) > numerics.cost_crosscheck_rel * scale)
    throw NumericalFailure("cost formulas disagree: " +
                           std::to_string(via_sigma) + " vs " +
                           std::to_string(via_p));
  return via_sigma;
}

PolicyGradient ComputePolicyGradient(const LqrInstance& inst,
                                     const CostParam& theta, const Policy& pol,
                                     const NumericsConfig& numerics) {
  PolicyGradient out;
  out.closed_loop = SolveClosedLoop(inst, theta, pol, numerics);
  const Matrix& B = inst.B();
  const Matrix& P = out.closed_loop.P;
  out.E = (theta.R() + B.transpose() * P * B) * pol.K() -
          B.transpose() * P * inst.A();
  out.gradient = 2.0 * out.E * out.closed_loop.sigma;
  return out;
}

}  // namespace gail_lqr
