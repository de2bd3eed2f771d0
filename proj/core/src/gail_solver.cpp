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

#include "gail_lqr/gail_solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace gail_lqr {
namespace {

Matrix ClipSpectrum(const Matrix& raw, double lo, double hi, double tol,
                    const char* name) {
  if (raw.rows() != raw.cols())
    throw ContractError(std::string(name) + " block must be square");
  if (MaxAsymmetry(raw) > tol)
    throw ContractError(std::string(name) +
                        " block is not symmetric within tolerance");
  const Matrix sym = Symmetrize(raw);
  const Matrix I = Matrix::Identity(sym.rows(), sym.cols());
  // Strictly inside the interval: the projection is the identity.
  if (Eigen::LLT<Matrix>(sym - lo * I).info() == Eigen::Success &&
      Eigen::LLT<Matrix>(hi * I - sym).info() == Eigen::Success)
    return sym;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  const Vector clipped = eig.eigenvalues().cwiseMax(lo).cwiseMin(hi);
  const Matrix& U = eig.eigenvectors();
  return Symmetrize(U * clipped.asDiagonal() * U.transpose());
}

// Distance from each eigenvalue of the center to the farther interval end.
double FarthestCornerDistance(const Matrix& center, double lo, double hi) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(center, Eigen::EigenvaluesOnly);
  double sq = 0.0;
  for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i) {
    const double v = eig.eigenvalues()(i);
    sq += std::max((v - lo) * (v - lo), (hi - v) * (hi - v));
  }
  return std::sqrt(sq);
}

// Raw ascent direction at (K, theta) given Sigma_K.
ThetaPair AscentDirection(const GailProblem& problem, const CostParam& theta,
                          const Policy& pol, const Matrix& sigma) {
  return Occupancy(pol, sigma) - problem.expert_occupancy() -
         problem.regularizer().Gradient(theta);
}

double ExpertCost(const GailProblem& problem, const CostParam& theta) {
  const ThetaPair& occ = problem.expert_occupancy();
  return occ.Q.cwiseProduct(theta.Q()).sum() +
         occ.R.cwiseProduct(theta.R()).sum();
}

struct StepOutcome {
  SolverState next;
  Matrix next_T;
  double next_rho = 0.0;
  Matrix next_sigma;
};

// Policy gradient when T, rho and Sigma_K are already known; only P_K is
// solved for.
PolicyGradient GradientFromCovariance(const LqrInstance& inst,
                                      const CostParam& theta, const Policy& pol,
                                      Matrix T, double rho, Matrix sigma,
                                      const NumericsConfig& numerics) {
  PolicyGradient out;
  const Matrix& K = pol.K();
  const Matrix& B = inst.B();
  out.closed_loop.T = std::move(T);
  out.closed_loop.rho = rho;
  out.closed_loop.sigma = std::move(sigma);
  out.closed_loop.P =
      SolveDiscreteLyapunov(out.closed_loop.T.transpose(),
                            theta.Q() + K.transpose() * theta.R() * K, numerics);
  const Matrix& P = out.closed_loop.P;
  out.E = (theta.R() + B.transpose() * P * B) * K - B.transpose() * P * inst.A();
  out.gradient = 2.0 * out.E * out.closed_loop.sigma;
  return out;
}

// Largest eigenvalue of a symmetric PSD matrix, i.e. its operator norm.
double PsdNorm(const Matrix& m) {
  if (m.rows() == 1) return std::abs(m(0, 0));
  return Eigen::SelfAdjointEigenSolver<Matrix>(m, Eigen::EigenvaluesOnly)
      .eigenvalues()
      .maxCoeff();
}

// The shared body of Step and Solve: the caller supplies grad_K C(K_i; theta_i).
StepOutcome StepWithGradient(const GailProblem& problem,
                             const SolverState& state, const Matrix& gradient,
                             const SolverConfig& config) {
  Policy next_K(state.K.K() - config.eta * gradient);
  Matrix T = ClosedLoopMatrix(problem.instance(), next_K);
  const double rho = T.allFinite() ? SpectralRadius(T)
                                   : std::numeric_limits<double>::infinity();
  if (!(rho < 1.0 - config.numerics.stability_margin))
    throw InstabilityError(
        "policy update left the stabilizing set (rho = " + std::to_string(rho) +
            ")",
        rho);
  Matrix sigma =
      SolveDiscreteLyapunov(T, problem.instance().sigma0(), config.numerics);
  if (config.on_evaluate)
    config.on_evaluate(EvaluationStage::kCostGradient, next_K.K());
  const ThetaPair ascent =
      AscentDirection(problem, state.theta, next_K, sigma);
  CostParam next_theta =
      ProjectTheta(ThetaPair::Of(state.theta) + ascent * config.lambda,
                   problem.box(), config.numerics);
  return {SolverState{std::move(next_K), std::move(next_theta)}, std::move(T),
          rho, std::move(sigma)};
}

ProximalGradient ProximalFrom(const GailProblem& problem,
                              const SolverState& state, const Matrix& gradient,
                              const Matrix& sigma) {
  ProximalGradient out;
  out.K_block = gradient;
  const ThetaPair theta = ThetaPair::Of(state.theta);
  const ThetaPair ascent =
      AscentDirection(problem, state.theta, state.K, sigma);
  const CostParam projected =
      ProjectTheta(theta + ascent, problem.box(), problem.numerics());
  out.theta_block = theta - ThetaPair::Of(projected);
  out.norm = std::sqrt(gradient.squaredNorm() + out.theta_block.squaredNorm());
  return out;
}

}  // namespace

void ThetaBox::Validate() const {
  if (!(alpha_Q > 0.0 && alpha_Q <= beta_Q))
    throw ContractError("box requires 0 < alpha_Q <= beta_Q");
  if (!(alpha_R > 0.0 && alpha_R <= beta_R))
    throw ContractError("box requires 0 < alpha_R <= beta_R");
}

double ThetaBox::alpha() const { return std::min(alpha_Q, alpha_R); }

double ThetaBox::SigmaTheta(int d, int k) const {
  return std::sqrt(d * beta_Q * beta_Q + k * beta_R * beta_R);
}

bool ThetaBox::Contains(const CostParam& theta, double tol) const {
  Eigen::SelfAdjointEigenSolver<Matrix> q(theta.Q(), Eigen::EigenvaluesOnly);
  Eigen::SelfAdjointEigenSolver<Matrix> r(theta.R(), Eigen::EigenvaluesOnly);
  return q.eigenvalues().minCoeff() >= alpha_Q - tol &&
         q.eigenvalues().maxCoeff() <= beta_Q + tol &&
         r.eigenvalues().minCoeff() >= alpha_R - tol &&
         r.eigenvalues().maxCoeff() <= beta_R + tol;
}

double ThetaPair::squaredNorm() const {
  return Q.squaredNorm() + R.squaredNorm();
}

double ThetaPair::norm() const { return std::sqrt(squaredNorm()); }

SquaredPenalty::SquaredPenalty(double gamma, CostParam center)
    : gamma_(gamma), center_(std::move(center)) {
  if (!(gamma_ > 0.0)) throw ContractError("regularizer gamma must be > 0");
}

double SquaredPenalty::Value(const CostParam& theta) const {
  return gamma_ * ((theta.Q() - center_.Q()).squaredNorm() +
                   (theta.R() - center_.R()).squaredNorm());
}

ThetaPair SquaredPenalty::Gradient(const CostParam& theta) const {
  return {2.0 * gamma_ * (theta.Q() - center_.Q()),
          2.0 * gamma_ * (theta.R() - center_.R())};
}

CostRegularizer::GradientBound SquaredPenalty::SupGradientNorm(
    const ThetaBox& box) const {
  return {2.0 * gamma_ *
              FarthestCornerDistance(center_.Q(), box.alpha_Q, box.beta_Q),
          2.0 * gamma_ *
              FarthestCornerDistance(center_.R(), box.alpha_R, box.beta_R)};
}

double SquaredPenalty::SupValue(const ThetaBox& box) const {
  const double q = FarthestCornerDistance(center_.Q(), box.alpha_Q, box.beta_Q);
  const double r = FarthestCornerDistance(center_.R(), box.alpha_R, box.beta_R);
  return gamma_ * (q * q + r * r);
}

CostParam ProjectTheta(const ThetaPair& raw, const ThetaBox& box,
                       const NumericsConfig& numerics) {
  box.Validate();
  const double tol = numerics.projection_symmetry_tol;
  // The clipped spectra are bounded below by alpha > 0, so the result is a
  // valid CostParam.
  return CostParam(ClipSpectrum(raw.Q, box.alpha_Q, box.beta_Q, tol, "Q"),
                   ClipSpectrum(raw.R, box.alpha_R, box.beta_R, tol, "R"),
                   numerics.symmetry_tol);
}

GailProblem::GailProblem(LqrInstance instance, Policy expert, ThetaBox box,
                         std::shared_ptr<const CostRegularizer> regularizer,
                         const NumericsConfig& numerics)
    : instance_(std::move(instance)),
      expert_(std::move(expert)),
      box_(box),
      regularizer_(std::move(regularizer)),
      numerics_(numerics) {
  box_.Validate();
  if (!regularizer_) throw ContractError("a regularizer is required");
  Matrix sigma;
  try {
    sigma = StateCovariance(instance_, expert_, numerics_);
  } catch (const InstabilityError& e) {
    throw InstabilityError(std::string("expert policy: ") + e.what(), e.rho());
  }
  expert_occ_ = Occupancy(expert_, sigma);
}

ThetaPair Occupancy(const Policy& pol, const Matrix& sigma) {
  const Matrix& K = pol.K();
  return {sigma, Symmetrize(K * sigma * K.transpose())};
}

double ObjectiveM(const GailProblem& problem, const CostParam& theta,
                  const Policy& pol) {
  Matrix sigma;
  try {
    sigma = StateCovariance(problem.instance(), pol, problem.numerics());
  } catch (const InstabilityError& e) {
    throw InstabilityError(std::string("policy K: ") + e.what(), e.rho());
  }
  return CostFromCovariance(theta, pol, sigma) - ExpertCost(problem, theta) -
         problem.regularizer().Value(theta);
}

ThetaPair GradThetaM(const GailProblem& problem, const CostParam& theta,
                     const Policy& pol_next) {
  Matrix sigma;
  try {
    sigma = StateCovariance(problem.instance(), pol_next, problem.numerics());
  } catch (const InstabilityError& e) {
    throw InstabilityError(std::string("policy K_next: ") + e.what(), e.rho());
  }
  return AscentDirection(problem, theta, pol_next, sigma);
}

void SolverConfig::Validate() const {
  if (!(eta > 0.0)) throw ContractError("eta must be > 0");
  if (!(lambda > 0.0)) throw ContractError("lambda must be > 0");
  if (!(eps > 0.0)) throw ContractError("eps must be > 0");
  if (max_iter < 1) throw ContractError("max_iter must be >= 1");
}

SolverState Step(const GailProblem& problem, const SolverState& state,
                 const SolverConfig& config) {
  config.Validate();
  if (config.on_evaluate)
    config.on_evaluate(EvaluationStage::kPolicyGradient, state.K.K());
  const PolicyGradient grad = ComputePolicyGradient(
      problem.instance(), state.theta, state.K, config.numerics);
  return StepWithGradient(problem, state, grad.gradient, config).next;
}

ProximalGradient ComputeProximalGradient(const GailProblem& problem,
                                         const SolverState& state) {
  const PolicyGradient grad = ComputePolicyGradient(
      problem.instance(), state.theta, state.K, problem.numerics());
  return ProximalFrom(problem, state, grad.gradient, grad.closed_loop.sigma);
}

std::optional<int> IterateTrace::GammaIndex(double eps) const {
  for (const auto& r : records)
    if (r.prox_grad_norm * r.prox_grad_norm <= eps) return r.iter;
  return std::nullopt;
}

std::string ToString(SolveStatus status) {
  switch (status) {
    case SolveStatus::kConverged:
      return "converged";
    case SolveStatus::kMaxIterations:
      return "max_iterations";
    case SolveStatus::kUnstable:
      return "unstable";
  }
  return "unknown";
}

SolveResult Solve(const GailProblem& problem, const Policy& K0,
                  const CostParam& theta0, const SolverConfig& config) {
  config.Validate();
  if (!IsStabilizing(problem.instance(), K0, config.numerics.stability_margin))
    throw InstabilityError("initial policy is not stabilizing",
                           SpectralRadius(ClosedLoopMatrix(problem.instance(), K0)));
  if (!problem.box().Contains(theta0, 1e-10))
    throw ContractError("initial cost parameter is outside the feasible set");

  const auto start = std::chrono::steady_clock::now();
  SolveResult result{SolveStatus::kMaxIterations, SolverState{K0, theta0}, {},
                     std::nullopt, std::nullopt, ""};
  const CostParam* center = problem.regularizer().center();
  const Matrix& KE = problem.expert().K();

  SolverState state{K0, theta0};
  // Closed-loop data of the current iterate, carried over from the step that
  // produced it.
  std::optional<StepOutcome> carried;
  for (int i = 0;; ++i) {
    if (config.on_evaluate)
      config.on_evaluate(EvaluationStage::kPolicyGradient, state.K.K());
    const PolicyGradient grad =
        carried ? GradientFromCovariance(problem.instance(), state.theta,
                                         state.K, std::move(carried->next_T),
                                         carried->next_rho,
                                         std::move(carried->next_sigma),
                                         config.numerics)
                : ComputePolicyGradient(problem.instance(), state.theta,
                                        state.K, config.numerics);
    const Matrix& sigma = grad.closed_loop.sigma;
    const ProximalGradient L = ProximalFrom(problem, state, grad.gradient, sigma);

    IterateRecord rec{i, state.K, state.theta};
    rec.cost = CostFromCovariance(state.theta, state.K, sigma);
    rec.objective = rec.cost - ExpertCost(problem, state.theta) -
                    problem.regularizer().Value(state.theta);
    rec.prox_grad_norm = L.norm;
    rec.rho = grad.closed_loop.rho;
    rec.K_dist_to_expert = (state.K.K() - KE).norm();
    rec.theta_dist_to_center = center
                                   ? Distance(state.theta, *center)
                                   : std::numeric_limits<double>::quiet_NaN();
    rec.sigma_norm = PsdNorm(sigma);
    rec.K_norm = std::sqrt(PsdNorm(state.K.K() * state.K.K().transpose()));
    if (!result.trace.empty()) {
      const IterateRecord& prev = result.trace.back();
      rec.K_step_sq = (state.K.K() - prev.K.K()).squaredNorm();
      rec.theta_step_sq =
          (ThetaPair::Of(state.theta) - ThetaPair::Of(prev.theta)).squaredNorm();
    }
    rec.wall_time_ms = std::chrono::duration<double, std::milli>(
                           std::chrono::steady_clock::now() - start)
                           .count();
    result.trace.records.push_back(std::move(rec));
    result.state = state;

    if (L.norm * L.norm <= config.eps) {
      result.status = SolveStatus::kConverged;
      result.gamma_eps = i;
      result.message = "converged at iteration " + std::to_string(i);
      return result;
    }
    if (i >= config.max_iter) {
      result.status = SolveStatus::kMaxIterations;
      result.message = "reached max_iter = " + std::to_string(config.max_iter);
      return result;
    }
    try {
      carried = StepWithGradient(problem, state, grad.gradient, config);
      state = carried->next;
    } catch (const InstabilityError& e) {
      result.status = SolveStatus::kUnstable;
      result.unstable_rho = e.rho();
      result.message = std::string("iteration ") + std::to_string(i) + ": " +
                       e.what();
      return result;
    }
  }
}

}  // namespace gail_lqr
