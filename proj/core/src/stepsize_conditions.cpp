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


#include "gail_lqr/stepsize_conditions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "gail_lqr/riccati.hpp"

namespace gail_lqr {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

BoundCheck Le(std::string name, double value, double bound) {
  return {std::move(name), value, bound, false, value <= bound};
}

BoundCheck Lt(std::string name, double value, double bound) {
  return {std::move(name), value, bound, true, value < bound};
}

ConditionVerdict Verdict(std::string condition, std::vector<BoundCheck> checks) {
  ConditionVerdict v;
  v.condition = std::move(condition);
  v.pass = std::all_of(checks.begin(), checks.end(),
                       [](const BoundCheck& c) { return c.pass; });
  double worst = -kInf;
  for (const auto& c : checks) {
    const double ratio = c.bound > 0.0 ? c.value / c.bound : kInf;
    if (ratio > worst) {
      worst = ratio;
      v.binding = c.name;
    }
  }
  v.checks = std::move(checks);
  return v;
}

const LipschitzEstimates& RequireLipschitz(const ProblemConstants& c,
                                           const char* who) {
  if (!c.lipschitz)
    throw UnsupportedError(std::string(who) +
                           " needs tau_V and nu_V; run the Lipschitz "
                           "estimator or supply them");
  return *c.lipschitz;
}

const LocalModuli& RequireLocal(const ProblemConstants& c, const char* who) {
  if (!c.local)
    throw UnsupportedError(std::string(who) +
                           " needs tau_K*, nu_K*, nu_m*; estimate them near "
                           "the saddle point first");
  return *c.local;
}

Matrix RandomUnit(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> normal;
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  return m / m.norm();
}

// The Jacobian of (Sigma_K, K Sigma_K K') with respect to K, one column per
// entry of K (column-major), rows are the row-major entries of Sigma then of
// K Sigma K'.
Matrix OccupancyJacobian(const LqrInstance& inst, const Policy& pol,
                         const Matrix& sigma, const NumericsConfig& numerics) {
  const Eigen::Index d = inst.state_dim();
  const Eigen::Index k = inst.input_dim();
  const Matrix& K = pol.K();
  Matrix J(d * d + k * k, k * d);
  Eigen::Index col = 0;
  for (Eigen::Index b = 0; b < d; ++b) {
    for (Eigen::Index a = 0; a < k; ++a, ++col) {
      Matrix E = Matrix::Zero(k, d);
      E(a, b) = 1.0;
      const Matrix dS = SigmaDirectional(inst, pol, sigma, E, numerics);
      const Matrix dR = E * sigma * K.transpose() + K * dS * K.transpose() +
                        K * sigma * E.transpose();
      J.col(col).head(d * d) = FlattenRowMajor(dS);
      J.col(col).tail(k * k) = FlattenRowMajor(dR);
    }
  }
  return J;
}

bool InRegion(const LqrInstance& inst, const Matrix& K, double S,
              const NumericsConfig& numerics, Matrix* sigma = nullptr) {
  const Policy pol(K);
  if (!IsStabilizing(inst, pol, numerics.stability_margin)) return false;
  Matrix s = StateCovariance(inst, pol, numerics);
  if (SpectralNorm(s) > S) return false;
  if (sigma) *sigma = std::move(s);
  return true;
}

// Orthonormal basis of symmetric (dQ, dR) pairs.
std::vector<ThetaPair> SymmetricBasis(int d, int k) {
  std::vector<ThetaPair> basis;
  auto add = [&](bool q_block, int n) {
    for (int i = 0; i < n; ++i) {
      for (int j = i; j < n; ++j) {
        Matrix E = Matrix::Zero(n, n);
        if (i == j) {
          E(i, i) = 1.0;
        } else {
          E(i, j) = E(j, i) = 1.0 / std::sqrt(2.0);
        }
        basis.push_back(q_block ? ThetaPair{E, Matrix::Zero(k, k)}
                                : ThetaPair{Matrix::Zero(d, d), E});
      }
    }
  };
  add(true, d);
  add(false, k);
  return basis;
}

double Coordinate(const ThetaPair& v, const ThetaPair& e) {
  return v.Q.cwiseProduct(e.Q).sum() + v.R.cwiseProduct(e.R).sum();
}

Vector RandomSymmetricDirection(std::mt19937_64& rng,
                                const std::vector<ThetaPair>& basis) {
  std::normal_distribution<double> normal;
  Vector u(static_cast<Eigen::Index>(basis.size()));
  for (Eigen::Index i = 0; i < u.size(); ++i) u(i) = normal(rng);
  return u / u.norm();
}

ThetaPair Combine(const std::vector<ThetaPair>& basis, const Vector& coords) {
  ThetaPair out = basis.front() * 0.0;
  for (std::size_t i = 0; i < basis.size(); ++i)
    out = out + basis[i] * coords(static_cast<Eigen::Index>(i));
  return out;
}

struct LocalDerivatives {
  Matrix JK;  // d vec(K*) / d theta-coordinates
  Matrix H;   // d grad m* / d theta-coordinates
};

// Central differences of K*(theta) and grad m*(theta) along the basis.
// Returns nullopt if a probe leaves the positive-definite cone.
std::optional<LocalDerivatives> Derivatives(
    const GailProblem& problem, const ThetaPair& theta,
    const std::vector<ThetaPair>& basis, const Policy& warm, double h) {
  const LqrInstance& inst = problem.instance();
  const NumericsConfig& numerics = problem.numerics();
  const Eigen::Index n = static_cast<Eigen::Index>(basis.size());
  LocalDerivatives out{Matrix(inst.input_dim() * inst.state_dim(), n),
                       Matrix(n, n)};
  for (Eigen::Index c = 0; c < n; ++c) {
    Matrix K_side[2];
    Vector g_side[2];
    for (int s = 0; s < 2; ++s) {
      const ThetaPair probe =
          theta + basis[static_cast<std::size_t>(c)] * (s == 0 ? h : -h);
      std::optional<CostParam> param;
      try {
        param.emplace(probe.Q, probe.R, numerics.projection_symmetry_tol);
      } catch (const ContractError&) {
        return std::nullopt;
      }
      const Policy Ks = SolveDareFrom(inst, *param, warm, numerics).policy();
      const Matrix sigma = StateCovariance(inst, Ks, numerics);
      const ThetaPair grad = Occupancy(Ks, sigma) -
                             problem.expert_occupancy() -
                             problem.regularizer().Gradient(*param);
      Vector g(n);
      for (Eigen::Index r = 0; r < n; ++r)
        g(r) = Coordinate(grad, basis[static_cast<std::size_t>(r)]);
      K_side[s] = Ks.K();
      g_side[s] = std::move(g);
    }
    const Matrix dK = (K_side[0] - K_side[1]) / (2.0 * h);
    out.JK.col(c) = Eigen::Map<const Vector>(dK.data(), dK.size());
    out.H.col(c) = (g_side[0] - g_side[1]) / (2.0 * h);
  }
  return out;
}

}  // namespace

ProblemConstants ComputeConstants(const GailProblem& problem, const Policy& K0) {
  const LqrInstance& inst = problem.instance();
  const ThetaBox& box = problem.box();
  ProblemConstants c;
  c.d = inst.state_dim();
  c.k = inst.input_dim();
  c.box = box;
  c.alpha = box.alpha();
  c.mu = inst.mu();
  c.sigma_theta = box.SigmaTheta(c.d, c.k);

  Matrix sigma;
  try {
    sigma = StateCovariance(inst, K0, problem.numerics());
  } catch (const InstabilityError& e) {
    throw InstabilityError(std::string("initial policy: ") + e.what(), e.rho());
  }
  const Matrix& K = K0.K();
  c.M = box.beta_Q * sigma.trace() +
        box.beta_R * (K * sigma * K.transpose()).trace();

  const ThetaPair& occ = problem.expert_occupancy();
  const auto sup = problem.regularizer().SupGradientNorm(box);
  c.F = std::max(occ.Q.norm() + sup.q, occ.R.norm() + sup.r);

  c.B_norm = SpectralNorm(inst.B());
  const double X = c.Envelope();
  c.kappa1 = box.beta_R + X * c.B_norm * c.B_norm / c.mu;
  c.kappa2 = 1.0 + std::sqrt(X / (c.mu * box.alpha_Q));
  c.gamma = problem.regularizer().StrongConvexity();
  c.nu = problem.regularizer().Smoothness();
  return c;
}

double Condition1Bounds::eta_max() const {
  return std::min({eta_curvature, eta_smoothness, eta_cap});
}

Condition1Bounds Condition1Limits(const ProblemConstants& c) {
  const ThetaBox& b = c.box;
  const double X = c.Envelope();
  Condition1Bounds out;
  out.eta_curvature =
      c.B_norm > 0.0
          ? std::pow(b.alpha_Q, 3) * std::pow(c.mu, 2.5) * std::pow(X, -3.5) /
                (16.0 * std::sqrt(c.kappa1) * c.kappa2 * c.B_norm)
          : kInf;
  out.eta_smoothness = b.alpha_Q / (32.0 * c.kappa1 * X);
  out.eta_cap = 2.0 * c.M / (b.alpha_Q * b.alpha_R * c.mu * c.mu);
  out.ratio = b.alpha_Q * b.alpha_R * c.alpha * c.alpha * c.mu * c.mu /
              (2.0 * c.M * X);
  return out;
}

ConditionVerdict CheckCondition1(const ProblemConstants& c, double eta,
                                 double lambda) {
  const Condition1Bounds lim = Condition1Limits(c);
  return Verdict("condition1",
                 {Le("eta_curvature", eta, lim.eta_curvature),
                  Le("eta_smoothness", eta, lim.eta_smoothness),
                  Le("eta_cap", eta, lim.eta_cap),
                  Le("lambda_over_eta", eta > 0.0 ? lambda / eta : kInf,
                     lim.ratio)});
}

ConditionVerdict CheckCondition2(const ProblemConstants& c) {
  const LipschitzEstimates& lip = RequireLipschitz(c, "condition 2");
  const ThetaBox& b = c.box;
  return Verdict(
      "condition2",
      {Le("regularization_strength",
          14.0 * c.sigma_theta * lip.nu_V * c.M * c.Envelope(),
          b.alpha_Q * b.alpha_R * c.alpha * c.alpha * c.gamma)});
}

ConditionVerdict CheckCondition3(const ProblemConstants& c, double eta,
                                 double lambda) {
  const LipschitzEstimates& lip = RequireLipschitz(c, "condition 3");
  const double tV = lip.tau_V;
  const double nV = lip.nu_V;
  const double st = c.sigma_theta;
  return Verdict(
      "condition3",
      {Le("eta_lipschitz", eta, 1.0 / (100.0 * tV)),
       Le("eta_smoothness", eta, 1.0 / (2.0 * st * nV)),
       Le("lambda_lipschitz", lambda, 1.0 / (100.0 * (tV + c.nu))),
       Le("lambda_coupling", lambda, 3.0 * nV * st / (100.0 * tV * tV)),
       Le("lambda_regularizer", lambda, c.gamma / (100.0 * c.nu * c.nu)),
       Lt("eta_over_lambda", eta / lambda, c.gamma / (7.0 * nV * st))});
}

ConditionVerdict CheckCondition5(const ProblemConstants& c, double eta,
                                 double lambda) {
  const LocalModuli& loc = RequireLocal(c, "condition 5");
  return Verdict(
      "condition5",
      {Le("eta_local", eta, 2.0 / (c.box.alpha_R * c.mu + loc.nu_Kstar)),
       Le("lambda_local", lambda, 2.0 / (c.gamma + loc.nu_mstar))});
}

UpsilonReport ComputeUpsilon(const ProblemConstants& c, double eta,
                             double lambda) {
  const LipschitzEstimates& lip = RequireLipschitz(c, "upsilon");
  const LocalModuli& loc = RequireLocal(c, "upsilon");
  UpsilonReport r;
  r.a = c.gamma / (3.0 * loc.tau_Kstar * loc.nu_mstar);
  r.branch_theta =
      1.0 - lambda * c.gamma + r.a * lambda * loc.nu_mstar * loc.tau_Kstar;
  r.branch_policy = (1.0 - eta * c.box.alpha_R * c.mu) *
                    (1.0 + lambda * lip.tau_V / r.a +
                     lambda * lip.tau_V * loc.tau_Kstar);
  r.upsilon = std::max(r.branch_theta, r.branch_policy);
  return r;
}

AutoStepsizes ChooseStepsizes(const ProblemConstants& c,
                              const StepsizePolicy& policy) {
  const Condition1Bounds lim = Condition1Limits(c);
  AutoStepsizes out;
  out.eta = lim.eta_max();
  // Window for lambda/eta: (lo, hi]. Without the estimated moduli only the
  // Condition 1 ratio applies and the midpoint-in-log is replaced by hi/2.
  const double hi = lim.ratio;
  double lo = 0.0;
  double hi_rate = std::numeric_limits<double>::infinity();
  double lambda_max = std::numeric_limits<double>::infinity();
  if (c.lipschitz && policy.condition3) {
    const LipschitzEstimates& lip = *c.lipschitz;
    const double st = c.sigma_theta;
    out.eta = std::min({out.eta, 1.0 / (100.0 * lip.tau_V),
                        1.0 / (2.0 * st * lip.nu_V)});
    lambda_max = std::min({1.0 / (100.0 * (lip.tau_V + c.nu)),
                           3.0 * lip.nu_V * st / (100.0 * lip.tau_V * lip.tau_V),
                           c.gamma / (100.0 * c.nu * c.nu)});
    lo = 7.0 * lip.nu_V * st / c.gamma;
    out.clamped_to_condition3 = true;
  }
  if (c.lipschitz && c.local && policy.contraction) {
    // (1 - eta alpha_R mu)(1 + lambda tau_V (1/a + tau_K*)) < 1 whenever
    // lambda/eta < alpha_R mu / (tau_V (1/a + tau_K*)).
    const double a = c.gamma / (3.0 * c.local->tau_Kstar * c.local->nu_mstar);
    hi_rate = c.box.alpha_R * c.mu /
              (c.lipschitz->tau_V * (1.0 / a + c.local->tau_Kstar));
  }
  auto pick = [](double l, double h) { return l > 0.0 ? std::sqrt(l * h) : h / 2.0; };
  double ratio;
  if (lo < std::min(hi, hi_rate)) {
    ratio = pick(lo, std::min(hi, hi_rate));
    out.targets_contraction = std::isfinite(hi_rate);
  } else if (lo < hi) {
    ratio = pick(lo, hi);
  } else {
    ratio = hi;
  }
  if (out.eta * ratio > lambda_max) out.eta = lambda_max / ratio;
  // Guard against rounding in the closed-form bounds; ratio can sit exactly
  // on its bound, in which case only shrinking it helps.
  for (int guard = 0;; ++guard) {
    const ConditionVerdict v = CheckCondition1(c, out.eta, out.eta * ratio);
    if (v.pass) break;
    if (guard == 10000 || !(out.eta > 0.0) || !(ratio > 0.0))
      throw NumericalFailure("no stepsize pair satisfies Condition 1");
    if (v.binding == "lambda_over_eta")
      ratio *= 0.999;
    else
      out.eta *= 0.999;
  }
  out.lambda = out.eta * ratio;
  return out;
}

Matrix SigmaDirectional(const LqrInstance& inst, const Policy& pol,
                        const Matrix& sigma, const Matrix& dK,
                        const NumericsConfig& numerics) {
  const Matrix T = ClosedLoopMatrix(inst, pol);
  const Matrix half = inst.B() * dK * sigma * T.transpose();
  return SolveDiscreteLyapunov(T, -(half + half.transpose()), numerics);
}

double DefaultRegionBound(const ProblemConstants& c) {
  return c.Envelope() / c.box.alpha_Q;
}

LipschitzEstimates EstimateLipschitz(const LqrInstance& inst,
                                     const Policy& anchor, double S,
                                     int samples, std::uint64_t seed,
                                     double safety,
                                     const NumericsConfig& numerics) {
  if (!(S > 0.0)) throw ContractError("region bound S must be > 0");
  if (samples < 1) throw ContractError("samples must be >= 1");
  if (!InRegion(inst, anchor.K(), S, numerics))
    throw InsufficientCoverageError(
        "anchor policy lies outside {K : ||Sigma_K|| <= S}");
  const int d = inst.state_dim();
  const int k = inst.input_dim();
  const Matrix& Ka = anchor.K();
  const double scale = std::max(1.0, Ka.norm());

  LipschitzEstimates out;
  out.region_bound = S;
  double row_sigma = 0.0;
  double row_V = 0.0;
  for (int i = 0; i < samples; ++i) {
    ++out.drawn;
    std::mt19937_64 rng(DeriveSeed(seed, static_cast<std::uint64_t>(i)));
    const Matrix D = RandomUnit(rng, k, d);

    // Walk out along the ray until the region is left, then bisect.
    double lo = 0.0;
    double hi = 0.1 * scale;
    while (InRegion(inst, Ka + hi * D, S, numerics) && hi < 1e6 * scale) {
      lo = hi;
      hi *= 2.0;
    }
    for (int it = 0; it < 40; ++it) {
      const double mid = 0.5 * (lo + hi);
      (InRegion(inst, Ka + mid * D, S, numerics) ? lo : hi) = mid;
    }
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const Matrix K1 = Ka + u * lo * D;
    Matrix sigma1;
    if (!InRegion(inst, K1, S, numerics, &sigma1)) continue;
    const Policy p1(K1);
    const Matrix J1 = OccupancyJacobian(inst, p1, sigma1, numerics);

    // Forward differences of the Jacobian along each coordinate of K give
    // the Hessian of every entry of V.
    const double h = 1e-5 * std::max(1.0, K1.norm());
    std::vector<Matrix> hess(static_cast<std::size_t>(d * d + k * k),
                             Matrix(k * d, k * d));
    bool inside = true;
    for (Eigen::Index c = 0; c < k * d && inside; ++c) {
      Matrix K2 = K1;
      K2(c % k, c / k) += h;
      Matrix sigma2;
      if (!InRegion(inst, K2, S, numerics, &sigma2)) {
        inside = false;
        break;
      }
      const Matrix J2 = OccupancyJacobian(inst, Policy(K2), sigma2, numerics);
      const Matrix dJ = (J2 - J1) / h;
      for (Eigen::Index r = 0; r < dJ.rows(); ++r)
        hess[static_cast<std::size_t>(r)].col(c) = dJ.row(r).transpose();
    }
    if (!inside) continue;
    ++out.accepted;

    out.tau_V = std::max(out.tau_V, SpectralNorm(J1));
    out.tau_sigma = std::max(out.tau_sigma, SpectralNorm(J1.topRows(d * d)));
    for (std::size_t r = 0; r < hess.size(); ++r) {
      const double n = SpectralNorm(hess[r]);
      row_V = std::max(row_V, n);
      if (r < static_cast<std::size_t>(d * d)) row_sigma = std::max(row_sigma, n);
    }
  }
  if (out.accepted < 10)
    throw InsufficientCoverageError(
        "only " + std::to_string(out.accepted) + " of " +
        std::to_string(out.drawn) + " samples landed in the region");
  out.tau_V *= safety;
  out.tau_sigma *= safety;
  out.nu_V = safety * (d + k) * row_V;
  out.nu_sigma = safety * d * row_sigma;
  return out;
}

LocalModuli EstimateLocalModuli(const GailProblem& problem,
                                const CostParam& theta_star, double radius,
                                int samples, std::uint64_t seed,
                                double safety) {
  if (!(radius > 0.0)) throw ContractError("radius must be > 0");
  if (samples < 1) throw ContractError("samples must be >= 1");
  const LqrInstance& inst = problem.instance();
  const auto basis = SymmetricBasis(inst.state_dim(), inst.input_dim());
  const Policy warm =
      SolveDare(inst, theta_star, problem.numerics()).policy();
  const ThetaPair center = ThetaPair::Of(theta_star);
  const double h = 1e-5 * std::max(1.0, theta_star.norm());
  const double step = 0.1 * radius;

  LocalModuli out;
  out.radius = radius;
  for (int i = 0; i < samples; ++i) {
    std::mt19937_64 rng(DeriveSeed(seed, static_cast<std::uint64_t>(i)));
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const ThetaPair t1 =
        center + Combine(basis, RandomSymmetricDirection(rng, basis)) *
                     (u * radius);
    const ThetaPair t2 =
        t1 + Combine(basis, RandomSymmetricDirection(rng, basis)) * step;
    const auto D1 = Derivatives(problem, t1, basis, warm, h);
    const auto D2 = Derivatives(problem, t2, basis, warm, h);
    if (!D1 || !D2) continue;
    ++out.accepted;
    out.tau_Kstar = std::max(out.tau_Kstar, SpectralNorm(D1->JK));
    out.nu_Kstar = std::max(out.nu_Kstar, SpectralNorm(D1->JK - D2->JK) / step);
    out.nu_mstar = std::max(out.nu_mstar, SpectralNorm(D1->H));
  }
  if (out.accepted == 0)
    throw InsufficientCoverageError(
        "no sample around the saddle point stayed positive definite");
  out.tau_Kstar *= safety;
  out.nu_Kstar *= safety;
  out.nu_mstar *= safety;
  return out;
}

}  // namespace gail_lqr
