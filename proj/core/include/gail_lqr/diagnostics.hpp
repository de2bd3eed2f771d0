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
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "gail_lqr/gail_solver.hpp"
#include "gail_lqr/stepsize_conditions.hpp"

namespace gail_lqr {

/// P_i = m(K_i, theta_i) + s * D_i with
///   D_i = (1 + eta nu_V sigma_theta)/2 ||K_i - K_{i-1}||^2
///       + (eta/lambda - eta gamma + eta lambda nu^2)/2 ||theta_i - theta_{i-1}||^2
/// (D_0 = 0), checked against
///   P_{i+1} - P_i <= -phi1 ||dK_{i+1}||^2 - phi2 ||dtheta_{i+1}||^2
///                    - phi3 ||dtheta_i||^2
/// for i >= 1.
struct PotentialReport {
  std::vector<double> P;
  /// The s actually used.
  double s = 0.0;
  /// 12 / (13 eta^2 nu_V sigma_theta); reported for reference.
  double s_reference = 0.0;
  /// Open interval of s for which phi1, phi2, phi3 > 0 (lo >= hi if empty).
  double s_lo = 0.0;
  double s_hi = 0.0;
  bool s_in_window = false;
  double phi1 = 0.0;
  double phi2 = 0.0;
  double phi3 = 0.0;
  /// Indices i with P_{i+1} - P_i above the bound plus tolerance.
  std::vector<int> violations;
  /// Largest (lhs - rhs) / max(1, |P_i|) over the checked steps.
  double worst_excess = -std::numeric_limits<double>::infinity();
  double tolerance = 1e-9;

  bool phis_positive() const { return phi1 > 0.0 && phi2 > 0.0 && phi3 > 0.0; }
};

/// Needs c.lipschitz; throws UnsupportedError otherwise and ContractError
/// for traces shorter than 3 records. When s_override is absent, s is the
/// geometric mean of the positivity window, or s_reference when the window
/// is empty.
PotentialReport PotentialTrace(const IterateTrace& trace,
                               const ProblemConstants& c, double eta,
                               double lambda, double tolerance = 1e-9,
                               std::optional<double> s_override = {});

struct EnvelopeViolation {
  int iter = 0;
  std::string bound;  ///< "rho", "cost", "K_norm", "sigma_norm"
  double value = 0.0;
  double limit = 0.0;
};

struct EnvelopeReport {
  double cost_bound = 0.0;
  double K_norm_sq_bound = 0.0;
  double sigma_norm_bound = 0.0;
  std::vector<EnvelopeViolation> violations;
};

/// rho < 1, C <= alpha F + 2M, ||K||^2 <= (alpha F + 2M)/(alpha_R mu),
/// ||Sigma_K|| <= (alpha F + 2M)/alpha_Q at every iterate.
EnvelopeReport StabilityEnvelope(const IterateTrace& trace,
                                 const ProblemConstants& c);

struct LocalRateReport {
  /// Indices at which Z was evaluated and its values.
  std::vector<int> index;
  std::vector<double> Z;
  double a = 0.0;
  std::optional<double> upsilon_formula;
  /// Max per-step ratio over the tail window.
  double upsilon_measured = 0.0;
  /// exp(slope) of the least-squares fit of log Z over the tail.
  double fitted_ratio = 0.0;
  double tail_r_squared = 0.0;
  /// First index after which the per-step ratio stays <= 1.
  int onset = 0;
  int tail_begin = 0;
  int tail_end = 0;
};

struct LocalRateOptions {
  /// Evaluate Z every `stride` records (0 = choose so that at most
  /// max_points are evaluated).
  int stride = 0;
  int max_points = 2000;
  /// Values below floor_rel * max Z are treated as converged noise and
  /// excluded from the tail.
  double floor_rel = 1e-8;
  /// Z weight a; defaults to gamma / (3 tau_K* nu_m*) from c.local.
  std::optional<double> a;
};

/// Z_i = ||theta_i - theta*|| + a ||K_i - K*(theta_i)|| along the trace.
/// Throws UnsupportedError if the trace did not converge (final
/// ||L||^2 > eps) or if neither options.a nor c.local is available.
/// Writes z_local into the evaluated records.
LocalRateReport LocalRate(const GailProblem& problem, IterateTrace& trace,
                          const CostParam& theta_star, const ProblemConstants& c,
                          double eta, double lambda, double eps,
                          const LocalRateOptions& options = {});

/// Writes P_i into the trace records.
void AttachPotential(IterateTrace& trace, const PotentialReport& report);

/// Least-squares slope of log(min_{i<=N} ||L_i||^2) against log N over
/// log-spaced N in [N_lo, N_hi].
struct DecayFit {
  double slope = 0.0;
  int n_lo = 0;
  int n_hi = 0;
  int points = 0;
};
DecayFit MinProxDecaySlope(const IterateTrace& trace, int n_lo, int n_hi,
                           int points = 40);

/// zeta = phi' phi (P_0 - P_lower) with phi' = max(1, 1/eta^2, 1/lambda^2),
/// phi = 1/min(phi1, phi2) and P_lower = -(beta_Q tr Sigma_E +
/// beta_R tr(K_E Sigma_E K_E') + sup psi) <= inf m.
struct ZetaReport {
  double zeta = 0.0;
  double P_lower = 0.0;
  struct Entry {
    double eps = 0.0;
    std::optional<int> gamma_eps;
    bool holds = false;
  };
  std::vector<Entry> entries;
  /// The constants behind zeta are estimates.
  bool soft = true;
};
ZetaReport CheckGammaBound(const GailProblem& problem, const IterateTrace& trace,
                           const PotentialReport& potential,
                           const ProblemConstants& c, double eta, double lambda,
                           const std::vector<double>& eps_values);

/// Per-step checks of the cost decrement and increment bounds:
///   C(K_{i+1};theta_i) - C(K_i;theta_i)
///       <= -eta sigma_min(R_i) mu^2 / ||Sigma_{K*(theta_i)}|| (C(K_i;theta_i) - C*(theta_i))
///   C(K_{i+1};theta_{i+1}) - C(K_{i+1};theta_i)
///       <= lambda/alpha^2 C(K_i;theta_i)^2 + lambda F/alpha C(K_i;theta_i)
struct StepBoundReport {
  int checked = 0;
  std::vector<int> decrement_violations;
  std::vector<int> increment_violations;
  double worst_decrement_slack = std::numeric_limits<double>::infinity();
  double worst_increment_slack = std::numeric_limits<double>::infinity();
};
StepBoundReport CheckStepBounds(const GailProblem& problem,
                                const IterateTrace& trace,
                                const ProblemConstants& c, double eta,
                                double lambda, int stride = 1);

/// One row of the sampled inequality table.
struct InequalityCheck {
  std::string name;
  int trials = 0;
  int failures = 0;
  int skipped = 0;
  /// Identities: worst relative error. Inequalities: worst normalized slack
  /// (rhs - lhs) / max(1, |lhs|, |rhs|).
  double worst = 0.0;
  bool identity = false;
  double tolerance = 0.0;
  bool pass() const { return failures == 0; }
};

struct InequalitySuiteReport {
  std::vector<InequalityCheck> checks;
  bool pass() const;
};

struct InequalitySuiteOptions {
  int trials = 1000;
  std::uint64_t seed = 0;
  double identity_tol = 1e-8;
  double slack_tol = 1e-9;
  /// Radius (Frobenius) of the ball around K*(theta) used for the local
  /// strong-convexity check.
  double local_radius = 1e-3;
  /// Policies are drawn as K*(theta) + r D with ||D||_F = 1 and r uniform in
  /// [0, spread * max(1, ||K*||)]; unstable draws are rejected.
  double spread = 1.0;
};

/// Samples theta uniformly in the box (random eigenbasis and spectrum) and
/// stabilizing K around K*(theta), then checks: difference-of-cost identity,
/// gradient dominance, the policy-gradient upper bound, the interim bounds
/// ||R + B'P_K B|| <= ||R|| + C ||B||^2 / mu and ||A - BK|| <=
/// (||Sigma_K|| / mu)^{1/2}, and local strong convexity near K*(theta).
/// Throws InsufficientCoverageError if stabilizing draws cannot be found.
InequalitySuiteReport InequalitySuite(const LqrInstance& inst,
                                      const ThetaBox& box,
                                      const InequalitySuiteOptions& options = {},
                                      const NumericsConfig& numerics = {});

/// Random draw from the box: Q = U diag(q) U' with Haar U and q uniform in
/// [alpha_Q, beta_Q], likewise for R.
CostParam SampleTheta(std::mt19937_64& rng, const ThetaBox& box, int d, int k);

}  // namespace gail_lqr
