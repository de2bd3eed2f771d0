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


#include "gail_lqr/diagnostics.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/QR>

#include "gail_lqr/riccati.hpp"

namespace gail_lqr {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

LinearFit FitLine(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  LinearFit f;
  if (x.size() < 2) return f;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) return f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r_squared = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
  return f;
}

Matrix Haar(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> normal;
  Matrix g(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) g(i, j) = normal(rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR();
  for (int i = 0; i < n; ++i)
    if (r(i, i) < 0.0) q.col(i) *= -1.0;
  return q;
}

Matrix SampleBlock(std::mt19937_64& rng, int n, double lo, double hi) {
  const Matrix U = Haar(rng, n);
  std::uniform_real_distribution<double> unif(lo, hi);
  Vector ev(n);
  for (int i = 0; i < n; ++i) ev(i) = unif(rng);
  return Symmetrize(U * ev.asDiagonal() * U.transpose());
}

double NormalizedSlack(double lhs, double rhs) {
  return (rhs - lhs) / std::max({1.0, std::abs(lhs), std::abs(rhs)});
}

void RecordInequality(InequalityCheck& check, double lhs, double rhs) {
  ++check.trials;
  const double slack = NormalizedSlack(lhs, rhs);
  if (check.trials == 1 || slack < check.worst) check.worst = slack;
  if (slack < -check.tolerance) ++check.failures;
}

}  // namespace

PotentialReport PotentialTrace(const IterateTrace& trace,
                               const ProblemConstants& c, double eta,
                               double lambda, double tolerance,
                               std::optional<double> s_override) {
  if (!c.lipschitz)
    throw UnsupportedError(
        "potential needs tau_V and nu_V; run the Lipschitz estimator first");
  if (trace.size() < 3)
    throw ContractError("potential check needs at least 3 iterates");
  const double tV = c.lipschitz->tau_V;
  const double nV = c.lipschitz->nu_V;
  const double st = c.sigma_theta;
  const double g = c.gamma;
  const double nu = c.nu;

  PotentialReport r;
  r.tolerance = tolerance;
  r.s_reference = 12.0 / (13.0 * eta * eta * nV * st);
  const double damping = eta * g - eta * lambda * nu * nu;
  r.s_lo = damping > 0.0 ? (1.0 / lambda + tV + nu) / damping : kInf;
  r.s_hi = (1.0 / eta - tV) /
           (2.0 * eta * lambda * tV * tV + 6.0 * eta * nV * st);
  r.s_in_window = r.s_lo < r.s_hi && r.s_hi > 0.0;
  if (s_override) {
    r.s = *s_override;
  } else {
    r.s = r.s_in_window ? std::sqrt(r.s_lo * r.s_hi) : r.s_reference;
  }
  r.phi1 = 1.0 / (2.0 * eta) - tV / 2.0 -
           r.s * (eta * lambda * tV * tV + 3.0 * eta * nV * st);
  r.phi2 = r.s * damping / 2.0 - (1.0 / lambda + tV + nu) / 2.0;
  r.phi3 = r.s * damping / 2.0 - (1.0 / lambda + nu) / 2.0;

  const double cK = (1.0 + eta * nV * st) / 2.0;
  const double cT = (eta / lambda - eta * g + eta * lambda * nu * nu) / 2.0;
  const auto& recs = trace.records;
  r.P.reserve(recs.size());
  for (const auto& rec : recs)
    r.P.push_back(rec.objective +
                  r.s * (cK * rec.K_step_sq + cT * rec.theta_step_sq));

  for (std::size_t i = 1; i + 1 < recs.size(); ++i) {
    const double lhs = r.P[i + 1] - r.P[i];
    const double rhs = -r.phi1 * recs[i + 1].K_step_sq -
                       r.phi2 * recs[i + 1].theta_step_sq -
                       r.phi3 * recs[i].theta_step_sq;
    const double excess = (lhs - rhs) / std::max(1.0, std::abs(r.P[i]));
    r.worst_excess = std::max(r.worst_excess, excess);
    if (excess > tolerance) r.violations.push_back(static_cast<int>(i));
  }
  return r;
}

void AttachPotential(IterateTrace& trace, const PotentialReport& report) {
  for (std::size_t i = 0; i < trace.records.size() && i < report.P.size(); ++i)
    trace.records[i].potential = report.P[i];
}

EnvelopeReport StabilityEnvelope(const IterateTrace& trace,
                                 const ProblemConstants& c) {
  EnvelopeReport r;
  const double X = c.Envelope();
  r.cost_bound = X;
  r.K_norm_sq_bound = X / (c.box.alpha_R * c.mu);
  r.sigma_norm_bound = X / c.box.alpha_Q;
  for (const auto& rec : trace.records) {
    if (!(rec.rho < 1.0)) r.violations.push_back({rec.iter, "rho", rec.rho, 1.0});
    if (rec.cost > r.cost_bound)
      r.violations.push_back({rec.iter, "cost", rec.cost, r.cost_bound});
    if (rec.K_norm * rec.K_norm > r.K_norm_sq_bound)
      r.violations.push_back(
          {rec.iter, "K_norm", rec.K_norm * rec.K_norm, r.K_norm_sq_bound});
    if (rec.sigma_norm > r.sigma_norm_bound)
      r.violations.push_back(
          {rec.iter, "sigma_norm", rec.sigma_norm, r.sigma_norm_bound});
  }
  return r;
}

LocalRateReport LocalRate(const GailProblem& problem, IterateTrace& trace,
                          const CostParam& theta_star, const ProblemConstants& c,
                          double eta, double lambda, double eps,
                          const LocalRateOptions& options) {
  if (trace.empty())
    throw UnsupportedError("local rate needs a non-empty trace");
  const double last = trace.back().prox_grad_norm;
  if (!(last * last <= eps))
    throw UnsupportedError("local rate needs a converged trace");
  LocalRateReport r;
  if (options.a) {
    r.a = *options.a;
  } else if (c.local) {
    r.a = c.gamma / (3.0 * c.local->tau_Kstar * c.local->nu_mstar);
  } else {
    throw UnsupportedError(
        "local rate needs the weight a or the local moduli tau_K*, nu_m*");
  }
  if (c.local && c.lipschitz)
    r.upsilon_formula = ComputeUpsilon(c, eta, lambda).upsilon;

  const LqrInstance& inst = problem.instance();
  const NumericsConfig& numerics = problem.numerics();
  const int n = static_cast<int>(trace.size());
  const int stride =
      options.stride > 0
          ? options.stride
          : std::max(1, (n + options.max_points - 1) / options.max_points);
  for (int i = 0; i < n; i += stride) r.index.push_back(i);
  if (r.index.back() != n - 1) r.index.push_back(n - 1);

  Policy warm = SolveDare(inst, theta_star, numerics).policy();
  for (int i : r.index) {
    auto& rec = trace.records[static_cast<std::size_t>(i)];
    warm = SolveDareFrom(inst, rec.theta, warm, numerics).policy();
    const double z = Distance(rec.theta, theta_star) +
                     r.a * (rec.K.K() - warm.K()).norm();
    r.Z.push_back(z);
    rec.z_local = z;
  }

  const double zmax = *std::max_element(r.Z.begin(), r.Z.end());
  if (zmax == 0.0) return r;
  const double floor = options.floor_rel * zmax;
  const std::size_t m = r.Z.size();
  std::vector<double> ratio(m, kInf);
  for (std::size_t j = 0; j + 1 < m; ++j) {
    if (r.Z[j] > floor && r.Z[j + 1] > floor)
      ratio[j] = std::pow(r.Z[j + 1] / r.Z[j],
                          1.0 / (r.index[j + 1] - r.index[j]));
  }
  // Tail ends at the last ratio computed above the noise floor.
  std::size_t end = m;
  while (end > 0 && !std::isfinite(ratio[end - 1])) --end;
  if (end == 0) return r;
  std::size_t begin = end;
  while (begin > 0 && ratio[begin - 1] <= 1.0) --begin;
  r.onset = r.index[begin];
  r.tail_begin = r.index[begin];
  r.tail_end = r.index[end];
  std::vector<double> x, y;
  for (std::size_t j = begin; j <= end; ++j) {
    x.push_back(r.index[j]);
    y.push_back(std::log(r.Z[j]));
  }
  for (std::size_t j = begin; j < end; ++j)
    r.upsilon_measured = std::max(r.upsilon_measured, ratio[j]);
  const LinearFit fit = FitLine(x, y);
  r.fitted_ratio = std::exp(fit.slope);
  r.tail_r_squared = fit.r_squared;
  return r;
}

DecayFit MinProxDecaySlope(const IterateTrace& trace, int n_lo, int n_hi,
                           int points) {
  DecayFit out;
  const int n = static_cast<int>(trace.size());
  n_lo = std::max(1, n_lo);
  n_hi = std::min(n - 1, n_hi);
  out.n_lo = n_lo;
  out.n_hi = n_hi;
  if (n_hi <= n_lo || points < 2) return out;
  std::vector<double> running(static_cast<std::size_t>(n));
  double best = kInf;
  for (int i = 0; i < n; ++i) {
    const double v = trace.records[static_cast<std::size_t>(i)].prox_grad_norm;
    best = std::min(best, v * v);
    running[static_cast<std::size_t>(i)] = best;
  }
  std::vector<double> x, y;
  int prev = -1;
  for (int j = 0; j < points; ++j) {
    const double t = static_cast<double>(j) / (points - 1);
    const int N = static_cast<int>(
        std::lround(std::exp(std::log(n_lo) + t * (std::log(n_hi) - std::log(n_lo)))));
    if (N == prev) continue;
    prev = N;
    const double v = running[static_cast<std::size_t>(N)];
    if (!(v > 0.0)) continue;
    x.push_back(std::log(static_cast<double>(N)));
    y.push_back(std::log(v));
  }
  out.points = static_cast<int>(x.size());
  out.slope = FitLine(x, y).slope;
  return out;
}

ZetaReport CheckGammaBound(const GailProblem& problem, const IterateTrace& trace,
                           const PotentialReport& potential,
                           const ProblemConstants& c, double eta, double lambda,
                           const std::vector<double>& eps_values) {
  ZetaReport r;
  const ThetaPair& occ = problem.expert_occupancy();
  r.P_lower = -(c.box.beta_Q * occ.Q.trace() + c.box.beta_R * occ.R.trace() +
                problem.regularizer().SupValue(c.box));
  const double phi_prime =
      std::max({1.0, 1.0 / (eta * eta), 1.0 / (lambda * lambda)});
  const double phi_min = std::min(potential.phi1, potential.phi2);
  r.zeta = phi_min > 0.0 && !potential.P.empty()
               ? phi_prime / phi_min * (potential.P.front() - r.P_lower)
               : kInf;
  for (double eps : eps_values) {
    ZetaReport::Entry e;
    e.eps = eps;
    e.gamma_eps = trace.GammaIndex(eps);
    e.holds = e.gamma_eps && *e.gamma_eps * eps <= r.zeta;
    r.entries.push_back(e);
  }
  return r;
}

StepBoundReport CheckStepBounds(const GailProblem& problem,
                                const IterateTrace& trace,
                                const ProblemConstants& c, double eta,
                                double lambda, int stride) {
  StepBoundReport r;
  const LqrInstance& inst = problem.instance();
  const NumericsConfig& numerics = problem.numerics();
  const auto& recs = trace.records;
  if (recs.size() < 2) return r;
  stride = std::max(1, stride);
  const double tol = 1e-12;
  Policy warm = SolveDare(inst, recs.front().theta, numerics).policy();
  for (std::size_t i = 0; i + 1 < recs.size(); i += static_cast<std::size_t>(stride)) {
    const auto& cur = recs[i];
    const auto& nxt = recs[i + 1];
    const RiccatiSolution opt = SolveDareFrom(inst, cur.theta, warm, numerics);
    warm = opt.policy();
    const double c_star = inst.sigma0().cwiseProduct(opt.P).sum();
    const double sigma_star = SpectralNorm(StateCovariance(inst, warm, numerics));
    const Matrix sigma_next = StateCovariance(inst, nxt.K, numerics);
    const double c_mixed = CostFromCovariance(cur.theta, nxt.K, sigma_next);
    const double scale = std::max(1.0, std::abs(cur.cost));

    const double dec_lhs = c_mixed - cur.cost;
    const double dec_rhs = -eta * MinEigenvalue(cur.theta.R()) * c.mu * c.mu /
                           sigma_star * (cur.cost - c_star);
    const double dec_slack = (dec_rhs - dec_lhs) / scale;
    r.worst_decrement_slack = std::min(r.worst_decrement_slack, dec_slack);
    if (dec_slack < -tol) r.decrement_violations.push_back(cur.iter);

    const double inc_lhs = nxt.cost - c_mixed;
    const double inc_rhs = lambda / (c.alpha * c.alpha) * cur.cost * cur.cost +
                           lambda * c.F / c.alpha * cur.cost;
    const double inc_slack = (inc_rhs - inc_lhs) / scale;
    r.worst_increment_slack = std::min(r.worst_increment_slack, inc_slack);
    if (inc_slack < -tol) r.increment_violations.push_back(cur.iter);
    ++r.checked;
  }
  return r;
}

bool InequalitySuiteReport::pass() const {
  return std::all_of(checks.begin(), checks.end(),
                     [](const InequalityCheck& c) { return c.pass(); });
}

CostParam SampleTheta(std::mt19937_64& rng, const ThetaBox& box, int d, int k) {
  Matrix Q = SampleBlock(rng, d, box.alpha_Q, box.beta_Q);
  Matrix R = SampleBlock(rng, k, box.alpha_R, box.beta_R);
  return CostParam(std::move(Q), std::move(R));
}

InequalitySuiteReport InequalitySuite(const LqrInstance& inst,
                                      const ThetaBox& box,
                                      const InequalitySuiteOptions& options,
                                      const NumericsConfig& numerics) {
  if (options.trials < 1) throw ContractError("trials must be >= 1");
  box.Validate();
  const int d = inst.state_dim();
  const int k = inst.input_dim();
  const double mu = inst.mu();
  const Matrix& A = inst.A();
  const Matrix& B = inst.B();
  const double b_norm = SpectralNorm(B);

  InequalityCheck diff{"difference_of_cost", 0, 0, 0, 0.0, true, options.identity_tol};
  InequalityCheck dom{"gradient_dominance", 0, 0, 0, 0.0, false, options.slack_tol};
  InequalityCheck upper{"gradient_upper_bound", 0, 0, 0, 0.0, false, options.slack_tol};
  InequalityCheck k1{"gain_curvature_bound", 0, 0, 0, 0.0, false, options.slack_tol};
  InequalityCheck k2{"closed_loop_norm_bound", 0, 0, 0, 0.0, false, options.slack_tol};
  InequalityCheck sc{"local_strong_convexity", 0, 0, 0, 0.0, false, options.slack_tol};

  for (int t = 0; t < options.trials; ++t) {
    std::mt19937_64 rng(DeriveSeed(options.seed, static_cast<std::uint64_t>(t)));
    const CostParam theta = SampleTheta(rng, box, d, k);
    const RiccatiSolution opt = SolveDare(inst, theta, numerics);
    const Policy kstar = opt.policy();
    const double c_star = inst.sigma0().cwiseProduct(opt.P).sum();
    const Matrix sigma_star = StateCovariance(inst, kstar, numerics);

    auto draw = [&](double radius) -> std::optional<Policy> {
      std::normal_distribution<double> normal;
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      for (int attempt = 0; attempt < 100; ++attempt) {
        Matrix D(k, d);
        for (int j = 0; j < d; ++j)
          for (int i = 0; i < k; ++i) D(i, j) = normal(rng);
        D /= D.norm();
        Policy p(kstar.K() + unif(rng) * radius * D);
        if (!IsStabilizing(inst, p, numerics.stability_margin)) continue;
        try {
          Cost(inst, theta, p, numerics);
        } catch (const NumericalFailure&) {
          continue;
        }
        return p;
      }
      return std::nullopt;
    };
    const double radius = options.spread * std::max(1.0, kstar.K().norm());
    const auto K = draw(radius);
    const auto K2 = draw(radius);
    if (!K || !K2)
      throw InsufficientCoverageError(
          "could not draw stabilizing policies around K*(theta)");

    const PolicyGradient g = ComputePolicyGradient(inst, theta, *K, numerics);
    const ClosedLoopSolution& cl = g.closed_loop;
    const double cost = CostFromCovariance(theta, *K, cl.sigma);
    const Matrix curvature = theta.R() + B.transpose() * cl.P * B;
    const double curv_norm = SpectralNorm(curvature);

    // Difference of cost between K2 and K.
    {
      const Matrix sigma2 = StateCovariance(inst, *K2, numerics);
      const double cost2 = CostFromCovariance(theta, *K2, sigma2);
      const Matrix dK = K->K() - K2->K();
      const double rhs =
          -2.0 * (sigma2 * dK.transpose() * g.E).trace() +
          (sigma2 * dK.transpose() * curvature * dK).trace();
      const double err = std::abs((cost2 - cost) - rhs) /
                         std::max({1.0, std::abs(cost), std::abs(cost2)});
      ++diff.trials;
      diff.worst = std::max(diff.worst, err);
      if (err > diff.tolerance) ++diff.failures;
    }
    const double gap = std::max(0.0, cost - c_star);
    RecordInequality(dom, cost - c_star,
                     SpectralNorm(sigma_star) /
                         (mu * mu * MinEigenvalue(theta.R())) *
                         g.gradient.squaredNorm());
    RecordInequality(upper, g.gradient.norm(),
                     cost / (std::sqrt(mu) * MinEigenvalue(theta.Q())) *
                         std::sqrt(curv_norm * gap));
    RecordInequality(k1, curv_norm,
                     SpectralNorm(theta.R()) + cost * b_norm * b_norm / mu);
    RecordInequality(k2, SpectralNorm(A - B * K->K()),
                     std::sqrt(SpectralNorm(cl.sigma) / mu));

    const auto local = draw(options.local_radius);
    if (!local) {
      ++sc.skipped;
      continue;
    }
    const double local_cost = Cost(inst, theta, *local, numerics);
    const double dist2 = (local->K() - kstar.K()).squaredNorm();
    RecordInequality(sc, MinEigenvalue(theta.R()) * mu * dist2,
                     local_cost - c_star);
  }
  InequalitySuiteReport out;
  out.checks = {diff, dom, upper, k1, k2, sc};
  return out;
}

}  // namespace gail_lqr
