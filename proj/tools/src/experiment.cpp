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


#include "gail_lqr_tools/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <sstream>

#include "gail_lqr/grad_estimators.hpp"

namespace gail_lqr::tools {
namespace {

using nlohmann::json;

// Seed streams for the estimation steps, derived from the config seed.
constexpr std::uint64_t kLipschitzStream = 1;
constexpr std::uint64_t kLocalStream = 2;

json Nullable(const std::optional<double>& v) {
  return v && std::isfinite(*v) ? json(*v) : json(nullptr);
}

json Finite(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json VerdictJson(const ConditionVerdict& v) {
  json checks = json::array();
  for (const auto& c : v.checks)
    checks.push_back({{"name", c.name},
                      {"value", Finite(c.value)},
                      {"bound", Finite(c.bound)},
                      {"strict", c.strict},
                      {"pass", c.pass}});
  return {{"pass", v.pass}, {"binding", v.binding}, {"checks", checks}};
}

json IndexSample(const std::vector<int>& idx, std::size_t limit = 20) {
  json out = json::array();
  for (std::size_t i = 0; i < idx.size() && i < limit; ++i) out.push_back(idx[i]);
  return out;
}

Policy DefaultK0(const LqrInstance& inst, const NumericsConfig& numerics) {
  const Eigen::Index d = inst.state_dim();
  const Eigen::Index k = inst.input_dim();
  if (SpectralRadius(inst.A()) < 1.0 - numerics.stability_margin)
    return Policy(Matrix::Zero(k, d));
  const CostParam reference(Matrix::Identity(d, d),
                            10.0 * Matrix::Identity(k, k));
  return SolveDare(inst, reference, numerics).policy();
}

}  // namespace

Experiment Prepare(const ExperimentConfig& given) {
  if (!given.instance) throw ConfigError("instance: required");
  if (!given.K_E && !given.theta_tilde)
    throw ConfigError("expert: exactly one of theta_tilde and K_E is required");
  ExperimentConfig config = given;
  if (!config.center) config.center = DefaultCenter(config);
  const LqrInstance& inst = *config.instance;
  const Policy expert = config.K_E ? Policy(*config.K_E)
                                   : ExpertPolicy(inst, *config.theta_tilde);
  GailProblem problem(inst, expert, config.box,
                      std::make_shared<SquaredPenalty>(config.gamma,
                                                       *config.center));
  Policy K0 = config.K0 ? Policy(*config.K0)
                        : DefaultK0(inst, problem.numerics());
  CostParam theta0 =
      config.theta0 ? *config.theta0
                    : ProjectTheta(ThetaPair::Of(*config.center), config.box);

  Experiment ex{config, problem, K0, theta0, ComputeConstants(problem, K0)};
  ProblemConstants& c = ex.constants;

  if (config.theta_tilde &&
      Distance(*config.theta_tilde, *config.center) == 0.0 &&
      config.box.Contains(*config.theta_tilde, 0.0))
    ex.theta_star = *config.theta_tilde;

  if (config.lipschitz.enabled) {
    if (const auto* kind = std::get_if<std::string>(&config.lipschitz.region)) {
      ex.region_kind = *kind;
      if (*kind == "envelope") {
        ex.region_bound = DefaultRegionBound(c);
      } else {
        const double s0 = SpectralNorm(StateCovariance(inst, K0));
        const double se = SpectralNorm(problem.expert_occupancy().Q);
        ex.region_bound = 1.1 * std::max(s0, se);
      }
    } else {
      ex.region_kind = "explicit";
      ex.region_bound = std::get<double>(config.lipschitz.region);
    }
    try {
      c.lipschitz = EstimateLipschitz(
          inst, K0, ex.region_bound, config.lipschitz.samples,
          DeriveSeed(config.seed, kLipschitzStream), config.lipschitz.safety);
    } catch (const Error& e) {
      ex.notes.push_back(std::string("lipschitz estimation skipped: ") + e.what());
    }
  }

  if (config.local.enabled && ex.theta_star) {
    try {
      c.local = EstimateLocalModuli(problem, *ex.theta_star, config.local.radius,
                                    config.local.samples,
                                    DeriveSeed(config.seed, kLocalStream),
                                    config.local.safety);
    } catch (const Error& e) {
      ex.notes.push_back(std::string("local moduli skipped: ") + e.what());
    }
  }

  if (config.eta) {
    ex.eta = *config.eta;
    ex.lambda = *config.lambda;
  } else {
    StepsizePolicy policy;
    policy.condition3 = config.auto_condition3;
    const AutoStepsizes st = ChooseStepsizes(c, policy);
    ex.eta = st.eta;
    ex.lambda = st.lambda;
    ex.auto_stepsizes = true;
    ex.clamped_to_condition3 = st.clamped_to_condition3;
  }
  return ex;
}

bool ConditionsReport::all_checked_pass() const {
  if (condition4 && !condition4->holds) return false;
  return std::all_of(verdicts.begin(), verdicts.end(),
                     [](const ConditionVerdict& v) { return v.pass; });
}

ConditionsReport CheckConditions(const Experiment& ex) {
  const ProblemConstants& c = ex.constants;
  ConditionsReport r;
  r.verdicts.push_back(CheckCondition1(c, ex.eta, ex.lambda));
  if (c.lipschitz) {
    r.verdicts.push_back(CheckCondition2(c));
    r.verdicts.push_back(CheckCondition3(c, ex.eta, ex.lambda));
  } else {
    r.unavailable.emplace_back("condition2", "Lipschitz moduli not estimated");
    r.unavailable.emplace_back("condition3", "Lipschitz moduli not estimated");
  }
  const CostParam& at = ex.theta_star ? *ex.theta_star : *ex.config.center;
  try {
    r.condition4 = CheckCondition4(ex.problem.instance(), at);
  } catch (const Error& e) {
    r.unavailable.emplace_back("condition4", e.what());
  }
  if (c.local) {
    r.verdicts.push_back(CheckCondition5(c, ex.eta, ex.lambda));
    if (c.lipschitz) r.upsilon = ComputeUpsilon(c, ex.eta, ex.lambda);
  } else {
    r.unavailable.emplace_back(
        "condition5", ex.theta_star ? "local moduli not estimated"
                                    : "saddle point not known before solving");
  }
  return r;
}

RunOutcome RunExperiment(Experiment& ex) {
  SolverConfig cfg;
  cfg.eta = ex.eta;
  cfg.lambda = ex.lambda;
  cfg.eps = ex.config.eps;
  cfg.max_iter = ex.config.max_iter;
  cfg.numerics = ex.problem.numerics();

  RunOutcome run{Solve(ex.problem, ex.K0, ex.theta0, cfg)};
  IterateTrace& trace = run.result.trace;
  ProblemConstants& c = ex.constants;

  for (const auto& rec : trace.records)
    run.path_sigma_max = std::max(run.path_sigma_max, rec.sigma_norm);
  if (c.lipschitz) run.region_covered = run.path_sigma_max <= ex.region_bound;

  run.envelope = StabilityEnvelope(trace, c);

  if (c.lipschitz && trace.size() >= 3) {
    run.potential = PotentialTrace(trace, c, ex.eta, ex.lambda);
    AttachPotential(trace, *run.potential);
  }

  if (run.result.status != SolveStatus::kConverged) return run;

  const int G = *run.result.gamma_eps;
  if (G >= 10) run.decay = MinProxDecaySlope(trace, std::max(1, G / 1000), G);

  CostParam theta_star = ex.theta_star ? *ex.theta_star : run.result.state.theta;
  if (!ex.theta_star) {
    run.notes.push_back("saddle taken as the final iterate for Z_local");
    if (ex.config.local.enabled && !c.local) {
      try {
        c.local = EstimateLocalModuli(ex.problem, theta_star,
                                      ex.config.local.radius,
                                      ex.config.local.samples,
                                      DeriveSeed(ex.config.seed, kLocalStream),
                                      ex.config.local.safety);
      } catch (const Error& e) {
        run.notes.push_back(std::string("local moduli skipped: ") + e.what());
      }
    }
  }
  if (c.local) {
    try {
      run.local_rate = LocalRate(ex.problem, trace, theta_star, c, ex.eta,
                                 ex.lambda, ex.config.eps);
    } catch (const Error& e) {
      run.notes.push_back(std::string("local rate skipped: ") + e.what());
    }
  }
  return run;
}

int ExitCode(SolveStatus status) {
  switch (status) {
    case SolveStatus::kConverged:
      return 0;
    case SolveStatus::kMaxIterations:
      return 2;
    case SolveStatus::kUnstable:
      return 3;
  }
  return 4;
}

std::string FormatNumber(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string TraceCsv(const IterateTrace& trace, bool wall_time) {
  std::string out =
      "iter,cost,objective_m,prox_grad_norm,rho_closed_loop,K_dist_to_expert,"
      "theta_dist_to_center,potential_P,Z_local,wall_time_ms\n";
  out.reserve(out.size() + trace.size() * 200);
  for (const auto& r : trace.records) {
    out += std::to_string(r.iter);
    for (double v : {r.cost, r.objective, r.prox_grad_norm, r.rho,
                     r.K_dist_to_expert, r.theta_dist_to_center}) {
      out += ',';
      out += FormatNumber(v);
    }
    out += ',';
    if (r.potential) out += FormatNumber(*r.potential);
    out += ',';
    if (r.z_local) out += FormatNumber(*r.z_local);
    out += ',';
    if (wall_time) out += FormatNumber(r.wall_time_ms);
    out += '\n';
  }
  return out;
}

json TraceJson(const IterateTrace& trace, bool wall_time) {
  json rows = json::array();
  for (const auto& r : trace.records) {
    json row = {{"iter", r.iter},
                {"cost", r.cost},
                {"objective_m", r.objective},
                {"prox_grad_norm", r.prox_grad_norm},
                {"rho_closed_loop", r.rho},
                {"K_dist_to_expert", r.K_dist_to_expert},
                {"theta_dist_to_center", Finite(r.theta_dist_to_center)},
                {"potential_P", Nullable(r.potential)},
                {"Z_local", Nullable(r.z_local)},
                {"wall_time_ms", wall_time ? json(r.wall_time_ms) : json(nullptr)}};
    rows.push_back(std::move(row));
  }
  return rows;
}

json ConditionsJson(const ConditionsReport& report) {
  json out = json::object();
  for (const auto& v : report.verdicts) out[v.condition] = VerdictJson(v);
  if (report.condition4)
    out["condition4"] = {{"pass", report.condition4->holds},
                         {"sigma_min", report.condition4->sigma_min},
                         {"sigma_max", report.condition4->sigma_max}};
  for (const auto& [name, why] : report.unavailable)
    out[name] = {{"pass", nullptr}, {"unavailable", why}};
  return out;
}

std::string ConditionsText(const ConditionsReport& report) {
  std::ostringstream os;
  for (const auto& v : report.verdicts) {
    os << v.condition << ": " << (v.pass ? "PASS" : "FAIL");
    if (!v.pass) os << " (binding: " << v.binding << ")";
    os << '\n';
    for (const auto& c : v.checks)
      os << "  " << (c.pass ? "ok  " : "FAIL") << ' ' << c.name << "  "
         << FormatNumber(c.value) << (c.strict ? " < " : " <= ")
         << FormatNumber(c.bound) << '\n';
  }
  if (report.condition4)
    os << "condition4: " << (report.condition4->holds ? "PASS" : "FAIL")
       << "  sigma_min " << FormatNumber(report.condition4->sigma_min)
       << "  sigma_max " << FormatNumber(report.condition4->sigma_max) << '\n';
  for (const auto& [name, why] : report.unavailable)
    os << name << ": unavailable (" << why << ")\n";
  if (report.upsilon)
    os << "upsilon: " << FormatNumber(report.upsilon->upsilon) << "  a "
       << FormatNumber(report.upsilon->a) << '\n';
  return os.str();
}

std::string ConditionsCsv(const ConditionsReport& report) {
  std::string out = "condition,check,value,bound,strict,pass\n";
  for (const auto& v : report.verdicts)
    for (const auto& c : v.checks)
      out += v.condition + "," + c.name + "," + FormatNumber(c.value) + "," +
             FormatNumber(c.bound) + "," + (c.strict ? "1" : "0") + "," +
             (c.pass ? "1" : "0") + "\n";
  if (report.condition4)
    out += "condition4,sigma_min_over_sigma_max," +
           FormatNumber(report.condition4->sigma_min /
                        report.condition4->sigma_max) +
           ",,0," + (report.condition4->holds ? "1" : "0") + "\n";
  return out;
}

json SummaryJson(const Experiment& ex, const ConditionsReport& cond,
                 const RunOutcome& run) {
  const SolveResult& r = run.result;
  json s;
  s["converged"] = r.status == SolveStatus::kConverged;
  s["gamma_eps_index"] = r.gamma_eps ? json(*r.gamma_eps) : json(nullptr);
  s["final_prox_grad_norm"] =
      r.trace.empty() ? json(nullptr) : Finite(r.trace.back().prox_grad_norm);
  s["final_K_error"] = (r.state.K.K() - ex.problem.expert().K()).norm();
  s["condition_verdicts"] = ConditionsJson(cond);
  s["upsilon_formula"] =
      cond.upsilon ? Finite(cond.upsilon->upsilon) : json(nullptr);
  s["upsilon_measured"] =
      run.local_rate ? Finite(run.local_rate->upsilon_measured) : json(nullptr);

  s["status"] = ToString(r.status);
  s["message"] = r.message;
  s["iterations"] = r.trace.empty() ? 0 : r.trace.back().iter;
  s["eta"] = ex.eta;
  s["lambda"] = ex.lambda;
  s["auto_stepsizes"] = ex.auto_stepsizes;
  s["clamped_to_condition3"] = ex.clamped_to_condition3;
  s["final_theta_error"] =
      ex.theta_star ? json(Distance(r.state.theta, *ex.theta_star))
                    : json(nullptr);
  if (r.unstable_rho) s["unstable_rho"] = Finite(*r.unstable_rho);
  s["envelope_violations"] = run.envelope.violations.size();
  s["potential_violations"] =
      run.potential ? json(run.potential->violations.size()) : json(nullptr);
  s["decay_slope"] = run.decay ? json(run.decay->slope) : json(nullptr);
  s["tail_r_squared"] =
      run.local_rate ? Finite(run.local_rate->tail_r_squared) : json(nullptr);
  s["lipschitz_region"] = {{"kind", ex.region_kind},
                           {"bound", ex.region_bound},
                           {"path_sigma_max", run.path_sigma_max},
                           {"covered", run.region_covered}};
  json notes = json::array();
  for (const auto& n : ex.notes) notes.push_back(n);
  for (const auto& n : run.notes) notes.push_back(n);
  s["notes"] = notes;
  return s;
}

json DiagnosticsJson(const Experiment& ex, const RunOutcome& run) {
  const IterateTrace& trace = run.result.trace;
  const ProblemConstants& c = ex.constants;
  json out;

  const EnvelopeReport& env = run.envelope;
  json ev = json::array();
  for (std::size_t i = 0; i < env.violations.size() && i < 20; ++i)
    ev.push_back({{"iter", env.violations[i].iter},
                  {"bound", env.violations[i].bound},
                  {"value", Finite(env.violations[i].value)},
                  {"limit", env.violations[i].limit}});
  out["envelope"] = {{"cost_bound", env.cost_bound},
                     {"K_norm_sq_bound", env.K_norm_sq_bound},
                     {"sigma_norm_bound", env.sigma_norm_bound},
                     {"violations", env.violations.size()},
                     {"first_violations", ev}};

  if (run.potential) {
    const PotentialReport& p = *run.potential;
    out["potential"] = {{"s", p.s},
                        {"s_reference", p.s_reference},
                        {"s_window", {Finite(p.s_lo), Finite(p.s_hi)}},
                        {"s_in_window", p.s_in_window},
                        {"phi1", p.phi1},
                        {"phi2", p.phi2},
                        {"phi3", p.phi3},
                        {"violations", p.violations.size()},
                        {"first_violations", IndexSample(p.violations)},
                        {"worst_excess", Finite(p.worst_excess)},
                        {"tolerance", p.tolerance}};
    if (run.result.status == SolveStatus::kConverged) {
      const ZetaReport z = CheckGammaBound(ex.problem, trace, p, c, ex.eta,
                                           ex.lambda,
                                           {1e-2, 1e-3, 1e-4, 1e-6, 1e-8, 1e-10, 1e-12});
      json entries = json::array();
      for (const auto& e : z.entries)
        entries.push_back({{"eps", e.eps},
                           {"gamma_eps", e.gamma_eps ? json(*e.gamma_eps)
                                                     : json(nullptr)},
                           {"holds", e.holds}});
      out["gamma_bound"] = {{"zeta", Finite(z.zeta)},
                            {"P_lower", z.P_lower},
                            {"soft", z.soft},
                            {"entries", entries}};
    }
  } else {
    out["potential"] = nullptr;
  }

  if (c.lipschitz)
    out["lipschitz"] = {{"tau_sigma", c.lipschitz->tau_sigma},
                        {"nu_sigma", c.lipschitz->nu_sigma},
                        {"tau_V", c.lipschitz->tau_V},
                        {"nu_V", c.lipschitz->nu_V},
                        {"region_bound", c.lipschitz->region_bound},
                        {"accepted", c.lipschitz->accepted},
                        {"drawn", c.lipschitz->drawn},
                        {"path_sigma_max", run.path_sigma_max},
                        {"region_covered", run.region_covered}};
  if (c.local)
    out["local_moduli"] = {{"tau_Kstar", c.local->tau_Kstar},
                           {"nu_Kstar", c.local->nu_Kstar},
                           {"nu_mstar", c.local->nu_mstar},
                           {"radius", c.local->radius},
                           {"accepted", c.local->accepted}};

  if (run.local_rate) {
    const LocalRateReport& l = *run.local_rate;
    out["local_rate"] = {{"a", l.a},
                         {"upsilon_formula", Nullable(l.upsilon_formula)},
                         {"upsilon_measured", Finite(l.upsilon_measured)},
                         {"fitted_ratio", Finite(l.fitted_ratio)},
                         {"tail_r_squared", Finite(l.tail_r_squared)},
                         {"onset", l.onset},
                         {"tail", {l.tail_begin, l.tail_end}},
                         {"points", l.Z.size()}};
  } else {
    out["local_rate"] = nullptr;
  }
  out["decay"] = run.decay ? json{{"slope", run.decay->slope},
                                  {"n_lo", run.decay->n_lo},
                                  {"n_hi", run.decay->n_hi},
                                  {"points", run.decay->points}}
                           : json(nullptr);

  if (trace.size() >= 2) {
    const int stride =
        std::max<int>(1, static_cast<int>(trace.size() / 2000));
    const StepBoundReport sb =
        CheckStepBounds(ex.problem, trace, c, ex.eta, ex.lambda, stride);
    out["step_bounds"] = {
        {"checked", sb.checked},
        {"stride", stride},
        {"decrement_violations", sb.decrement_violations.size()},
        {"increment_violations", sb.increment_violations.size()},
        {"worst_decrement_slack", Finite(sb.worst_decrement_slack)},
        {"worst_increment_slack", Finite(sb.worst_increment_slack)}};
  }
  json notes = json::array();
  for (const auto& n : ex.notes) notes.push_back(n);
  for (const auto& n : run.notes) notes.push_back(n);
  out["notes"] = notes;
  return out;
}

json EstimatorJson(const Experiment& ex) {
  if (!ex.config.estimator)
    throw ConfigError("estimator: section required for estimator checks");
  const EstimatorConfig& cfg = *ex.config.estimator;
  const LqrInstance& inst = ex.problem.instance();
  const PolicyGradient exact =
      ComputePolicyGradient(inst, ex.theta0, ex.K0, ex.problem.numerics());
  json out;
  try {
    const EsGradientResult es = EsGradient(inst, ex.theta0, ex.K0, cfg);
    const double ref = exact.gradient.norm();
    out["es_gradient"] = {
        {"estimate", MatrixToJson(es.gradient)},
        {"exact", MatrixToJson(exact.gradient)},
        {"relative_error",
         Finite((es.gradient - exact.gradient).norm() / std::max(ref, 1e-300))},
        {"drawn", es.drawn},
        {"rejected", es.rejected}};
  } catch (const MarginTooSmallError& e) {
    out["es_gradient"] = {{"error", e.what()}};
  }
  const RolloutSigmaResult ro = RolloutSigma(inst, ex.K0, cfg);
  const Matrix& sigma = exact.closed_loop.sigma;
  out["rollout_sigma"] = {
      {"estimate", MatrixToJson(ro.sigma)},
      {"exact", MatrixToJson(sigma)},
      {"truncated", MatrixToJson(TruncatedSigma(inst, ex.K0, cfg.horizon))},
      {"relative_error", (ro.sigma - sigma).norm() / sigma.norm()},
      {"truncation_bias", ro.bias},
      {"rho", ro.rho}};
  return out;
}

}  // namespace gail_lqr::tools
