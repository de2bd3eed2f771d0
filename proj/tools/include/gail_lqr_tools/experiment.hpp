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

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gail_lqr/diagnostics.hpp"
#include "gail_lqr/riccati.hpp"
#include "gail_lqr_tools/config.hpp"

namespace gail_lqr::tools {

/// A config resolved into a problem, a start point, constants and stepsizes.
struct Experiment {
  ExperimentConfig config;
  GailProblem problem;
  Policy K0;
  CostParam theta0;
  ProblemConstants constants;
  double eta = 0.0;
  double lambda = 0.0;
  bool auto_stepsizes = false;
  bool clamped_to_condition3 = false;
  /// Saddle cost parameter when it is known in closed form: a regularizer
  /// centered at theta_tilde inside the box makes (K_E, theta_tilde) the
  /// saddle point.
  std::optional<CostParam> theta_star{};
  std::string region_kind{};
  double region_bound = 0.0;
  /// Estimation steps that could not be carried out, with the reason.
  std::vector<std::string> notes{};
};

/// Default K0: zero when A is stable, otherwise the LQR gain for (I, 10 I).
/// Default theta0: the regularizer center projected onto the box. A missing
/// center is filled in with DefaultCenter.
Experiment Prepare(const ExperimentConfig& config);

struct ConditionsReport {
  std::vector<ConditionVerdict> verdicts;
  /// Conditions that could not be evaluated and why.
  std::vector<std::pair<std::string, std::string>> unavailable;
  std::optional<Condition4Report> condition4;
  std::optional<UpsilonReport> upsilon;
  bool all_checked_pass() const;
};

ConditionsReport CheckConditions(const Experiment& ex);

struct RunOutcome {
  SolveResult result;
  std::optional<PotentialReport> potential{};
  EnvelopeReport envelope{};
  std::optional<LocalRateReport> local_rate{};
  std::optional<DecayFit> decay{};
  /// Largest ||Sigma_{K_i}|| on the trace and whether it stayed inside the
  /// region the Lipschitz moduli were estimated on.
  double path_sigma_max = 0.0;
  bool region_covered = true;
  std::vector<std::string> notes{};
};

/// Solves and runs the trace diagnostics that the available constants allow.
/// Diagnostics fill potential_P and Z_local in the trace.
RunOutcome RunExperiment(Experiment& ex);

/// 0 converged, 2 max_iter, 3 unstable.
int ExitCode(SolveStatus status);

/// Trace CSV with the fixed column order; wall_time_ms is left empty unless
/// requested so that reruns are byte-identical.
std::string TraceCsv(const IterateTrace& trace, bool wall_time);
nlohmann::json TraceJson(const IterateTrace& trace, bool wall_time);

nlohmann::json ConditionsJson(const ConditionsReport& report);
std::string ConditionsText(const ConditionsReport& report);
std::string ConditionsCsv(const ConditionsReport& report);

nlohmann::json SummaryJson(const Experiment& ex, const ConditionsReport& cond,
                           const RunOutcome& run);

/// Potential, envelope, local-rate, decay, step-bound and zeta reports.
nlohmann::json DiagnosticsJson(const Experiment& ex, const RunOutcome& run);

/// Estimator checks against the exact quantities at K0 (needs
/// config.estimator).
nlohmann::json EstimatorJson(const Experiment& ex);

/// Formats a double with 17 significant digits ("" for NaN).
std::string FormatNumber(double v);

}  // namespace gail_lqr::tools
