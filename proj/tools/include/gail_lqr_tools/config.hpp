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
#include <filesystem>
#include <optional>
#include <string>
#include <variant>

#include <json.hpp>

#include "gail_lqr/gail_solver.hpp"
#include "gail_lqr/grad_estimators.hpp"
#include "gail_lqr_tools/instance_io.hpp"

namespace gail_lqr::tools {

/// Where the Lipschitz moduli of V(K) are estimated: the closed-form
/// envelope {||Sigma_K|| <= (alpha F + 2M)/alpha_Q}, a region around the
/// endpoints {||Sigma_K|| <= 1.1 max(||Sigma_K0||, ||Sigma_KE||)}, or an
/// explicit bound on ||Sigma_K||.
struct LipschitzSpec {
  bool enabled = true;
  std::variant<std::string, double> region = std::string("path");
  int samples = 200;
  double safety = 2.0;
};

struct LocalSpec {
  bool enabled = true;
  double radius = 1e-3;
  int samples = 20;
  double safety = 2.0;
};

struct OutputSpec {
  std::optional<std::filesystem::path> trace;
  std::optional<std::filesystem::path> summary;
  bool wall_time = false;
};

/// Canonical JSON layout (every field except instance and expert optional):
///
///   {
///     "instance": {"A": [[..]], "B": [[..]], "Sigma0": [[..]]} | {"path": ".."},
///     "expert": {"theta_tilde": {"Q": [[..]], "R": [[..]]}} | {"K_E": [[..]]},
///     "box": {"alpha_Q": .., "beta_Q": .., "alpha_R": .., "beta_R": ..},
///     "regularizer": {"gamma": .., "center": {"Q": .., "R": ..}},
///     "solver": {"eta": .. | "auto", "lambda": .. | "auto", "eps": ..,
///                "max_iter": .., "K0": [[..]], "theta0": {"Q": .., "R": ..},
///                "auto_condition3": true},
///     "seed": 0,
///     "estimator": {"sigma_pert": .., "n_samples": .., "horizon": ..,
///                   "n_rollouts": .., "antithetic": true, "baseline": false},
///     "diagnostics": {"lipschitz": {"enabled": true, "region": "path" |
///                                   "envelope" | <number>, "samples": 200,
///                                   "safety": 2},
///                     "local": {"enabled": true, "radius": 1e-3,
///                               "samples": 20, "safety": 2}},
///     "output": {"trace": "trace.csv", "summary": "summary.json",
///                "wall_time": false}
///   }
///
/// Matrices are row-major nested arrays; a bare number is a 1x1 matrix.
/// Relative paths resolve against the config file's directory.
struct ExperimentConfig {
  std::optional<LqrInstance> instance;
  std::optional<Matrix> K_E;
  std::optional<CostParam> theta_tilde;
  ThetaBox box;
  double gamma = 1.0;
  /// Defaults to theta_tilde when given, else the box midpoint times I.
  std::optional<CostParam> center;
  /// nullopt = "auto".
  std::optional<double> eta;
  std::optional<double> lambda;
  double eps = 1e-12;
  int max_iter = 100000;
  std::optional<Matrix> K0;
  std::optional<CostParam> theta0;
  bool auto_condition3 = true;
  std::uint64_t seed = 0;
  std::optional<EstimatorConfig> estimator;
  LipschitzSpec lipschitz;
  LocalSpec local;
  OutputSpec output;
};

/// Throws ConfigError naming the offending field.
ExperimentConfig ParseConfig(const nlohmann::json& j,
                             const std::filesystem::path& base_dir = {});
ExperimentConfig LoadConfig(const std::filesystem::path& path);

/// theta_tilde when given, else the box midpoint times I.
CostParam DefaultCenter(const ExperimentConfig& config);

/// Inverse of ParseConfig for the fields that round-trip (used by batch
/// and tests); the instance is written inline.
nlohmann::json ConfigToJson(const ExperimentConfig& config);

}  // namespace gail_lqr::tools
