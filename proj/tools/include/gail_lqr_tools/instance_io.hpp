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
#include <string>

#include <json.hpp>

#include "gail_lqr/lqr_core.hpp"

namespace gail_lqr::tools {

/// Thrown for malformed configs and instance files. exit code 1.
class ConfigError : public Error {
 public:
  using Error::Error;
};

struct GenOptions {
  /// Scale of the i.i.d. normal entries of B.
  double b_scale = 1.0;
  /// Sigma0 = I instead of I + W W' / d.
  bool identity_sigma0 = false;
};

/// Random instance: A with i.i.d. normal entries rescaled to spectral radius
/// rho_target, B ~ b_scale N(0, 1), Sigma0 = I + W W'/d. Deterministic in seed.
LqrInstance GenerateInstance(int d, int k, std::uint64_t seed,
                             double rho_target, const GenOptions& options = {});

/// Matrices as row-major nested arrays.
nlohmann::json MatrixToJson(const Matrix& m);
/// `where` names the field in error messages.
Matrix MatrixFromJson(const nlohmann::json& j, const std::string& where);

nlohmann::json InstanceToJson(const LqrInstance& inst);
LqrInstance InstanceFromJson(const nlohmann::json& j, const std::string& where);

/// Parses JSON text; syntax errors become ConfigError with line and column.
nlohmann::json ParseJsonText(const std::string& text, const std::string& name);
nlohmann::json ReadJsonFile(const std::filesystem::path& path);

LqrInstance ReadInstance(const std::filesystem::path& path);
void WriteInstance(const std::filesystem::path& path, const LqrInstance& inst);

/// Writes text atomically enough for our purposes: truncate and write.
void WriteText(const std::filesystem::path& path, const std::string& text);

}  // namespace gail_lqr::tools
