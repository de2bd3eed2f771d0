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


#include "gail_lqr_tools/instance_io.hpp"

#include <fstream>
#include <random>
#include <sstream>

namespace gail_lqr::tools {

LqrInstance GenerateInstance(int d, int k, std::uint64_t seed,
                             double rho_target, const GenOptions& options) {
  if (d < 1 || k < 1) throw ContractError("gen needs d, k >= 1");
  if (!(rho_target > 0.0 && rho_target < 1.5))
    throw ContractError("gen needs a target spectral radius in (0, 1.5)");
  if (!(options.b_scale > 0.0)) throw ContractError("b_scale must be > 0");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto fill = [&](Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
    return m;
  };
  Matrix A = fill(d, d);
  const Matrix B = options.b_scale * fill(d, k);
  const Matrix W = fill(d, d);
  const double rho = SpectralRadius(A);
  if (!(rho > 0.0)) throw NumericalFailure("generated A is nilpotent");
  A *= rho_target / rho;
  Matrix sigma0 = Matrix::Identity(d, d);
  if (!options.identity_sigma0)
    sigma0 += Symmetrize(W * W.transpose()) / static_cast<double>(d);
  return LqrInstance(std::move(A), B, std::move(sigma0));
}

nlohmann::json MatrixToJson(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix MatrixFromJson(const nlohmann::json& j, const std::string& where) {
  if (j.is_number()) {
    Matrix m(1, 1);
    m(0, 0) = j.get<double>();
    return m;
  }
  if (!j.is_array() || j.empty())
    throw ConfigError(where + ": expected a non-empty array of rows");
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  if (cols == 0)
    throw ConfigError(where + ": rows must be non-empty arrays of numbers");
  Matrix m(static_cast<Eigen::Index>(j.size()),
           static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& row = j[i];
    if (!row.is_array() || row.size() != cols)
      throw ConfigError(where + "[" + std::to_string(i) + "]: expected " +
                        std::to_string(cols) + " entries");
    for (std::size_t c = 0; c < cols; ++c) {
      if (!row[c].is_number())
        throw ConfigError(where + "[" + std::to_string(i) + "][" +
                          std::to_string(c) + "]: expected a number");
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
          row[c].get<double>();
    }
  }
  return m;
}

nlohmann::json InstanceToJson(const LqrInstance& inst) {
  nlohmann::json j;
  j["A"] = MatrixToJson(inst.A());
  j["B"] = MatrixToJson(inst.B());
  j["Sigma0"] = MatrixToJson(inst.sigma0());
  return j;
}

LqrInstance InstanceFromJson(const nlohmann::json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const char* key : {"A", "B", "Sigma0"})
    if (!j.contains(key))
      throw ConfigError(where + ": missing field '" + key + "'");
  for (const auto& item : j.items())
    if (item.key() != "A" && item.key() != "B" && item.key() != "Sigma0")
      throw ConfigError(where + ": unknown field '" + item.key() + "'");
  try {
    return LqrInstance(MatrixFromJson(j["A"], where + ".A"),
                       MatrixFromJson(j["B"], where + ".B"),
                       MatrixFromJson(j["Sigma0"], where + ".Sigma0"));
  } catch (const ContractError& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

nlohmann::json ParseJsonText(const std::string& text, const std::string& name) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    // e.byte is 1-based and points just past the offending character.
    const std::size_t upto = std::min<std::size_t>(e.byte ? e.byte - 1 : 0,
                                                   text.size());
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < upto; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError(name + ":" + std::to_string(line) + ":" +
                      std::to_string(col) + ": JSON syntax error: " + e.what());
  }
}

nlohmann::json ReadJsonFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return ParseJsonText(buf.str(), path.string());
}

LqrInstance ReadInstance(const std::filesystem::path& path) {
  return InstanceFromJson(ReadJsonFile(path), path.string());
}

void WriteInstance(const std::filesystem::path& path, const LqrInstance& inst) {
  WriteText(path, InstanceToJson(inst).dump(2) + "\n");
}

void WriteText(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

}  // namespace gail_lqr::tools
