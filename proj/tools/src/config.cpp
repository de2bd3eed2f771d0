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


#include "gail_lqr_tools/config.hpp"

#include <set>

namespace gail_lqr::tools {
namespace {

using nlohmann::json;

void RequireObject(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
}

void RejectUnknown(const json& j, const std::string& where,
                   const std::set<std::string>& known) {
  for (const auto& item : j.items())
    if (!known.count(item.key()))
      throw ConfigError(where + ": unknown field '" + item.key() + "'");
}

double Number(const json& j, const std::string& where) {
  if (!j.is_number()) throw ConfigError(where + ": expected a number");
  return j.get<double>();
}

double PositiveNumber(const json& j, const std::string& where) {
  const double v = Number(j, where);
  if (!(v > 0.0)) throw ConfigError(where + ": must be > 0");
  return v;
}

int PositiveInt(const json& j, const std::string& where) {
  if (!j.is_number_integer() || j.get<long long>() < 1 ||
      j.get<long long>() > 2000000000LL)
    throw ConfigError(where + ": expected a positive integer");
  return j.get<int>();
}

bool Bool(const json& j, const std::string& where) {
  if (!j.is_boolean()) throw ConfigError(where + ": expected true or false");
  return j.get<bool>();
}

CostParam Theta(const json& j, const std::string& where) {
  RequireObject(j, where);
  RejectUnknown(j, where, {"Q", "R"});
  if (!j.contains("Q") || !j.contains("R"))
    throw ConfigError(where + ": needs both Q and R");
  try {
    return CostParam(MatrixFromJson(j["Q"], where + ".Q"),
                     MatrixFromJson(j["R"], where + ".R"));
  } catch (const ContractError& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

json ThetaToJson(const CostParam& theta) {
  return {{"Q", MatrixToJson(theta.Q())}, {"R", MatrixToJson(theta.R())}};
}

std::optional<double> StepsizeField(const json& j, const std::string& where) {
  if (j.is_string()) {
    if (j.get<std::string>() != "auto")
      throw ConfigError(where + ": expected a number or \"auto\"");
    return std::nullopt;
  }
  return PositiveNumber(j, where);
}

std::filesystem::path Resolve(const std::filesystem::path& base,
                              const json& j, const std::string& where) {
  if (!j.is_string()) throw ConfigError(where + ": expected a path string");
  std::filesystem::path p = j.get<std::string>();
  return p.is_relative() && !base.empty() ? base / p : p;
}

}  // namespace

ExperimentConfig ParseConfig(const json& j,
                             const std::filesystem::path& base_dir) {
  RequireObject(j, "config");
  RejectUnknown(j, "config",
                {"instance", "expert", "box", "regularizer", "solver", "seed",
                 "estimator", "diagnostics", "output"});
  ExperimentConfig c;

  if (!j.contains("instance")) throw ConfigError("instance: required");
  const json& ji = j["instance"];
  RequireObject(ji, "instance");
  if (ji.contains("path")) {
    RejectUnknown(ji, "instance", {"path"});
    c.instance = ReadInstance(Resolve(base_dir, ji["path"], "instance.path"));
  } else {
    c.instance = InstanceFromJson(ji, "instance");
  }
  const int d = static_cast<int>(c.instance->state_dim());
  const int k = static_cast<int>(c.instance->input_dim());

  if (!j.contains("expert")) throw ConfigError("expert: required");
  const json& je = j["expert"];
  RequireObject(je, "expert");
  RejectUnknown(je, "expert", {"theta_tilde", "K_E"});
  if (je.contains("theta_tilde") == je.contains("K_E"))
    throw ConfigError("expert: exactly one of theta_tilde and K_E is required");
  if (je.contains("K_E")) {
    c.K_E = MatrixFromJson(je["K_E"], "expert.K_E");
    if (c.K_E->rows() != k || c.K_E->cols() != d)
      throw ConfigError("expert.K_E: expected " + std::to_string(k) + "x" +
                        std::to_string(d));
  } else {
    c.theta_tilde = Theta(je["theta_tilde"], "expert.theta_tilde");
    if (c.theta_tilde->Q().rows() != d || c.theta_tilde->R().rows() != k)
      throw ConfigError("expert.theta_tilde: shape does not match the instance");
  }

  if (j.contains("box")) {
    const json& jb = j["box"];
    RequireObject(jb, "box");
    RejectUnknown(jb, "box", {"alpha_Q", "beta_Q", "alpha_R", "beta_R"});
    if (jb.contains("alpha_Q")) c.box.alpha_Q = PositiveNumber(jb["alpha_Q"], "box.alpha_Q");
    if (jb.contains("beta_Q")) c.box.beta_Q = PositiveNumber(jb["beta_Q"], "box.beta_Q");
    if (jb.contains("alpha_R")) c.box.alpha_R = PositiveNumber(jb["alpha_R"], "box.alpha_R");
    if (jb.contains("beta_R")) c.box.beta_R = PositiveNumber(jb["beta_R"], "box.beta_R");
    try {
      c.box.Validate();
    } catch (const ContractError& e) {
      throw ConfigError(std::string("box: ") + e.what());
    }
  }

  if (j.contains("regularizer")) {
    const json& jr = j["regularizer"];
    RequireObject(jr, "regularizer");
    RejectUnknown(jr, "regularizer", {"gamma", "center"});
    if (jr.contains("gamma"))
      c.gamma = PositiveNumber(jr["gamma"], "regularizer.gamma");
    if (jr.contains("center")) c.center = Theta(jr["center"], "regularizer.center");
  }
  if (!c.center) c.center = DefaultCenter(c);
  if (c.center->Q().rows() != d || c.center->R().rows() != k)
    throw ConfigError("regularizer.center: shape does not match the instance");

  if (j.contains("solver")) {
    const json& js = j["solver"];
    RequireObject(js, "solver");
    RejectUnknown(js, "solver",
                  {"eta", "lambda", "eps", "max_iter", "K0", "theta0",
                   "auto_condition3"});
    if (js.contains("eta")) c.eta = StepsizeField(js["eta"], "solver.eta");
    if (js.contains("lambda"))
      c.lambda = StepsizeField(js["lambda"], "solver.lambda");
    if (js.contains("eps")) c.eps = PositiveNumber(js["eps"], "solver.eps");
    if (js.contains("max_iter"))
      c.max_iter = PositiveInt(js["max_iter"], "solver.max_iter");
    if (js.contains("K0")) {
      c.K0 = MatrixFromJson(js["K0"], "solver.K0");
      if (c.K0->rows() != k || c.K0->cols() != d)
        throw ConfigError("solver.K0: expected " + std::to_string(k) + "x" +
                          std::to_string(d));
    }
    if (js.contains("theta0")) c.theta0 = Theta(js["theta0"], "solver.theta0");
    if (js.contains("auto_condition3"))
      c.auto_condition3 = Bool(js["auto_condition3"], "solver.auto_condition3");
  }
  if (c.eta.has_value() != c.lambda.has_value())
    throw ConfigError("solver: eta and lambda must both be numbers or both auto");

  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned())
      throw ConfigError("seed: expected a non-negative integer");
    c.seed = j["seed"].get<std::uint64_t>();
  }

  if (j.contains("estimator")) {
    const json& jst = j["estimator"];
    RequireObject(jst, "estimator");
    RejectUnknown(jst, "estimator",
                  {"sigma_pert", "n_samples", "horizon", "n_rollouts",
                   "antithetic", "baseline"});
    EstimatorConfig e;
    if (jst.contains("sigma_pert"))
      e.sigma_pert = PositiveNumber(jst["sigma_pert"], "estimator.sigma_pert");
    if (jst.contains("n_samples"))
      e.n_samples = PositiveInt(jst["n_samples"], "estimator.n_samples");
    if (jst.contains("horizon"))
      e.horizon = PositiveInt(jst["horizon"], "estimator.horizon");
    if (jst.contains("n_rollouts"))
      e.n_rollouts = PositiveInt(jst["n_rollouts"], "estimator.n_rollouts");
    if (jst.contains("antithetic"))
      e.antithetic = Bool(jst["antithetic"], "estimator.antithetic");
    if (jst.contains("baseline"))
      e.baseline = Bool(jst["baseline"], "estimator.baseline");
    e.seed = c.seed;
    c.estimator = e;
  }

  if (j.contains("diagnostics")) {
    const json& jd = j["diagnostics"];
    RequireObject(jd, "diagnostics");
    RejectUnknown(jd, "diagnostics", {"lipschitz", "local"});
    if (jd.contains("lipschitz")) {
      const json& jl = jd["lipschitz"];
      const std::string w = "diagnostics.lipschitz";
      RequireObject(jl, w);
      RejectUnknown(jl, w, {"enabled", "region", "samples", "safety"});
      if (jl.contains("enabled")) c.lipschitz.enabled = Bool(jl["enabled"], w + ".enabled");
      if (jl.contains("region")) {
        const json& r = jl["region"];
        if (r.is_string()) {
          const std::string s = r.get<std::string>();
          if (s != "path" && s != "envelope")
            throw ConfigError(w + ".region: expected \"path\", \"envelope\" or a number");
          c.lipschitz.region = s;
        } else {
          c.lipschitz.region = PositiveNumber(r, w + ".region");
        }
      }
      if (jl.contains("samples"))
        c.lipschitz.samples = PositiveInt(jl["samples"], w + ".samples");
      if (jl.contains("safety"))
        c.lipschitz.safety = PositiveNumber(jl["safety"], w + ".safety");
    }
    if (jd.contains("local")) {
      const json& jl = jd["local"];
      const std::string w = "diagnostics.local";
      RequireObject(jl, w);
      RejectUnknown(jl, w, {"enabled", "radius", "samples", "safety"});
      if (jl.contains("enabled")) c.local.enabled = Bool(jl["enabled"], w + ".enabled");
      if (jl.contains("radius")) c.local.radius = PositiveNumber(jl["radius"], w + ".radius");
      if (jl.contains("samples")) c.local.samples = PositiveInt(jl["samples"], w + ".samples");
      if (jl.contains("safety")) c.local.safety = PositiveNumber(jl["safety"], w + ".safety");
    }
  }

  if (j.contains("output")) {
    const json& jo = j["output"];
    RequireObject(jo, "output");
    RejectUnknown(jo, "output", {"trace", "summary", "wall_time"});
    if (jo.contains("trace")) c.output.trace = Resolve(base_dir, jo["trace"], "output.trace");
    if (jo.contains("summary"))
      c.output.summary = Resolve(base_dir, jo["summary"], "output.summary");
    if (jo.contains("wall_time"))
      c.output.wall_time = Bool(jo["wall_time"], "output.wall_time");
  }
  return c;
}

ExperimentConfig LoadConfig(const std::filesystem::path& path) {
  const json j = ReadJsonFile(path);
  try {
    return ParseConfig(j, path.parent_path());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

CostParam DefaultCenter(const ExperimentConfig& c) {
  if (c.theta_tilde) return *c.theta_tilde;
  if (!c.instance) throw ConfigError("instance: required");
  const Eigen::Index d = c.instance->state_dim();
  const Eigen::Index k = c.instance->input_dim();
  return CostParam(0.5 * (c.box.alpha_Q + c.box.beta_Q) * Matrix::Identity(d, d),
                   0.5 * (c.box.alpha_R + c.box.beta_R) * Matrix::Identity(k, k));
}

json ConfigToJson(const ExperimentConfig& c) {
  json j;
  j["instance"] = InstanceToJson(*c.instance);
  if (c.K_E)
    j["expert"]["K_E"] = MatrixToJson(*c.K_E);
  else
    j["expert"]["theta_tilde"] = ThetaToJson(*c.theta_tilde);
  j["box"] = {{"alpha_Q", c.box.alpha_Q},
              {"beta_Q", c.box.beta_Q},
              {"alpha_R", c.box.alpha_R},
              {"beta_R", c.box.beta_R}};
  j["regularizer"] = {{"gamma", c.gamma},
                      {"center", ThetaToJson(c.center ? *c.center : DefaultCenter(c))}};
  json s;
  s["eta"] = c.eta ? json(*c.eta) : json("auto");
  s["lambda"] = c.lambda ? json(*c.lambda) : json("auto");
  s["eps"] = c.eps;
  s["max_iter"] = c.max_iter;
  if (c.K0) s["K0"] = MatrixToJson(*c.K0);
  if (c.theta0) s["theta0"] = ThetaToJson(*c.theta0);
  s["auto_condition3"] = c.auto_condition3;
  j["solver"] = s;
  j["seed"] = c.seed;
  if (c.estimator)
    j["estimator"] = {{"sigma_pert", c.estimator->sigma_pert},
                      {"n_samples", c.estimator->n_samples},
                      {"horizon", c.estimator->horizon},
                      {"n_rollouts", c.estimator->n_rollouts},
                      {"antithetic", c.estimator->antithetic},
                      {"baseline", c.estimator->baseline}};
  json lip = {{"enabled", c.lipschitz.enabled},
              {"samples", c.lipschitz.samples},
              {"safety", c.lipschitz.safety}};
  if (const auto* s2 = std::get_if<std::string>(&c.lipschitz.region))
    lip["region"] = *s2;
  else
    lip["region"] = std::get<double>(c.lipschitz.region);
  j["diagnostics"] = {{"lipschitz", lip},
                      {"local",
                       {{"enabled", c.local.enabled},
                        {"radius", c.local.radius},
                        {"samples", c.local.samples},
                        {"safety", c.local.safety}}}};
  json out;
  if (c.output.trace) out["trace"] = c.output.trace->string();
  if (c.output.summary) out["summary"] = c.output.summary->string();
  out["wall_time"] = c.output.wall_time;
  j["output"] = out;
  return j;
}

}  // namespace gail_lqr::tools
