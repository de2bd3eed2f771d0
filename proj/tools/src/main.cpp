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


// gail_lqr: command-line front end.
//
// Exit codes: 0 ok / converged, 1 config or usage error, 2 max_iter reached,
// 3 instability, 4 other numerical failure, 5 check: a condition fails,
// 6 diag: the replay does not reproduce the given trace.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gail_lqr/riccati.hpp"
#include "gail_lqr_tools/experiment.hpp"

namespace fs = std::filesystem;
using namespace gail_lqr;
using namespace gail_lqr::tools;
using nlohmann::json;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::optional<fs::path> out;
  std::string format = "csv";
};

ExperimentConfig Load(const fs::path& path, const Globals& g) {
  ExperimentConfig c = LoadConfig(path);
  if (g.seed) {
    c.seed = *g.seed;
    if (c.estimator) c.estimator->seed = *g.seed;
  }
  return c;
}

void Emit(const std::optional<fs::path>& path, const std::string& text) {
  if (path)
    WriteText(*path, text);
  else
    std::cout << text;
}

std::string StripLastColumn(const std::string& line) {
  const auto pos = line.rfind(',');
  return pos == std::string::npos ? line : line.substr(0, pos);
}

// First differing line (1-based) of two trace CSVs, ignoring wall_time_ms;
// 0 when they agree.
std::size_t FirstMismatch(const std::string& a, const std::string& b) {
  std::istringstream sa(a), sb(b);
  std::string la, lb;
  for (std::size_t line = 1;; ++line) {
    const bool ga = static_cast<bool>(std::getline(sa, la));
    const bool gb = static_cast<bool>(std::getline(sb, lb));
    if (!ga && !gb) return 0;
    if (ga != gb || StripLastColumn(la) != StripLastColumn(lb)) return line;
  }
}

int CmdGen(int d, int k, double rho, const GenOptions& opt, const Globals& g) {
  const LqrInstance inst = GenerateInstance(d, k, g.seed.value_or(0), rho, opt);
  Emit(g.out, InstanceToJson(inst).dump(2) + "\n");
  return 0;
}

int CmdExpert(const fs::path& config_path, const Globals& g) {
  const ExperimentConfig c = Load(config_path, g);
  json out;
  Matrix K;
  if (c.theta_tilde) {
    const RiccatiSolution sol = SolveDare(*c.instance, *c.theta_tilde);
    K = sol.K;
    out["P"] = MatrixToJson(sol.P);
    out["riccati_residual"] = sol.residual;
    out["iterations"] = sol.iterations;
    out["cost"] = Cost(*c.instance, *c.theta_tilde, sol.policy());
  } else {
    K = *c.K_E;
  }
  out["K_E"] = MatrixToJson(K);
  out["rho_closed_loop"] = SpectralRadius(ClosedLoopMatrix(*c.instance, Policy(K)));
  Emit(g.out, out.dump(2) + "\n");
  return 0;
}

struct SolvePaths {
  std::optional<fs::path> trace;
  std::optional<fs::path> summary;
};

SolvePaths ResolvePaths(const ExperimentConfig& c, const Globals& g) {
  const std::string ext = g.format == "json" ? "json" : "csv";
  if (g.out) return {*g.out / ("trace." + ext), *g.out / "summary.json"};
  return {c.output.trace.value_or("trace." + ext), c.output.summary};
}

int RunSolve(const ExperimentConfig& config, const Globals& g) {
  Experiment ex = Prepare(config);
  const ConditionsReport cond = CheckConditions(ex);
  const RunOutcome run = RunExperiment(ex);
  const SolvePaths paths = ResolvePaths(config, g);
  const bool wall = config.output.wall_time;
  if (g.format == "json")
    WriteText(*paths.trace, TraceJson(run.result.trace, wall).dump(1) + "\n");
  else
    WriteText(*paths.trace, TraceCsv(run.result.trace, wall));
  Emit(paths.summary, SummaryJson(ex, cond, run).dump(2) + "\n");
  if (run.result.status != SolveStatus::kConverged)
    std::cerr << "gail_lqr: " << run.result.message << "\n";
  return ExitCode(run.result.status);
}

int CmdSolve(const fs::path& config_path, const Globals& g) {
  return RunSolve(Load(config_path, g), g);
}

int CmdCheck(const fs::path& config_path, const Globals& g) {
  const Experiment ex = Prepare(Load(config_path, g));
  const ConditionsReport cond = CheckConditions(ex);
  std::string text;
  if (g.format == "json") {
    json j = ConditionsJson(cond);
    j["eta"] = ex.eta;
    j["lambda"] = ex.lambda;
    j["upsilon"] = cond.upsilon ? json(cond.upsilon->upsilon) : json(nullptr);
    text = j.dump(2) + "\n";
  } else if (g.out) {
    text = ConditionsCsv(cond);
  } else {
    std::ostringstream os;
    os << "eta " << FormatNumber(ex.eta) << "  lambda " << FormatNumber(ex.lambda)
       << (ex.auto_stepsizes ? "  (auto)" : "") << "\n"
       << ConditionsText(cond);
    text = os.str();
  }
  Emit(g.out, text);
  return cond.all_checked_pass() ? 0 : 5;
}

int CmdDiag(const fs::path& trace_path, const fs::path& config_path,
            const Globals& g) {
  const ExperimentConfig config = Load(config_path, g);
  Experiment ex = Prepare(config);
  const RunOutcome run = RunExperiment(ex);
  json report = DiagnosticsJson(ex, run);
  std::string given;
  {
    std::ifstream in(trace_path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + trace_path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    given = buf.str();
  }
  const std::size_t mismatch =
      FirstMismatch(given, TraceCsv(run.result.trace, false));
  report["replay_matches_trace"] = mismatch == 0;
  if (mismatch) report["first_mismatch_line"] = mismatch;
  if (config.estimator) report["estimators"] = EstimatorJson(ex);
  Emit(g.out, report.dump(2) + "\n");
  return mismatch == 0 ? 0 : 6;
}

int CmdBatch(const std::vector<fs::path>& configs, const Globals& g) {
  int worst = 0;
  for (const auto& path : configs) {
    Globals each = g;
    each.out = g.out.value_or(".") / path.stem();
    int code;
    try {
      code = RunSolve(Load(path, g), each);
    } catch (const ConfigError& e) {
      std::cerr << "gail_lqr: " << e.what() << "\n";
      code = 1;
    } catch (const Error& e) {
      std::cerr << "gail_lqr: " << path.string() << ": " << e.what() << "\n";
      code = 4;
    }
    std::cout << path.string() << " -> exit " << code << "\n";
    worst = std::max(worst, code);
  }
  return worst;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Alternating policy-gradient / cost-ascent solver for LQR imitation"};
  app.require_subcommand(1);
  Globals g;
  std::uint64_t seed = 0;
  std::string out;
  auto* seed_opt = app.add_option("--seed", seed, "Root seed")->group("Global");
  auto* out_opt = app.add_option("--out", out, "Output file or directory")->group("Global");
  app.add_option("--format", g.format, "Output format")
      ->check(CLI::IsMember({"csv", "json"}))
      ->group("Global");
  app.fallthrough();

  int d = 1, k = 1;
  double rho = 0.5;
  GenOptions gen_opt;
  auto* gen = app.add_subcommand("gen", "Write a random instance");
  gen->add_option("-d,--state-dim", d, "State dimension")->check(CLI::PositiveNumber);
  gen->add_option("-k,--input-dim", k, "Input dimension")->check(CLI::PositiveNumber);
  gen->add_option("--rho", rho, "Target spectral radius of A, in (0, 1.5)");
  gen->add_option("--b-scale", gen_opt.b_scale, "Scale of the entries of B");
  gen->add_flag("--identity-sigma0", gen_opt.identity_sigma0, "Use Sigma0 = I");

  fs::path config_path, trace_path;
  std::vector<fs::path> batch_configs;
  auto* expert = app.add_subcommand("expert", "Solve for the expert policy");
  expert->add_option("config", config_path)->required();
  auto* solve = app.add_subcommand("solve", "Run the solver; write trace and summary");
  solve->add_option("config", config_path)->required();
  auto* check = app.add_subcommand("check", "Evaluate the stepsize conditions");
  check->add_option("config", config_path)->required();
  auto* diag = app.add_subcommand("diag", "Replay a run and report diagnostics");
  diag->add_option("trace", trace_path)->required();
  diag->add_option("config", config_path)->required();
  auto* batch = app.add_subcommand("batch", "Solve several configs in turn");
  batch->add_option("configs", batch_configs)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  if (*seed_opt) g.seed = seed;
  if (*out_opt) g.out = out;

  try {
    if (*gen) return CmdGen(d, k, rho, gen_opt, g);
    if (*expert) return CmdExpert(config_path, g);
    if (*solve) return CmdSolve(config_path, g);
    if (*check) return CmdCheck(config_path, g);
    if (*diag) return CmdDiag(trace_path, config_path, g);
    if (*batch) return CmdBatch(batch_configs, g);
  } catch (const ConfigError& e) {
    std::cerr << "gail_lqr: config error: " << e.what() << "\n";
    return 1;
  } catch (const ContractError& e) {
    std::cerr << "gail_lqr: invalid input: " << e.what() << "\n";
    return 1;
  } catch (const InstabilityError& e) {
    std::cerr << "gail_lqr: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "gail_lqr: " << e.what() << "\n";
    return 4;
  }
  return 1;
}
