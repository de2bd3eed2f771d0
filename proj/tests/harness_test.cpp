#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "gail_lqr_tools/config.hpp"
#include "gail_lqr_tools/experiment.hpp"
#include "gail_lqr_tools/instance_io.hpp"

namespace gail_lqr::tools {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path Scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "gail_lqr_harness_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void Spit(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

int Cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(GAIL_LQR_CLI) + " " + args + " > " +
                          log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Fast scalar problem: a = b = 1, box [0.5, 2], gamma = 1.
json FastScalarConfig() {
  return json::parse(R"({
    "instance": {"A": [[1.0]], "B": [[1.0]], "Sigma0": [[1.0]]},
    "expert": {"theta_tilde": {"Q": 1.0, "R": 1.0}},
    "box": {"alpha_Q": 0.5, "beta_Q": 2, "alpha_R": 0.5, "beta_R": 2},
    "regularizer": {"gamma": 1},
    "solver": {"eta": 0.05, "lambda": 0.05, "eps": 1e-12, "max_iter": 100000,
               "K0": [[1.0]], "theta0": {"Q": 1.5, "R": 0.7}},
    "diagnostics": {"lipschitz": {"samples": 50}, "local": {"samples": 10}},
    "seed": 3
  })");
}

TEST(GenerateInstance, ScalarRadius) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const LqrInstance inst = GenerateInstance(1, 1, seed, 0.5);
    EXPECT_NEAR(std::abs(inst.A()(0, 0)), 0.5, 1e-15);
  }
}

TEST(GenerateInstance, SigmaZeroAboveIdentity) {
  for (int d = 1; d <= 5; ++d)
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const LqrInstance inst = GenerateInstance(d, 2, seed, 0.9);
      EXPECT_GE(MinEigenvalue(inst.sigma0()), 1.0 - 1e-12);
      EXPECT_NEAR(SpectralRadius(inst.A()), 0.9, 1e-12);
    }
  const LqrInstance id = GenerateInstance(3, 1, 4, 0.3, {0.1, true});
  EXPECT_EQ(id.sigma0(), Matrix::Identity(3, 3));
}

TEST(GenerateInstance, DeterministicAndRoundTrip) {
  const LqrInstance a = GenerateInstance(4, 2, 77, 1.2);
  const LqrInstance b = GenerateInstance(4, 2, 77, 1.2);
  EXPECT_EQ(InstanceToJson(a).dump(2), InstanceToJson(b).dump(2));
  const LqrInstance back = InstanceFromJson(json::parse(InstanceToJson(a).dump(2)), "x");
  EXPECT_EQ(back.A(), a.A());
  EXPECT_EQ(back.B(), a.B());
  EXPECT_EQ(back.sigma0(), a.sigma0());
}

TEST(Cli, GenIsByteIdenticalAndParsesBack) {
  const fs::path dir = Scratch("gen");
  ASSERT_EQ(Cli("gen -d 3 -k 2 --rho 0.8 --seed 11 --out " + (dir / "a.json").string(),
                dir / "log"), 0);
  ASSERT_EQ(Cli("gen -d 3 -k 2 --rho 0.8 --seed 11 --out " + (dir / "b.json").string(),
                dir / "log"), 0);
  EXPECT_EQ(Slurp(dir / "a.json"), Slurp(dir / "b.json"));
  const LqrInstance inst = ReadInstance(dir / "a.json");
  EXPECT_EQ(InstanceToJson(inst).dump(2) + "\n", Slurp(dir / "a.json"));
  EXPECT_EQ(inst.A(), GenerateInstance(3, 2, 11, 0.8).A());
}

TEST(Config, SyntaxErrorHasLineAndColumn) {
  try {
    ParseJsonText("{\n  \"seed\": 1,\n  \"box\": {\"alpha_Q\" 1}\n}", "cfg.json");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("cfg.json"), std::string::npos) << what;
    EXPECT_NE(what.find("line 3"), std::string::npos) << what;
  }
}

TEST(Config, FieldErrorsNamePath) {
  json j = FastScalarConfig();
  j["box"]["alpha_Q"] = "one";
  try {
    ParseConfig(j);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("box.alpha_Q"), std::string::npos) << e.what();
  }
  j = FastScalarConfig();
  j["solver"]["etaa"] = 1;
  try {
    ParseConfig(j);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("etaa"), std::string::npos) << e.what();
  }
  j = FastScalarConfig();
  j.erase("instance");
  EXPECT_THROW(ParseConfig(j), ConfigError);
  j = FastScalarConfig();
  j["instance"]["B"] = json::parse("[[1.0, 2.0], [3.0]]");
  EXPECT_THROW(ParseConfig(j), ConfigError);
}

TEST(Config, RoundTrip) {
  const ExperimentConfig c = ParseConfig(FastScalarConfig());
  const ExperimentConfig back = ParseConfig(ConfigToJson(c));
  EXPECT_EQ(ConfigToJson(back).dump(), ConfigToJson(c).dump());
  EXPECT_EQ(back.eta, 0.05);
  EXPECT_EQ(back.seed, 3u);
}

TEST(Experiment, PrepareDefaults) {
  json j = FastScalarConfig();
  j["solver"].erase("K0");
  j["solver"].erase("theta0");
  j["solver"]["eta"] = "auto";
  j["solver"]["lambda"] = "auto";
  const Experiment ex = Prepare(ParseConfig(j));
  // rho(A) = 1: the default start is the LQR gain for (I, 10 I).
  EXPECT_LT(SpectralRadius(ex.problem.instance().A() -
                           ex.problem.instance().B() * ex.K0.K()), 1.0);
  EXPECT_EQ(ex.theta0.Q()(0, 0), 1.0);
  ASSERT_TRUE(ex.theta_star.has_value());
  EXPECT_TRUE(ex.auto_stepsizes);
  EXPECT_TRUE(CheckCondition1(ex.constants, ex.eta, ex.lambda).pass);
}

TEST(Experiment, PrepareFillsMissingCenter) {
  ExperimentConfig c;
  c.instance = GenerateInstance(2, 1, 5, 0.3, {0.1, true});
  c.theta_tilde = CostParam(Matrix::Identity(2, 2), Matrix::Identity(1, 1));
  c.box = ThetaBox{0.5, 2, 0.5, 2};
  const Experiment ex = Prepare(c);
  ASSERT_NE(ex.problem.regularizer().center(), nullptr);
  EXPECT_EQ(Distance(*ex.problem.regularizer().center(), *c.theta_tilde), 0.0);
  ASSERT_TRUE(ex.theta_star.has_value());
  EXPECT_GT(ex.eta, 0.0);

  ExperimentConfig no_expert;
  no_expert.instance = c.instance;
  EXPECT_THROW(Prepare(no_expert), ConfigError);
}

TEST(Cli, SolveExitCodes) {
  const fs::path dir = Scratch("exit");
  json j = FastScalarConfig();
  Spit(dir / "ok.json", j.dump());
  ASSERT_EQ(Cli("solve " + (dir / "ok.json").string() + " --out " + (dir / "ok").string(),
                dir / "log"), 0) << Slurp(dir / "log");
  const json summary = json::parse(Slurp(dir / "ok" / "summary.json"));
  EXPECT_TRUE(summary["converged"].get<bool>());
  EXPECT_LE(summary["final_K_error"].get<double>(), 1e-4);

  j["solver"]["max_iter"] = 1;
  Spit(dir / "max.json", j.dump());
  EXPECT_EQ(Cli("solve " + (dir / "max.json").string() + " --out " + (dir / "max").string(),
                dir / "log"), 2);
  std::istringstream rows(Slurp(dir / "max" / "trace.csv"));
  int lines = 0;
  for (std::string l; std::getline(rows, l);) ++lines;
  EXPECT_EQ(lines, 3);  // header + iterates 0 and 1

  j = FastScalarConfig();
  j["solver"]["eta"] = 5.0;
  Spit(dir / "unstable.json", j.dump());
  EXPECT_EQ(Cli("solve " + (dir / "unstable.json").string() + " --out " +
                    (dir / "unstable").string(),
                dir / "log"), 3);
  EXPECT_TRUE(fs::exists(dir / "unstable" / "trace.csv"));
  EXPECT_EQ(json::parse(Slurp(dir / "unstable" / "summary.json"))["status"], "unstable");

  Spit(dir / "broken.json", "{\"instance\": ");
  EXPECT_EQ(Cli("solve " + (dir / "broken.json").string(), dir / "log"), 1);
  EXPECT_NE(Slurp(dir / "log").find("config error"), std::string::npos);
  EXPECT_EQ(Cli("solve " + (dir / "missing.json").string(), dir / "log"), 1);
}

TEST(Cli, RerunsAreByteIdentical) {
  const fs::path dir = Scratch("rerun");
  Spit(dir / "c.json", FastScalarConfig().dump());
  ASSERT_EQ(Cli("solve " + (dir / "c.json").string() + " --out " + (dir / "a").string(),
                dir / "log"), 0);
  ASSERT_EQ(Cli("solve " + (dir / "c.json").string() + " --out " + (dir / "b").string(),
                dir / "log"), 0);
  EXPECT_EQ(Slurp(dir / "a" / "trace.csv"), Slurp(dir / "b" / "trace.csv"));
  EXPECT_EQ(Slurp(dir / "a" / "summary.json"), Slurp(dir / "b" / "summary.json"));
}

TEST(Cli, CheckNamesRatioBound) {
  const fs::path dir = Scratch("check");
  json j = FastScalarConfig();
  j["solver"]["eta"] = 1e-9;
  j["solver"]["lambda"] = 1.0;
  Spit(dir / "c.json", j.dump());
  EXPECT_EQ(Cli("check " + (dir / "c.json").string(), dir / "log"), 5);
  const std::string text = Slurp(dir / "log");
  EXPECT_NE(text.find("condition1: FAIL (binding: lambda_over_eta)"), std::string::npos)
      << text;
  EXPECT_EQ(Cli("check --format json " + (dir / "c.json").string(), dir / "log"), 5);
  const json report = json::parse(Slurp(dir / "log"));
  EXPECT_EQ(report["condition1"]["binding"], "lambda_over_eta");
}

TEST(Cli, ConformingScalarSolveCheckDiag) {
  const fs::path dir = Scratch("scalar");
  const fs::path cfg = fs::path(GAIL_LQR_SOURCE_DIR) / "configs" / "scalar.json";
  ASSERT_EQ(Cli("check " + cfg.string(), dir / "check.txt"), 0) << Slurp(dir / "check.txt");
  ASSERT_EQ(Cli("solve " + cfg.string() + " --out " + (dir / "run").string(), dir / "log"), 0);
  const json summary = json::parse(Slurp(dir / "run" / "summary.json"));
  EXPECT_LE(summary["final_K_error"].get<double>(), 1e-4);
  EXPECT_EQ(summary["potential_violations"], 0);
  EXPECT_EQ(summary["envelope_violations"], 0);
  ASSERT_EQ(Cli("diag " + (dir / "run" / "trace.csv").string() + " " + cfg.string() +
                    " --out " + (dir / "diag.json").string(),
                dir / "log"), 0) << Slurp(dir / "log");
  const json diag = json::parse(Slurp(dir / "diag.json"));
  EXPECT_TRUE(diag["replay_matches_trace"].get<bool>());
  EXPECT_EQ(diag["potential"]["violations"], 0);

  // A tampered trace is detected.
  std::string trace = Slurp(dir / "run" / "trace.csv");
  trace[trace.find('\n') + 3] ^= 1;
  Spit(dir / "tampered.csv", trace);
  EXPECT_EQ(Cli("diag " + (dir / "tampered.csv").string() + " " + cfg.string() +
                    " --out " + (dir / "diag2.json").string(),
                dir / "log"), 6);
}

TEST(Cli, BatchReportsWorstCode) {
  const fs::path dir = Scratch("batch");
  json j = FastScalarConfig();
  Spit(dir / "good.json", j.dump());
  j["solver"]["max_iter"] = 1;
  Spit(dir / "short.json", j.dump());
  EXPECT_EQ(Cli("batch " + (dir / "good.json").string() + " " + (dir / "short.json").string() +
                    " --out " + (dir / "out").string(),
                dir / "log"), 2);
  EXPECT_TRUE(fs::exists(dir / "out" / "good" / "trace.csv"));
  EXPECT_TRUE(fs::exists(dir / "out" / "short" / "summary.json"));
}

}  // namespace
}  // namespace gail_lqr::tools
