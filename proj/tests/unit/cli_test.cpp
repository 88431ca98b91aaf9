#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "mazero/cli/commands.hpp"
#include "mazero/core.hpp"
#include "mazero/envs/matrix_game.hpp"

namespace mazero::cli {
namespace {

namespace fs = std::filesystem;

fs::path FreshDir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mazero_cli_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int Lines(const std::string& s) { return static_cast<int>(std::count(s.begin(), s.end(), '\n')); }

struct ToolResult {
  int code = -1;
  std::string out;
};

// Runs the built tool with stdout captured and stderr discarded.
ToolResult RunTool(const std::string& args) {
  ToolResult r;
  const std::string cmd = std::string(MAZERO_TOOL_PATH) + " " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

const char* kTabularMatrix =
    "--set env.name=matrix --set env.agents=2 --set env.actions=3 --set train.model=tabular "
    "--set search.num_simulations=400 --set train.eval_episodes=2";

TEST(ResolveConfig, FileThenOverridesThenSeed) {
  const fs::path dir = FreshDir("resolve");
  fs::create_directories(dir);
  WriteFileAtomic(dir / "a.cfg", "# comment\ntrain.lr = 0.5\nseed = 3\n");
  ExperimentManifest m;
  m.config_path = (dir / "a.cfg").string();
  m.overrides = {"train.lr=0.25"};
  m.seed = 11;
  const ConfigMap c = ResolveConfig(m);
  double lr = 0.0;
  std::uint64_t seed = 0;
  c.Get("train.lr", lr);
  c.Get("seed", seed);
  EXPECT_EQ(lr, 0.25);
  EXPECT_EQ(seed, 11u);
}

TEST(WriteFileAtomic, ReplacesContentWithoutLeftovers) {
  const fs::path dir = FreshDir("atomic");
  fs::create_directories(dir);
  WriteFileAtomic(dir / "f.txt", "one");
  WriteFileAtomic(dir / "f.txt", "two");
  EXPECT_EQ(Slurp(dir / "f.txt"), "two");
  EXPECT_EQ(std::distance(fs::directory_iterator(dir), fs::directory_iterator{}), 1);
}

TEST(SvgLineChart, ContainsSeriesAndLabels) {
  const std::string svg = SvgLineChart("T", "x", "y",
                                       {{"bc", "#1f77b4", {0, 1, 2}, {0, 5, 9}},
                                        {"awpo", "#d62728", {0, 1, 2}, {0, 8, 9}}});
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
  EXPECT_NE(svg.find("awpo"), std::string::npos);
  EXPECT_EQ(std::count(svg.begin(), svg.end(), '\n') > 0, true);
}

TEST(StepsToReach, FirstCrossingPerSeed) {
  std::vector<BanditCurvePoint> pts;
  for (int s = 0; s < 5; ++s) pts.push_back({1, s, 0, 0, 10.0 * s, 30.0 * s});
  EXPECT_EQ(StepsToReach(pts, 1, 30.0, false), 3);
  EXPECT_EQ(StepsToReach(pts, 1, 30.0, true), 1);
  EXPECT_EQ(StepsToReach(pts, 1, 1000.0, true), -1);
  EXPECT_EQ(StepsToReach(pts, 2, 0.0, true), -1);
}

TEST(Bandit, ZeroStepsWritesHeaderOnly) {
  const fs::path dir = FreshDir("bandit0");
  ExperimentManifest m;
  m.subcommand = "bandit";
  m.out_dir = dir.string();
  m.overrides = {"bandit.steps=0"};
  EXPECT_EQ(Dispatch(m), kExitOk);
  EXPECT_EQ(Lines(Slurp(dir / "bandit_curves.csv")), 1);
  EXPECT_TRUE(fs::exists(dir / kResolvedConfigName));
}

TEST(Bandit, RerunsAreByteIdentical) {
  const fs::path a = FreshDir("banditA"), b = FreshDir("banditB");
  ExperimentManifest m;
  m.subcommand = "bandit";
  m.overrides = {"bandit.steps=50"};
  m.seed = 4;
  m.out_dir = a.string();
  ASSERT_EQ(Dispatch(m), kExitOk);
  m.out_dir = b.string();
  ASSERT_EQ(Dispatch(m), kExitOk);
  for (const char* f : {"bandit_curves.csv", "bandit_summary.csv", "bandit_curves.svg"}) {
    EXPECT_EQ(Slurp(a / f), Slurp(b / f)) << f;
  }
  EXPECT_EQ(Lines(Slurp(a / "bandit_curves.csv")), 1 + 5 * 50);
}

TEST(Verify, ReportHasOneLinePerSuite) {
  const fs::path dir = FreshDir("verify");
  const ToolResult r = RunTool("verify --trees 10 --set verify.awpo_instances=20 --out " + dir.string());
  EXPECT_EQ(r.code, kExitOk) << r.out;
  EXPECT_EQ(Lines(Slurp(dir / "verify_report.jsonl")), 7);
}

TEST(Verify, InjectedFaultFails) {
  const fs::path dir = FreshDir("verify_fault");
  const ToolResult r = RunTool("verify --trees 50 --inject-fault quantile-floor --out " + dir.string());
  EXPECT_EQ(r.code, kExitVerifyFailed);
  EXPECT_NE(r.out.find("FAIL"), std::string::npos);
}

std::string FirstRow(const std::string& csv) {
  const auto a = csv.find('\n') + 1;
  return csv.substr(a, csv.find('\n', a) - a);
}

TEST(Train, TabularMatrixReachesTheOptimum) {
  const fs::path dir = FreshDir("train_tabular");
  const ToolResult t = RunTool(std::string("train ") + kTabularMatrix + " --out " + dir.string());
  ASSERT_EQ(t.code, kExitOk);
  const std::string final_eval = Slurp(dir / "final_eval.csv");
  EXPECT_EQ(final_eval.rfind("mode,episodes,return_mean,return_std\n", 0), 0u);
  ConfigMap m;
  for (const char* kv : {"env.name=matrix", "env.agents=2", "env.actions=3"}) m.SetPair(kv);
  const auto env = MakeEnv(m);
  const double best = matrix_optimal(dynamic_cast<const MatrixGameEnv&>(*env).spec()).payoff;
  EXPECT_EQ(FirstRow(final_eval), "with_search,2," + FormatDouble(best) + ",0");
}

TEST(Train, EvalOfFinalCheckpointReproducesFinalEval) {
  const fs::path dir = FreshDir("train_learned");
  const ToolResult t = RunTool(
      "train --seed 5 --set env.name=matrix --set env.agents=2 --set env.actions=3 "
      "--set model.latent_dim=8 --set model.stack_depth=1 --set search.num_simulations=8 "
      "--set train.batch_size=4 --set train.min_replay=1 --set train.training_steps=4 "
      "--set train.grad_steps_per_iteration=2 --set train.eval_interval=0 "
      "--set train.eval_episodes=3 --set train.unroll_steps=1 --out " + dir.string());
  ASSERT_EQ(t.code, kExitOk);
  const fs::path ckpt = dir / "checkpoints" / "final.ckpt";
  ASSERT_TRUE(fs::exists(ckpt));
  const fs::path edir = FreshDir("eval");
  const ToolResult e = RunTool("eval --checkpoint " + ckpt.string() + " --out " + edir.string());
  ASSERT_EQ(e.code, kExitOk);
  EXPECT_EQ(FirstRow(Slurp(edir / "eval.csv")), FirstRow(Slurp(dir / "final_eval.csv")));
  EXPECT_TRUE(fs::exists(edir / kResolvedConfigName));
}

TEST(ExitCodes, UsageAndRuntime) {
  EXPECT_EQ(RunTool("").code, kExitUsage);
  EXPECT_EQ(RunTool("frobnicate").code, kExitUsage);
  EXPECT_EQ(RunTool("bandit --set bandit.nope=1 --out " + FreshDir("bad").string()).code, kExitUsage);
  EXPECT_EQ(RunTool("bandit --config /nonexistent.cfg").code, kExitUsage);
  EXPECT_EQ(RunTool("eval --checkpoint /nonexistent.ckpt --out " + FreshDir("noc").string()).code,
            kExitRuntime);
}

TEST(ExitCodes, MissingCheckpointIsIoError) {
  ExperimentManifest m;
  m.subcommand = "eval";
  m.out_dir = FreshDir("io").string();
  m.overrides = {"eval.checkpoint=/nonexistent.ckpt"};
  try {
    Dispatch(m);
    FAIL() << "expected kIo";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kIo);
  }
}

}  // namespace
}  // namespace mazero::cli
