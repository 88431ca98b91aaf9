// Acceptance suite: one PASS/FAIL line per criterion. Exits 0 unless the suite
// itself breaks, or --strict is given and some criterion fails.
#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mazero/cli/commands.hpp"
#include "mazero/envs/bandit.hpp"
#include "mazero/envs/gridworld.hpp"
#include "mazero/envs/matrix_game.hpp"
#include "mazero/model/tabular_model.hpp"
#include "mazero/oracles/oracles.hpp"
#include "mazero/oracles/suites.hpp"
#include "mazero/train/trainer.hpp"

namespace fs = std::filesystem;
using namespace mazero;

namespace {

using Clock = std::chrono::steady_clock;

double SecondsSince(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string Num(double x, int precision = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", precision, x);
  return buf;
}

double Median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string Join(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : " ") + Num(x);
  return s;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

// Prints result lines and mirrors them to the optional report file.
class Suite {
 public:
  void OpenReport(const std::string& path) {
    if (path.empty()) return;
    report_.open(path, std::ios::trunc);
    if (!report_) throw std::runtime_error("cannot open report file " + path);
  }
  void Line(const std::string& text) {
    std::cout << text << std::endl;
    if (report_.is_open()) report_ << text << std::endl;
  }
  void Report(int id, const std::string& name, const Outcome& o, double seconds) {
    Line(std::string(o.pass ? "PASS" : "FAIL") + " criterion " + std::to_string(id) + " (" + name +
         "): " + o.detail + " [" + Num(seconds, 3) + " s]");
    failures_ += o.pass ? 0 : 1;
  }
  int failures() const { return failures_; }

 private:
  std::ofstream report_;
  int failures_ = 0;
};

// Silences stdout and stderr of library code for the lifetime of the guard.
class Quiet {
 public:
  Quiet() : out_(std::cout.rdbuf(sink_.rdbuf())), err_(std::cerr.rdbuf(sink_.rdbuf())) {}
  ~Quiet() {
    std::cout.rdbuf(out_);
    std::cerr.rdbuf(err_);
  }

 private:
  std::ostringstream sink_;
  std::streambuf* out_;
  std::streambuf* err_;
};

Outcome Bandit(const ConfigMap& cfg, double& seconds) {
  BanditExperimentConfig c;
  c.Load(cfg);
  const auto t0 = Clock::now();
  const std::vector<BanditCurvePoint> pts = bandit_experiment(c);
  seconds = SecondsSince(t0);
  bool ok = c.arms == 100 && c.sampling == 2 && c.lr == 0.1 && c.seeds.size() == 5;
  std::string per_seed;
  for (std::uint64_t s : c.seeds) {
    const int bc = cli::StepsToReach(pts, s, cli::kBanditTargetValue, false);
    const int aw = cli::StepsToReach(pts, s, cli::kBanditTargetValue, true);
    ok = ok && aw >= 0 && (bc < 0 || aw < bc);
    per_seed += " seed" + std::to_string(s) + "=" + std::to_string(aw) + "/" +
                (bc < 0 ? std::string("never") : std::to_string(bc));
  }
  int dominated = 0;
  for (const BanditCurvePoint& p : pts) {
    if (p.step >= 200 && p.value_awpo < p.value_bc) ++dominated;
  }
  ok = ok && dominated == 0 && seconds < 60.0;
  return {ok, "steps to E[value]>=90 awpo/bc:" + per_seed + "; rows from step 200 with awpo<bc: " +
                  std::to_string(dominated) + "; runtime < 60 s"};
}

Outcome SuiteOutcome(const std::vector<verify::SuiteReport>& reports) {
  Outcome o{true, ""};
  for (const auto& r : reports) {
    o.pass = o.pass && r.pass;
    o.detail += (o.detail.empty() ? "" : "; ") + r.suite + " cases=" + std::to_string(r.cases) +
                " max_err=" + Num(r.max_error, 3) + " tol=" + Num(r.tolerance, 3);
  }
  return o;
}

struct PlanningScore {
  int found = 0;
  int optimum_sampled = 0;
  int found_when_sampled = 0;
};

PlanningScore Planning(const SearchConfig& base, int k, int matrices) {
  PlanningScore s;
  SearchConfig cfg = base;
  cfg.num_sampled_actions = k;
  for (int i = 0; i < matrices; ++i) {
    RngStream payoff = RngStream(0, 0).Split("acceptance-matrix").Split(static_cast<std::uint64_t>(i));
    const MatrixGameSpec spec = RandomMatrixGame(2, 5, payoff);
    const MatrixOptimum best = oracle::ReverseScanOptimum(spec);
    MatrixGameEnv env(spec);
    TabularModel model(env);
    RngStream rng = RngStream(0, 0).Split("acceptance-search").Split(static_cast<std::uint64_t>(i));
    const SearchResult r = run_search(model, TabularModel::Encode(0, 2), cfg, rng);
    const bool sampled = std::find(r.actions.begin(), r.actions.end(), best.best) != r.actions.end();
    const bool found = r.chosen == best.best;
    s.found += found;
    s.optimum_sampled += sampled;
    s.found_when_sampled += found && sampled;
  }
  return s;
}

Outcome PlanningCriterion(const ConfigMap& cfg, double& seconds) {
  SearchConfig base;
  LoadSearchConfig(cfg, base);
  const auto t0 = Clock::now();
  const PlanningScore full = Planning(base, 25, 100);
  const PlanningScore sampled = Planning(base, 10, 100);
  seconds = SecondsSince(t0);
  SearchConfig larger = base;
  larger.num_simulations = 2000;
  const PlanningScore diag = Planning(larger, 25, 100);
  const bool ok = base.num_simulations == 200 && full.found >= 95 && sampled.found >= 80 && seconds < 120.0;
  return {ok, "N=" + std::to_string(base.num_simulations) + "; K=25 found " + std::to_string(full.found) +
                  "/100 (need 95); K=10 found " + std::to_string(sampled.found) +
                  "/100 (need 80), optimum in sampled set " + std::to_string(sampled.optimum_sampled) +
                  "/100, found when sampled " + std::to_string(sampled.found_when_sampled) + "/" +
                  std::to_string(sampled.optimum_sampled) + "; diagnostic K=25 at N=2000 found " +
                  std::to_string(diag.found) + "/100"};
}

struct GridRun {
  std::uint64_t seed = 0;
  double final_return = 0.0;
  double raw_return = 0.0;
  double peak = -1e9;
  long long first_reach_env_steps = -1;
  long long env_steps = 0;
  double seconds = 0.0;
};

// Parses the eval column out of the metrics CSV to track peak and first reach.
void ScanMetrics(const std::string& csv, double threshold, GridRun& run) {
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  std::vector<std::string> header;
  {
    std::istringstream h(line);
    std::string col;
    while (std::getline(h, col, ',')) header.push_back(col);
  }
  const auto col = [&](const char* name) {
    return std::find(header.begin(), header.end(), name) - header.begin();
  };
  const auto env_col = col("env_steps"), eval_col = col("eval_return_mean");
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream r(line);
    std::string cell;
    while (std::getline(r, cell, ',')) cells.push_back(cell);
    if (eval_col >= static_cast<long>(cells.size()) || cells[eval_col].empty()) continue;
    const double v = std::stod(cells[eval_col]);
    run.peak = std::max(run.peak, v);
    if (v >= threshold && run.first_reach_env_steps < 0) run.first_reach_env_steps = std::stoll(cells[env_col]);
  }
}

GridRun TrainGridworld(ConfigMap cfg, const cli::AblationCell& cell, std::uint64_t seed,
                       double threshold) {
  cfg.Set("search.mode", cell.mode);
  cfg.Set("train.policy_loss", cell.policy_loss);
  GridRun run;
  run.seed = seed;
  const auto t0 = Clock::now();
  Trainer trainer(cfg, seed);
  std::ostringstream metrics;
  Trainer::RunOptions options;
  options.metrics = &metrics;
  run.final_return = trainer.Run(options).mean;
  run.raw_return = trainer.Evaluate(EvalMode::kRawPolicy, trainer.eval_round()).mean;
  run.env_steps = trainer.env_steps();
  run.seconds = SecondsSince(t0);
  ScanMetrics(metrics.str(), threshold, run);
  std::cout << "  " << cell.name << " seed " << seed << ": final " << Num(run.final_return) << " raw "
            << Num(run.raw_return) << " peak " << Num(run.peak) << " env_steps " << run.env_steps
            << " time " << Num(run.seconds, 3) << " s" << std::endl;
  return run;
}

std::vector<std::string> CsvFiles(const fs::path& dir) {
  std::vector<std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    const std::string ext = e.path().extension().string();
    if (e.is_regular_file() && (ext == ".csv" || ext == ".jsonl")) {
      files.push_back(fs::relative(e.path(), dir).string());
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome Determinism(const fs::path& configs, const fs::path& scratch) {
  const std::vector<std::string> small_learned = {
      "env.name=matrix",          "env.agents=2",
      "env.actions=3",            "model.latent_dim=8",
      "model.stack_depth=1",      "search.num_simulations=8",
      "train.batch_size=4",       "train.min_replay=1",
      "train.training_steps=6",   "train.grad_steps_per_iteration=2",
      "train.eval_interval=3",    "train.eval_episodes=3",
      "train.unroll_steps=2"};
  const std::vector<std::string> short_grid = {
      "train.training_steps=30", "train.min_replay=20", "train.eval_interval=15",
      "train.eval_episodes=4",   "train.batch_size=8",  "search.num_simulations=8"};
  struct Job {
    std::string name;
    cli::ExperimentManifest manifest;
  };
  std::vector<Job> jobs;
  auto add = [&](const std::string& name, const std::string& sub, const std::string& config,
                 std::vector<std::string> overrides) {
    cli::ExperimentManifest m;
    m.subcommand = sub;
    m.config_path = config.empty() ? "" : (configs / config).string();
    m.seed = 3;
    m.overrides = std::move(overrides);
    jobs.push_back({name, m});
  };
  add("bandit", "bandit", "bandit.cfg", {"bandit.steps=300"});
  add("verify", "verify", "",
      {"verify.trees=50", "verify.awpo_instances=50", "verify.gradient_coordinates=20"});
  add("train_matrix", "train", "", small_learned);
  add("train_gridworld", "train", "gridworld.cfg", short_grid);
  std::vector<std::string> tiny_ablate = small_learned;
  tiny_ablate.push_back("ablate.seeds=1");
  add("ablate", "ablate", "", tiny_ablate);

  std::vector<std::string> mismatched;
  int compared = 0;
  for (int pass = 0; pass < 2; ++pass) {
    for (Job& job : jobs) {
      job.manifest.out_dir = (scratch / ("run" + std::to_string(pass)) / job.name).string();
      fs::remove_all(job.manifest.out_dir);
      Quiet quiet;
      cli::Dispatch(job.manifest);
    }
    cli::ExperimentManifest eval;
    eval.subcommand = "eval";
    eval.overrides = {"eval.checkpoint=" +
                      (scratch / ("run" + std::to_string(pass)) / "train_matrix" / "checkpoints" /
                       "final.ckpt").string()};
    eval.out_dir = (scratch / ("run" + std::to_string(pass)) / "eval").string();
    fs::remove_all(eval.out_dir);
    Quiet quiet;
    cli::Dispatch(eval);
  }
  const std::vector<std::string> a = CsvFiles(scratch / "run0"), b = CsvFiles(scratch / "run1");
  if (a != b) mismatched.push_back("file sets differ");
  for (const std::string& f : a) {
    ++compared;
    if (Slurp(scratch / "run0" / f) != Slurp(scratch / "run1" / f)) mismatched.push_back(f);
  }
  std::string detail = std::to_string(compared) +
                       " CSV/JSONL outputs from bandit, verify, train (matrix and gridworld), eval, "
                       "ablate compared byte for byte";
  if (!mismatched.empty()) {
    detail += "; mismatched:";
    for (const auto& m : mismatched) detail += " " + m;
  }
  return {mismatched.empty() && compared >= 10, detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mazero acceptance suite"};
  std::string configs_dir = "configs";
  std::string scratch_dir = (fs::temp_directory_path() / "mazero_acceptance").string();
  std::vector<int> only;
  std::string report_path;
  bool strict = false;
  app.add_option("--configs", configs_dir, "directory with bandit.cfg, gridworld.cfg, matrix_tabular.cfg")
      ->check(CLI::ExistingDirectory);
  app.add_option("--scratch", scratch_dir, "scratch directory for subcommand outputs");
  app.add_option("--only", only, "run only these criteria")->check(CLI::Range(1, 9));
  app.add_option("--report", report_path, "also write the result lines to this file");
  app.add_flag("--strict", strict, "exit 1 when any criterion fails");
  CLI11_PARSE(app, argc, argv);
  const std::set<int> selected(only.begin(), only.end());
  const auto want = [&](int id) { return selected.empty() || selected.count(id) != 0; };
  const fs::path configs(configs_dir);

  Suite suite;
  try {
    suite.OpenReport(report_path);
    if (want(1)) {
      double seconds = 0.0;
      const Outcome o = Bandit(ConfigMap::Load((configs / "bandit.cfg").string()), seconds);
      suite.Report(1, "bandit: AWPO reaches E[value]>=90 before BC", o, seconds);
    }
    if (want(2)) {
      verify::VerifyOptions opt;
      opt.trees = 1000;
      const auto t0 = Clock::now();
      Outcome o = SuiteOutcome({verify::OsLambdaSuite(opt)});
      const double s = SecondsSince(t0);
      o.pass = o.pass && s < 30.0;
      o.detail += "; 1000 trees, runtime < 30 s";
      suite.Report(2, "OS(lambda) incremental vs brute force within 1e-9", o, s);
    }
    if (want(3)) {
      verify::VerifyOptions opt;
      opt.awpo_instances = 1000;
      const auto t0 = Clock::now();
      const Outcome o = SuiteOutcome(
          {verify::AwpoKktSuite(opt), verify::AwpoGradientSuite(opt), verify::AwpoConstantSuite(opt)});
      suite.Report(3, "AWPO closed form, KKT and loss gradient", o, SecondsSince(t0));
    }
    if (want(4)) {
      double seconds = 0.0;
      const Outcome o = PlanningCriterion(ConfigMap::Load((configs / "matrix_tabular.cfg").string()), seconds);
      suite.Report(4, "tabular planning finds the matrix-game optimum", o, seconds);
    }
    if (want(5)) {
      verify::VerifyOptions opt;
      opt.gradient_coordinates = 120;
      const auto t0 = Clock::now();
      const Outcome o = SuiteOutcome({verify::UnrolledGradientSuite(opt)});
      suite.Report(5, "unrolled loss gradient vs central differences", o, SecondsSince(t0));
    }
    if (want(6) || want(7)) {
      const ConfigMap grid = ConfigMap::Load((configs / "gridworld.cfg").string());
      GridworldSpec spec;
      spec.Load(grid);
      const GridworldSolution sol = gridworld_value_iteration(spec, 0.99);
      const double threshold = 0.9 * sol.optimal_return;
      std::cout << "gridworld optimal return " << Num(sol.optimal_return, 6) << ", threshold "
                << Num(threshold, 6) << std::endl;
      const std::uint64_t seeds[] = {1, 2, 3};
      std::vector<GridRun> full, off;
      const auto t_full = Clock::now();
      for (std::uint64_t s : seeds) full.push_back(TrainGridworld(grid, cli::kAblationCells[0], s, threshold));
      const double full_seconds = SecondsSince(t_full);
      std::vector<double> finals, raws, peaks;
      long long max_env = 0;
      for (const GridRun& r : full) {
        finals.push_back(r.final_return);
        raws.push_back(r.raw_return);
        peaks.push_back(r.peak);
        max_env = std::max(max_env, r.env_steps);
      }
      if (want(6)) {
        const double med = Median(finals);
        Outcome o;
        o.pass = med >= threshold && max_env <= 50000 && full_seconds < 1800.0;
        o.detail = "median final eval " + Num(med) + " >= " + Num(threshold) + " (finals " + Join(finals) +
                   "; peaks " + Join(peaks) + "); max env steps " + std::to_string(max_env) +
                   " <= 50000; 3 runs < 1800 s";
        suite.Report(6, "gridworld reaches 90% of optimal return", o, full_seconds);
      }
      if (want(7)) {
        const auto t_off = Clock::now();
        for (std::uint64_t s : seeds) off.push_back(TrainGridworld(grid, cli::kAblationCells[3], s, threshold));
        std::vector<double> off_finals;
        for (const GridRun& r : off) off_finals.push_back(r.final_return);
        const double med_full = Median(finals), med_off = Median(off_finals);
        const double med_search = Median(finals), med_raw = Median(raws);
        Outcome o;
        o.pass = med_full >= med_off && med_search >= med_raw;
        o.detail = "median final full " + Num(med_full) + " >= both_off " + Num(med_off) + " (both_off " +
                   Join(off_finals) + "); with-search " + Num(med_search) + " >= raw policy " +
                   Num(med_raw) + " (raw " + Join(raws) + ")";
        suite.Report(7, "ablation direction and search over raw policy", o,
                     full_seconds + SecondsSince(t_off));
      }
    }
    if (want(8)) {
      const auto t0 = Clock::now();
      const Outcome o = Determinism(configs, fs::path(scratch_dir));
      suite.Report(8, "byte-identical reruns", o, SecondsSince(t0));
    }
    if (want(9)) {
      const auto t0 = Clock::now();
      const Outcome o = SuiteOutcome({verify::TransformSuite({})});
      suite.Report(9, "value transform and two-hot round trips", o, SecondsSince(t0));
    }
  } catch (const std::exception& e) {
    suite.Line(std::string("ERROR acceptance suite aborted: ") + e.what());
    return 2;
  }
  suite.Line(std::to_string(suite.failures()) + " criteria failed");
  return strict && suite.failures() > 0 ? 1 : 0;
}
