#include "mazero/cli/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "mazero/oracles/suites.hpp"
#include "mazero/train/trainer.hpp"

namespace mazero::cli {
namespace fs = std::filesystem;

namespace {

std::uint64_t SeedOf(const ConfigMap& cfg, std::uint64_t fallback) {
  std::uint64_t s = fallback;
  cfg.Get("seed", s);
  return s;
}

// Unread keys under the given namespaces, and unread bare keys, are typos.
void RejectUnknown(const ConfigMap& cfg, std::initializer_list<const char*> prefixes) {
  std::string msg;
  for (const std::string& key : cfg.Unconsumed()) {
    bool ours = key.find('.') == std::string::npos;
    for (const char* p : prefixes) ours = ours || key.rfind(p, 0) == 0;
    if (ours) msg += " " + key;
  }
  if (!msg.empty()) Fail(ErrorKind::kUsage, "unknown config keys:" + msg);
}

fs::path PrepareOutput(const ExperimentManifest& m, const ConfigMap& resolved) {
  const fs::path out = m.out_dir.empty() ? fs::path("out") / m.subcommand : fs::path(m.out_dir);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) Fail(ErrorKind::kIo, "cannot create output directory " + out.string() + ": " + ec.message());
  WriteFileAtomic(out / kResolvedConfigName, resolved.ToText());
  return out;
}

std::string EvalCsv(const std::vector<std::pair<EvalMode, EvalStats>>& rows) {
  std::ostringstream out;
  out << "mode,episodes,return_mean,return_std\n";
  for (const auto& [mode, st] : rows) {
    out << ToString(mode) << ',' << st.returns.size() << ',' << FormatDouble(st.mean) << ','
        << FormatDouble(st.std) << '\n';
  }
  return out.str();
}

double Median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string Fixed(double x, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

std::string Tick(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

std::string Escape(const std::string& s) {
  std::string r;
  for (char c : s) {
    switch (c) {
      case '&': r += "&amp;"; break;
      case '<': r += "&lt;"; break;
      case '>': r += "&gt;"; break;
      case '"': r += "&quot;"; break;
      default: r += c;
    }
  }
  return r;
}

}  // namespace

ConfigMap ResolveConfig(const ExperimentManifest& manifest) {
  ConfigMap cfg;
  if (!manifest.config_path.empty()) cfg = ConfigMap::Load(manifest.config_path);
  for (const std::string& pair : manifest.overrides) cfg.SetPair(pair);
  if (manifest.seed) cfg.Set("seed", std::to_string(*manifest.seed));
  return cfg;
}

void WriteFileAtomic(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) Fail(ErrorKind::kIo, "cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) Fail(ErrorKind::kIo, "failed writing " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) Fail(ErrorKind::kIo, "cannot move " + tmp.string() + " into place: " + ec.message());
}

std::string SvgLineChart(const std::string& title, const std::string& x_label,
                         const std::string& y_label, const std::vector<SvgSeries>& series) {
  constexpr double kW = 720, kH = 440, kLeft = 70, kRight = 20, kTop = 40, kBottom = 55;
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  bool any = false;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!any) {
        x0 = x1 = s.x[i];
        y0 = y1 = s.y[i];
        any = true;
      }
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (x1 <= x0) x1 = x0 + 1.0;
  if (y1 <= y0) {
    y0 -= 0.5;
    y1 += 0.5;
  }
  const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return kTop + (1.0 - (y - y0) / (y1 - y0)) * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << Fixed(kW / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
    << Escape(title) << "</text>\n";
  o << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + ph << "\" x2=\"" << kLeft + pw << "\" y2=\""
    << kTop + ph << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\""
    << kTop + ph << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = x0 + (x1 - x0) * i / 4.0, yv = y0 + (y1 - y0) * i / 4.0;
    o << "<text x=\"" << Fixed(px(xv)) << "\" y=\"" << Fixed(kTop + ph + 18)
      << "\" text-anchor=\"middle\">" << Tick(xv) << "</text>\n";
    o << "<text x=\"" << Fixed(kLeft - 6) << "\" y=\"" << Fixed(py(yv) + 4)
      << "\" text-anchor=\"end\">" << Tick(yv) << "</text>\n";
    o << "<line x1=\"" << kLeft << "\" y1=\"" << Fixed(py(yv)) << "\" x2=\"" << kLeft + pw
      << "\" y2=\"" << Fixed(py(yv)) << "\" stroke=\"#ddd\"/>\n";
  }
  o << "<text x=\"" << Fixed(kLeft + pw / 2) << "\" y=\"" << Fixed(kH - 12)
    << "\" text-anchor=\"middle\">" << Escape(x_label) << "</text>\n";
  o << "<text x=\"16\" y=\"" << Fixed(kTop + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
    << Fixed(kTop + ph / 2) << ")\">" << Escape(y_label) << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const SvgSeries& s = series[k];
    o << "<polyline fill=\"none\" stroke=\"" << Escape(s.color) << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      o << (i ? " " : "") << Fixed(px(s.x[i])) << ',' << Fixed(py(s.y[i]));
    }
    o << "\"/>\n";
    const double ly = kTop + 14 + 16.0 * static_cast<double>(k);
    o << "<line x1=\"" << Fixed(kLeft + pw - 120) << "\" y1=\"" << Fixed(ly - 4) << "\" x2=\""
      << Fixed(kLeft + pw - 100) << "\" y2=\"" << Fixed(ly - 4) << "\" stroke=\"" << Escape(s.color)
      << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << Fixed(kLeft + pw - 94) << "\" y=\"" << Fixed(ly) << "\">" << Escape(s.label)
      << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

int StepsToReach(const std::vector<BanditCurvePoint>& points, std::uint64_t seed, double threshold,
                 bool awpo) {
  for (const BanditCurvePoint& p : points) {
    if (p.seed != seed) continue;
    if ((awpo ? p.value_awpo : p.value_bc) >= threshold) return p.step;
  }
  return -1;
}

int CmdBandit(const ExperimentManifest& m) {
  ConfigMap cfg = ResolveConfig(m);
  BanditExperimentConfig bc;
  bc.Load(cfg);
  if (cfg.Has("seed")) {
    // A command-line seed replaces the seed list with consecutive seeds.
    const std::uint64_t first = SeedOf(cfg, 1);
    for (std::size_t i = 0; i < bc.seeds.size(); ++i) bc.seeds[i] = first + i;
  }
  RejectUnknown(cfg, {"bandit."});
  bc.Store(cfg);
  const fs::path out = PrepareOutput(m, cfg);

  const std::vector<BanditCurvePoint> points = bandit_experiment(bc);
  std::ostringstream csv;
  WriteBanditCsv(points, csv);
  WriteFileAtomic(out / "bandit_curves.csv", csv.str());

  std::ostringstream summary;
  summary << "seed,steps_to_target_bc,steps_to_target_awpo\n";
  for (std::uint64_t s : bc.seeds) {
    const int b = StepsToReach(points, s, kBanditTargetValue, false);
    const int a = StepsToReach(points, s, kBanditTargetValue, true);
    summary << s << ',' << b << ',' << a << '\n';
    std::cout << "seed " << s << ": E[value] >= " << kBanditTargetValue << " after " << b
              << " steps (bc), " << a << " steps (awpo)\n";
  }
  WriteFileAtomic(out / "bandit_summary.csv", summary.str());

  std::map<int, std::pair<double, double>> mean;
  for (const BanditCurvePoint& p : points) {
    mean[p.step].first += p.value_bc / static_cast<double>(bc.seeds.size());
    mean[p.step].second += p.value_awpo / static_cast<double>(bc.seeds.size());
  }
  SvgSeries bc_curve{"BC", "#1f77b4", {}, {}}, awpo_curve{"AWPO", "#d62728", {}, {}};
  for (const auto& [step, v] : mean) {
    bc_curve.x.push_back(step);
    bc_curve.y.push_back(v.first);
    awpo_curve.x.push_back(step);
    awpo_curve.y.push_back(v.second);
  }
  WriteFileAtomic(out / "bandit_curves.svg",
                  SvgLineChart("Bandit: expected arm value (mean over seeds)", "gradient step",
                               "E[value]", {bc_curve, awpo_curve}));
  return kExitOk;
}

int CmdVerify(const ExperimentManifest& m) {
  ConfigMap cfg = ResolveConfig(m);
  verify::VerifyOptions o;
  o.seed = SeedOf(cfg, o.seed);
  cfg.Get("verify.trees", o.trees);
  cfg.Get("verify.awpo_instances", o.awpo_instances);
  cfg.Get("verify.gradient_coordinates", o.gradient_coordinates);
  std::string fault = "none";
  cfg.Get("verify.inject_fault", fault);
  if (fault != "none" && fault != "quantile-floor") {
    Fail(ErrorKind::kUsage, "verify.inject_fault must be none or quantile-floor");
  }
  if (o.trees < 1 || o.awpo_instances < 1 || o.gradient_coordinates < 1) {
    Fail(ErrorKind::kUsage, "verify case counts must be positive");
  }
  o.inject_quantile_floor = fault == "quantile-floor";
  RejectUnknown(cfg, {"verify."});
  cfg.Set("seed", std::to_string(o.seed));
  cfg.Set("verify.trees", std::to_string(o.trees));
  cfg.Set("verify.awpo_instances", std::to_string(o.awpo_instances));
  cfg.Set("verify.gradient_coordinates", std::to_string(o.gradient_coordinates));
  cfg.Set("verify.inject_fault", fault);
  const fs::path out = PrepareOutput(m, cfg);

  std::string report;
  bool ok = true;
  for (const verify::SuiteReport& r : verify::RunAll(o)) {
    report += r.ToJson() + "\n";
    ok = ok && r.pass;
    std::cout << (r.pass ? "PASS " : "FAIL ") << r.suite << " cases=" << r.cases
              << " failures=" << r.failures << " max_error=" << Tick(r.max_error)
              << " tolerance=" << Tick(r.tolerance) << '\n';
  }
  WriteFileAtomic(out / "verify_report.jsonl", report);
  return ok ? kExitOk : kExitVerifyFailed;
}

int CmdTrain(const ExperimentManifest& m) {
  ConfigMap cfg = ResolveConfig(m);
  const std::uint64_t seed = SeedOf(cfg, 1);
  RejectUnknown(cfg, {});
  Trainer trainer(cfg, seed);
  const fs::path out = PrepareOutput(m, trainer.resolved_config());

  std::ostringstream metrics;
  Trainer::RunOptions run;
  run.metrics = &metrics;
  run.checkpoint_dir = (out / "checkpoints").string();
  run.log = &std::cerr;
  const EvalStats with_search = trainer.Run(run);
  const EvalStats raw = trainer.Evaluate(EvalMode::kRawPolicy, trainer.eval_round());
  WriteFileAtomic(out / "metrics.csv", metrics.str());
  WriteFileAtomic(out / "final_eval.csv",
                  EvalCsv({{EvalMode::kWithSearch, with_search}, {EvalMode::kRawPolicy, raw}}));
  std::cout << "final eval with_search " << FormatDouble(with_search.mean) << " raw_policy "
            << FormatDouble(raw.mean) << " env_steps " << trainer.env_steps() << '\n';
  return kExitOk;
}

int CmdEval(const ExperimentManifest& m) {
  ConfigMap overrides = ResolveConfig(m);
  std::string path;
  overrides.Get("eval.checkpoint", path);
  if (path.empty()) Fail(ErrorKind::kUsage, "eval needs --checkpoint");
  const bool has_seed = overrides.Has("seed");
  const std::uint64_t cli_seed = SeedOf(overrides, 0);
  RejectUnknown(overrides, {"eval."});

  const Checkpoint ckpt = LoadCheckpoint(path);
  ConfigMap cfg = ckpt.config;
  for (const auto& [k, v] : overrides.values()) {
    if (k.rfind("eval.", 0) != 0) cfg.Set(k, v);
  }
  const std::uint64_t seed = has_seed ? cli_seed : ckpt.seed;
  Trainer trainer(cfg, seed);
  trainer.SetParams(ckpt.params);
  ConfigMap resolved = trainer.resolved_config();
  resolved.Set("eval.checkpoint", path);
  const fs::path out = PrepareOutput(m, resolved);

  // The evaluation round is the parameter version, so evaluating a final
  // checkpoint reproduces the training run's final evaluation.
  const std::uint64_t round = ckpt.params.version;
  const EvalStats with_search = trainer.Evaluate(EvalMode::kWithSearch, round);
  const EvalStats raw = trainer.Evaluate(EvalMode::kRawPolicy, round);
  WriteFileAtomic(out / "eval.csv",
                  EvalCsv({{EvalMode::kWithSearch, with_search}, {EvalMode::kRawPolicy, raw}}));
  std::cout << "with_search " << FormatDouble(with_search.mean) << " raw_policy "
            << FormatDouble(raw.mean) << '\n';
  return kExitOk;
}

int CmdAblate(const ExperimentManifest& m) {
  ConfigMap cfg = ResolveConfig(m);
  const std::uint64_t first = SeedOf(cfg, 1);
  int num_seeds = 3;
  cfg.Get("ablate.seeds", num_seeds);
  if (num_seeds < 1) Fail(ErrorKind::kUsage, "ablate.seeds must be >= 1");
  RejectUnknown(cfg, {"ablate."});

  const auto& cells = kAblationCells;

  // Resolve once up front so that bad keys fail before any training.
  ConfigMap snapshot;
  {
    ConfigMap probe = cfg;
    probe.Set("search.mode", cells[0].mode);
    probe.Set("train.policy_loss", cells[0].policy_loss);
    snapshot = Trainer(probe, first).resolved_config();
  }
  snapshot.Set("seed", std::to_string(first));
  snapshot.Set("ablate.seeds", std::to_string(num_seeds));
  const fs::path out = PrepareOutput(m, snapshot);

  std::ostringstream runs, summary;
  runs << "cell,search_mode,policy_loss,seed,env_steps,grad_steps,return_mean,return_std,"
          "raw_policy_mean\n";
  summary << "cell,search_mode,policy_loss,seeds,median_return,median_raw_policy\n";
  for (const AblationCell& cell : cells) {
    std::vector<double> finals, raws;
    for (int i = 0; i < num_seeds; ++i) {
      const std::uint64_t seed = first + static_cast<std::uint64_t>(i);
      ConfigMap c = cfg;
      c.Set("search.mode", cell.mode);
      c.Set("train.policy_loss", cell.policy_loss);
      Trainer trainer(c, seed);
      const EvalStats fin = trainer.Run({});
      const EvalStats raw = trainer.Evaluate(EvalMode::kRawPolicy, trainer.eval_round());
      finals.push_back(fin.mean);
      raws.push_back(raw.mean);
      runs << cell.name << ',' << cell.mode << ',' << cell.policy_loss << ',' << seed << ','
           << trainer.env_steps() << ',' << trainer.gradient_steps() << ','
           << FormatDouble(fin.mean) << ',' << FormatDouble(fin.std) << ','
           << FormatDouble(raw.mean) << '\n';
      std::cerr << cell.name << " seed " << seed << " return " << FormatDouble(fin.mean) << '\n';
    }
    summary << cell.name << ',' << cell.mode << ',' << cell.policy_loss << ',' << num_seeds << ','
            << FormatDouble(Median(finals)) << ',' << FormatDouble(Median(raws)) << '\n';
  }
  WriteFileAtomic(out / "ablation.csv", runs.str());
  WriteFileAtomic(out / "ablation_summary.csv", summary.str());
  std::cout << summary.str();
  return kExitOk;
}

int Dispatch(const ExperimentManifest& m) {
  if (m.subcommand == "bandit") return CmdBandit(m);
  if (m.subcommand == "verify") return CmdVerify(m);
  if (m.subcommand == "train") return CmdTrain(m);
  if (m.subcommand == "eval") return CmdEval(m);
  if (m.subcommand == "ablate") return CmdAblate(m);
  Fail(ErrorKind::kUsage, "unknown subcommand " + m.subcommand);
}

int Main(int argc, char** argv) {
  CLI::App app{"mazero: sampled multi-agent tree search experiments"};
  app.require_subcommand(1);
  ExperimentManifest m;
  std::uint64_t seed = 0;
  int steps = 0, trees = 0, seeds = 0;
  std::string fault, checkpoint;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", m.config_path, "key = value configuration file")
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "experiment seed");
    sub->add_option("--out", m.out_dir, "output directory (default out/<subcommand>)");
    sub->add_option("--set", m.overrides, "override, key=value (repeatable)");
    return sub;
  };
  CLI::App* bandit = common(app.add_subcommand("bandit", "softmax bandit, BC vs AWPO curves"));
  bandit->add_option("--steps", steps, "gradient steps per seed")->check(CLI::NonNegativeNumber);
  CLI::App* verify = common(app.add_subcommand("verify", "oracle and gradient suites"));
  verify->add_option("--trees", trees, "random trees for the OS(lambda) suite")
      ->check(CLI::PositiveNumber);
  verify->add_option("--inject-fault", fault, "negative control")
      ->check(CLI::IsMember({"none", "quantile-floor"}));
  common(app.add_subcommand("train", "self-play training"));
  CLI::App* eval = common(app.add_subcommand("eval", "evaluate a checkpoint in both modes"));
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  CLI::App* ablate = common(app.add_subcommand("ablate", "2x2 OS(lambda) x AWPO grid"));
  ablate->add_option("--seeds", seeds, "shared seeds per cell")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }
  CLI::App* sub = app.get_subcommands().front();
  m.subcommand = sub->get_name();
  if (sub->count("--seed")) m.seed = seed;
  if (bandit->count("--steps")) m.overrides.push_back("bandit.steps=" + std::to_string(steps));
  if (verify->count("--trees")) m.overrides.push_back("verify.trees=" + std::to_string(trees));
  if (verify->count("--inject-fault")) m.overrides.push_back("verify.inject_fault=" + fault);
  if (eval->count("--checkpoint")) m.overrides.push_back("eval.checkpoint=" + checkpoint);
  if (ablate->count("--seeds")) m.overrides.push_back("ablate.seeds=" + std::to_string(seeds));

  try {
    return Dispatch(m);
  } catch (const Error& e) {
    nlohmann::ordered_json j;
    const std::string kind = ToString(e.kind());
    std::string message = e.what();
    if (message.rfind(kind + ": ", 0) == 0) message.erase(0, kind.size() + 2);
    j["error"] = kind;
    j["message"] = message;
    std::cerr << j.dump() << '\n';
    return e.kind() == ErrorKind::kUsage ? kExitUsage : kExitRuntime;
  } catch (const std::exception& e) {
    nlohmann::ordered_json j;
    j["error"] = "internal";
    j["message"] = e.what();
    std::cerr << j.dump() << '\n';
    return kExitRuntime;
  }
}

}  // namespace mazero::cli
