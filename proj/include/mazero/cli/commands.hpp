#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mazero/config.hpp"
#include "mazero/envs/bandit.hpp"

namespace mazero::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitVerifyFailed = 2,
  kExitRuntime = 3,
};

/// One invocation: the subcommand, where its configuration comes from and
/// where its artifacts go. Subcommand flags (--steps, --trees, ...) are
/// folded into `overrides` as namespaced keys before resolution.
struct ExperimentManifest {
  std::string subcommand;
  std::string config_path;  // empty: defaults only
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::vector<std::string> overrides;  // "key=value"
};

// Config file, then overrides, then `seed` when given on the command line.
ConfigMap ResolveConfig(const ExperimentManifest& manifest);

// Writes to a sibling temporary and renames it into place.
void WriteFileAtomic(const std::filesystem::path& path, const std::string& content);

// Snapshot of the resolved configuration, written before any computation.
inline constexpr const char* kResolvedConfigName = "config.resolved.cfg";

struct SvgSeries {
  std::string label;
  std::string color;
  std::vector<double> x;
  std::vector<double> y;
};

/// Self-contained SVG line chart with axes, min/max tick labels and a legend.
std::string SvgLineChart(const std::string& title, const std::string& x_label,
                         const std::string& y_label, const std::vector<SvgSeries>& series);

// First curve step at which the chosen value column reaches `threshold`
// for `seed`, or -1.
int StepsToReach(const std::vector<BanditCurvePoint>& points, std::uint64_t seed,
                 double threshold, bool awpo);

inline constexpr double kBanditTargetValue = 90.0;

struct AblationCell {
  const char* name;
  const char* mode;         // search.mode
  const char* policy_loss;  // train.policy_loss
};
inline constexpr AblationCell kAblationCells[] = {{"full", "advantage", "awpo"},
                                                  {"no_oslambda", "q", "awpo"},
                                                  {"no_awpo", "advantage", "bc"},
                                                  {"both_off", "q", "bc"}};

// Each returns an exit code; library errors propagate as mazero::Error.
int CmdBandit(const ExperimentManifest& manifest);
int CmdVerify(const ExperimentManifest& manifest);
int CmdTrain(const ExperimentManifest& manifest);
int CmdEval(const ExperimentManifest& manifest);
int CmdAblate(const ExperimentManifest& manifest);

int Dispatch(const ExperimentManifest& manifest);

// Parses argv, runs the subcommand and maps failures to exit codes.
int Main(int argc, char** argv);

}  // namespace mazero::cli
