#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <tuple>
#include <vector>

#include "mazero/awpo.hpp"
#include "mazero/config.hpp"
#include "mazero/envs/env.hpp"
#include "mazero/model/learned_model.hpp"
#include "mazero/model/tabular_model.hpp"
#include "mazero/search.hpp"
#include "mazero/train/loss.hpp"
#include "mazero/train/replay.hpp"

namespace mazero {

void LoadSearchConfig(const ConfigMap& m, SearchConfig& c);
void StoreSearchConfig(const SearchConfig& c, ConfigMap& m);

struct TrainerConfig {
  int batch_size = 256;
  int unroll_steps = 5;
  int td_steps = 5;
  double discount = 0.99;
  double lr = 1e-4;
  double lr_final = -1.0;  // linear decay target; negative keeps lr constant
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double priority_exponent = 0.6;
  double is_beta_start = 0.4;
  double is_beta_end = 1.0;
  int min_replay = 300;
  int target_interval = 200;
  double max_grad_norm = 5.0;
  long long training_steps = 1000;
  long long max_env_steps = 50000;
  int episodes_per_iteration = 1;
  int grad_steps_per_iteration = 20;
  int eval_interval = 500;
  int eval_episodes = 32;
  int checkpoint_interval = 0;  // 0 keeps only the final checkpoint
  long long replay_capacity = 100000;
  bool reanalyze = true;
  int reanalyze_simulations = 0;  // 0 reuses search.num_simulations
  double selfplay_temperature = 1.0;
  std::string model_kind = "learned";  // or "tabular"
  bool awpo = true;                    // false trains on omega alone (BC)
  bool awpo_standardize = false;
  LossOptions loss;
  bool wallclock = false;

  void Load(const ConfigMap& m);
  void Store(ConfigMap& m) const;
  void Validate() const;
};

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}
  // Parameters without a gradient entry are left untouched.
  void Step(ModelParams& params, const nn::Gradients& grads);
  long long steps() const { return steps_; }
  void set_lr(double lr) { config_.lr = lr; }
  double lr() const { return config_.lr; }

 private:
  AdamConfig config_;
  long long steps_ = 0;
  std::map<std::string, nn::Matrix> m_, v_;
};

/// Rescales in place when the global norm exceeds max_norm; returns the
/// norm before clipping.
double ClipGradients(nn::Gradients& grads, double max_norm);

enum class EvalMode { kWithSearch, kRawPolicy };
const char* ToString(EvalMode m);

struct EvalStats {
  double mean = 0.0;
  double std = 0.0;
  std::vector<double> returns;
};

/// With-search: run_search and play argmax omega. Raw-policy: each agent
/// plays the argmax of its own policy head, no search or communication.
EvalStats evaluate(const Model& model, DecPomdpEnv& env, EvalMode mode,
                   const SearchConfig& search, int episodes, int stack_depth,
                   const RngStream& rng);

struct MetricsRow {
  long long step = 0;
  long long env_steps = 0;
  double loss_total = 0.0, loss_r = 0.0, loss_v = 0.0, loss_s = 0.0, loss_p = 0.0;
  std::size_t buffer_size = 0;
  std::optional<EvalStats> eval;
  std::optional<double> wallclock_s;
};

void WriteMetricsHeader(std::ostream& out);
void WriteMetricsRow(const MetricsRow& row, std::ostream& out);

struct PositionTarget {
  PolicyTarget policy;
  double value = 0.0;
  bool valid = true;
};

/// Sequential self-play / learner loop over one environment.
class Trainer {
 public:
  Trainer(ConfigMap config, std::uint64_t seed);

  const TrainerConfig& config() const { return config_; }
  const SearchConfig& search_config() const { return search_; }
  const ModelConfig& model_config() const { return model_config_; }
  const ConfigMap& resolved_config() const { return resolved_; }
  bool tabular() const { return config_.model_kind == "tabular"; }

  // Current acting model (learned or tabular).
  const Model& model() const;
  const ModelParams& params() const { return *params_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  long long env_steps() const { return env_steps_; }
  long long gradient_steps() const { return grad_steps_; }
  long long skipped_steps() const { return skipped_steps_; }
  long long dropped_positions() const { return dropped_positions_; }
  long long env_failures() const { return env_failures_; }
  std::uint64_t target_version() const { return target_->version; }

  // Plays one episode with the current model and appends it to the buffer.
  const Episode& SelfPlayEpisode();
  // One sampled batch, loss, clipped Adam update and priority refresh.
  MetricsRow GradientStep();
  void SyncTarget();

  // Search-derived targets at position t of a buffered episode.
  PositionTarget TargetAt(std::size_t episode, int t);
  UnrollSample BuildSample(std::size_t episode, int t, double weight);

  EvalStats Evaluate(EvalMode mode, std::uint64_t round);
  // Parameter version for learned models, gradient steps otherwise.
  std::uint64_t eval_round() const {
    return params_ ? params_->version : static_cast<std::uint64_t>(grad_steps_);
  }

  struct RunOptions {
    std::ostream* metrics = nullptr;
    std::string checkpoint_dir;  // empty disables checkpoints
    std::ostream* log = nullptr;
  };
  // Runs until training_steps gradient steps; self-play stops at
  // max_env_steps. Returns the final with-search evaluation.
  EvalStats Run(const RunOptions& options);

  Checkpoint MakeCheckpoint() const;
  // Replaces the learned parameters (shapes must match) and resyncs the target.
  void SetParams(const ModelParams& params);

  // Search RNG for a buffered position; self-play and reanalysis share it.
  RngStream PositionRng(std::uint64_t episode_id, int t) const;

 private:
  PolicyTarget ToPolicyTarget(const SearchResult& r) const;
  SearchConfig ReanalysisConfig() const;

  ConfigMap resolved_;
  std::uint64_t seed_;
  TrainerConfig config_;
  SearchConfig search_;
  ModelConfig model_config_;
  std::unique_ptr<DecPomdpEnv> env_;
  std::unique_ptr<DecPomdpEnv> eval_env_;
  std::unique_ptr<TabularModel> tabular_model_;
  std::shared_ptr<ModelParams> params_;
  std::shared_ptr<ModelParams> target_;
  std::unique_ptr<LearnedModel> model_;
  std::unique_ptr<LearnedModel> target_model_;
  Adam adam_;
  ReplayBuffer buffer_;
  RngStream sample_rng_;
  std::uint64_t next_episode_id_ = 0;
  long long env_steps_ = 0;
  long long grad_steps_ = 0;
  long long skipped_steps_ = 0;
  long long dropped_positions_ = 0;
  long long env_failures_ = 0;
  std::map<std::pair<std::uint64_t, int>, std::pair<std::uint64_t, PositionTarget>> cache_;
};

}  // namespace mazero
