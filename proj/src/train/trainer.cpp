#include "mazero/train/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>

#include "mazero/envs/gridworld.hpp"

namespace mazero {

void LoadSearchConfig(const ConfigMap& m, SearchConfig& c) {
  m.Get("search.num_sampled_actions", c.num_sampled_actions);
  m.Get("search.num_simulations", c.num_simulations);
  m.Get("search.rho", c.rho);
  m.Get("search.lambda", c.lambda);
  m.Get("search.alpha", c.alpha);
  m.Get("search.discount", c.discount);
  m.Get("search.c1", c.c1);
  m.Get("search.c2", c.c2);
  m.Get("search.temperature", c.temperature);
  if (m.Has("search.mode")) {
    std::string mode;
    m.Get("search.mode", mode);
    try {
      c.mode = ParseSelectionMode(mode);
    } catch (const Error& e) {
      Fail(ErrorKind::kUsage, e.what());
    }
  }
  m.Get("search.enumerate_if_fits", c.enumerate_if_fits);
  m.Get("search.sampling_temperature", c.sampling_temperature);
  m.Get("search.root_dirichlet", c.root_dirichlet);
  m.Get("search.dirichlet_alpha", c.dirichlet_alpha);
  m.Get("search.dirichlet_fraction", c.dirichlet_fraction);
  try {
    c.Validate();
  } catch (const Error& e) {
    Fail(ErrorKind::kUsage, e.what());
  }
}

void StoreSearchConfig(const SearchConfig& c, ConfigMap& m) {
  m.Set("search.num_sampled_actions", std::to_string(c.num_sampled_actions));
  m.Set("search.num_simulations", std::to_string(c.num_simulations));
  m.Set("search.rho", FormatDouble(c.rho));
  m.Set("search.lambda", FormatDouble(c.lambda));
  m.Set("search.alpha", FormatDouble(c.alpha));
  m.Set("search.discount", FormatDouble(c.discount));
  m.Set("search.c1", FormatDouble(c.c1));
  m.Set("search.c2", FormatDouble(c.c2));
  m.Set("search.temperature", FormatDouble(c.temperature));
  m.Set("search.mode", ToString(c.mode));
  m.Set("search.enumerate_if_fits", c.enumerate_if_fits ? "true" : "false");
  m.Set("search.sampling_temperature", FormatDouble(c.sampling_temperature));
  m.Set("search.root_dirichlet", c.root_dirichlet ? "true" : "false");
  m.Set("search.dirichlet_alpha", FormatDouble(c.dirichlet_alpha));
  m.Set("search.dirichlet_fraction", FormatDouble(c.dirichlet_fraction));
}

void TrainerConfig::Load(const ConfigMap& m) {
  m.Get("train.batch_size", batch_size);
  m.Get("train.unroll_steps", unroll_steps);
  m.Get("train.td_steps", td_steps);
  m.Get("train.lr", lr);
  m.Get("train.lr_final", lr_final);
  m.Get("train.adam_beta1", adam_beta1);
  m.Get("train.adam_beta2", adam_beta2);
  m.Get("train.adam_eps", adam_eps);
  m.Get("train.priority_exponent", priority_exponent);
  m.Get("train.is_beta_start", is_beta_start);
  m.Get("train.is_beta_end", is_beta_end);
  m.Get("train.min_replay", min_replay);
  m.Get("train.target_interval", target_interval);
  m.Get("train.max_grad_norm", max_grad_norm);
  m.Get("train.training_steps", training_steps);
  m.Get("train.max_env_steps", max_env_steps);
  m.Get("train.episodes_per_iteration", episodes_per_iteration);
  m.Get("train.grad_steps_per_iteration", grad_steps_per_iteration);
  m.Get("train.eval_interval", eval_interval);
  m.Get("train.eval_episodes", eval_episodes);
  m.Get("train.checkpoint_interval", checkpoint_interval);
  m.Get("train.replay_capacity", replay_capacity);
  m.Get("train.reanalyze", reanalyze);
  m.Get("train.reanalyze_simulations", reanalyze_simulations);
  m.Get("train.selfplay_temperature", selfplay_temperature);
  m.Get("train.model", model_kind);
  std::string policy_loss = awpo ? "awpo" : "bc";
  m.Get("train.policy_loss", policy_loss);
  if (policy_loss != "awpo" && policy_loss != "bc") {
    Fail(ErrorKind::kUsage, "train.policy_loss must be awpo or bc");
  }
  awpo = policy_loss == "awpo";
  m.Get("train.awpo_standardize", awpo_standardize);
  std::string scalar = loss.scalar_loss == ScalarLoss::kCategorical ? "categorical" : "mse";
  m.Get("train.scalar_loss", scalar);
  if (scalar != "categorical" && scalar != "mse") {
    Fail(ErrorKind::kUsage, "train.scalar_loss must be categorical or mse");
  }
  loss.scalar_loss = scalar == "mse" ? ScalarLoss::kMse : ScalarLoss::kCategorical;
  m.Get("train.consistency_stop_grad", loss.stop_grad_consistency);
  m.Get("train.reward_weight", loss.reward_weight);
  m.Get("train.value_weight", loss.value_weight);
  m.Get("train.consistency_weight", loss.consistency_weight);
  m.Get("train.policy_weight", loss.policy_weight);
  m.Get("metrics.wallclock", wallclock);
  Validate();
}

void TrainerConfig::Store(ConfigMap& m) const {
  m.Set("train.batch_size", std::to_string(batch_size));
  m.Set("train.unroll_steps", std::to_string(unroll_steps));
  m.Set("train.td_steps", std::to_string(td_steps));
  m.Set("train.lr", FormatDouble(lr));
  m.Set("train.lr_final", FormatDouble(lr_final));
  m.Set("train.adam_beta1", FormatDouble(adam_beta1));
  m.Set("train.adam_beta2", FormatDouble(adam_beta2));
  m.Set("train.adam_eps", FormatDouble(adam_eps));
  m.Set("train.priority_exponent", FormatDouble(priority_exponent));
  m.Set("train.is_beta_start", FormatDouble(is_beta_start));
  m.Set("train.is_beta_end", FormatDouble(is_beta_end));
  m.Set("train.min_replay", std::to_string(min_replay));
  m.Set("train.target_interval", std::to_string(target_interval));
  m.Set("train.max_grad_norm", FormatDouble(max_grad_norm));
  m.Set("train.training_steps", std::to_string(training_steps));
  m.Set("train.max_env_steps", std::to_string(max_env_steps));
  m.Set("train.episodes_per_iteration", std::to_string(episodes_per_iteration));
  m.Set("train.grad_steps_per_iteration", std::to_string(grad_steps_per_iteration));
  m.Set("train.eval_interval", std::to_string(eval_interval));
  m.Set("train.eval_episodes", std::to_string(eval_episodes));
  m.Set("train.checkpoint_interval", std::to_string(checkpoint_interval));
  m.Set("train.replay_capacity", std::to_string(replay_capacity));
  m.Set("train.reanalyze", reanalyze ? "true" : "false");
  m.Set("train.reanalyze_simulations", std::to_string(reanalyze_simulations));
  m.Set("train.selfplay_temperature", FormatDouble(selfplay_temperature));
  m.Set("train.model", model_kind);
  m.Set("train.policy_loss", awpo ? "awpo" : "bc");
  m.Set("train.awpo_standardize", awpo_standardize ? "true" : "false");
  m.Set("train.scalar_loss", loss.scalar_loss == ScalarLoss::kMse ? "mse" : "categorical");
  m.Set("train.consistency_stop_grad", loss.stop_grad_consistency ? "true" : "false");
  m.Set("train.reward_weight", FormatDouble(loss.reward_weight));
  m.Set("train.value_weight", FormatDouble(loss.value_weight));
  m.Set("train.consistency_weight", FormatDouble(loss.consistency_weight));
  m.Set("train.policy_weight", FormatDouble(loss.policy_weight));
  m.Set("metrics.wallclock", wallclock ? "true" : "false");
}

void TrainerConfig::Validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) Fail(ErrorKind::kUsage, what);
  };
  require(batch_size >= 1, "train.batch_size must be >= 1");
  require(unroll_steps >= 0, "train.unroll_steps must be >= 0");
  require(td_steps >= 0, "train.td_steps must be >= 0");
  require(lr > 0.0, "train.lr must be positive");
  require(priority_exponent >= 0.0, "train.priority_exponent must be >= 0");
  require(is_beta_start >= 0.0 && is_beta_end >= 0.0, "importance exponents must be >= 0");
  require(min_replay >= 1, "train.min_replay must be >= 1");
  require(target_interval >= 1, "train.target_interval must be >= 1");
  require(max_grad_norm > 0.0, "train.max_grad_norm must be positive");
  require(training_steps >= 0 && max_env_steps >= 0, "step budgets must be >= 0");
  require(episodes_per_iteration >= 1 && grad_steps_per_iteration >= 0, "bad interleave ratio");
  require(eval_interval >= 0 && eval_episodes >= 1, "bad evaluation settings");
  require(checkpoint_interval >= 0, "train.checkpoint_interval must be >= 0");
  require(replay_capacity >= 1, "train.replay_capacity must be >= 1");
  require(reanalyze_simulations >= 0, "train.reanalyze_simulations must be >= 0");
  require(selfplay_temperature >= 0.0, "train.selfplay_temperature must be >= 0");
  require(model_kind == "learned" || model_kind == "tabular", "train.model must be learned or tabular");
}

void Adam::Step(ModelParams& params, const nn::Gradients& grads) {
  ++steps_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
  for (const auto& [name, g] : grads) {
    nn::Matrix& p = params.at(name);
    if (g.rows() != p.rows() || g.cols() != p.cols()) {
      Fail(ErrorKind::kDimensionMismatch, "gradient shape mismatch for " + name);
    }
    auto [mit, m_new] = m_.try_emplace(name, nn::Matrix::Zero(p.rows(), p.cols()));
    auto [vit, v_new] = v_.try_emplace(name, nn::Matrix::Zero(p.rows(), p.cols()));
    nn::Matrix& m = mit->second;
    nn::Matrix& v = vit->second;
    m = config_.beta1 * m + (1.0 - config_.beta1) * g;
    v = config_.beta2 * v + (1.0 - config_.beta2) * g.cwiseProduct(g);
    p.array() -= config_.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + config_.eps);
  }
  ++params.version;
}

double ClipGradients(nn::Gradients& grads, double max_norm) {
  const double norm = nn::GlobalNorm(grads);
  if (norm > max_norm) nn::ScaleGradients(grads, max_norm / norm);
  return norm;
}

const char* ToString(EvalMode m) {
  return m == EvalMode::kWithSearch ? "with_search" : "raw_policy";
}

EvalStats evaluate(const Model& model, DecPomdpEnv& env, EvalMode mode,
                   const SearchConfig& search, int episodes, int stack_depth,
                   const RngStream& rng) {
  EvalStats st;
  for (int e = 0; e < episodes; ++e) {
    env.Seed(rng.Split("env").Split(static_cast<std::uint64_t>(e)));
    RngStream search_rng = rng.Split("search").Split(static_cast<std::uint64_t>(e));
    ObservationHistory hist(env.num_agents(), env.observation_length(), stack_depth);
    hist.Reset(env.Reset());
    double ret = 0.0;
    while (!env.done()) {
      JointAction a;
      if (mode == EvalMode::kWithSearch) {
        a = run_search(model, hist, search, search_rng).chosen;
      } else {
        const Prediction p = model.Predict(model.Represent(hist));
        std::vector<int> acts;
        for (const auto& logits : p.policy_logits) {
          acts.push_back(static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin()));
        }
        a = JointAction(std::move(acts));
      }
      const EnvStep s = env.Step(a);
      ret += s.reward;
      if (!s.done) hist.Push(s.obs);
    }
    st.returns.push_back(ret);
  }
  for (double r : st.returns) st.mean += r;
  st.mean /= static_cast<double>(st.returns.size());
  for (double r : st.returns) st.std += (r - st.mean) * (r - st.mean);
  st.std = std::sqrt(st.std / static_cast<double>(st.returns.size()));
  return st;
}

void WriteMetricsHeader(std::ostream& out) {
  out << "step,env_steps,loss_total,loss_r,loss_v,loss_s,loss_p,buffer_size,"
         "eval_return_mean,eval_return_std,wallclock_s\n";
}

void WriteMetricsRow(const MetricsRow& row, std::ostream& out) {
  out << row.step << ',' << row.env_steps << ',' << FormatDouble(row.loss_total) << ','
      << FormatDouble(row.loss_r) << ',' << FormatDouble(row.loss_v) << ','
      << FormatDouble(row.loss_s) << ',' << FormatDouble(row.loss_p) << ',' << row.buffer_size
      << ',';
  if (row.eval) out << FormatDouble(row.eval->mean);
  out << ',';
  if (row.eval) out << FormatDouble(row.eval->std);
  out << ',';
  if (row.wallclock_s) out << FormatDouble(*row.wallclock_s);
  out << '\n';
}

Trainer::Trainer(ConfigMap config, std::uint64_t seed)
    : resolved_(std::move(config)), seed_(seed), buffer_(1) {
  config_.Load(resolved_);
  LoadSearchConfig(resolved_, search_);
  config_.discount = search_.discount;
  env_ = MakeEnv(resolved_);
  eval_env_ = MakeEnv(resolved_);
  const std::vector<int> sizes = env_->action_sizes();
  if (std::adjacent_find(sizes.begin(), sizes.end(), std::not_equal_to<>()) != sizes.end()) {
    Fail(ErrorKind::kUsage, "agents must share one action-space size");
  }
  model_config_.num_agents = env_->num_agents();
  model_config_.action_size = sizes.front();
  model_config_.obs_features = env_->observation_length();
  model_config_.Load(resolved_);
  try {
    model_config_.Validate();
  } catch (const Error& e) {
    Fail(ErrorKind::kUsage, e.what());
  }

  std::vector<std::string> unknown;
  for (const std::string& key : resolved_.Unconsumed()) {
    for (const char* prefix : {"train.", "search.", "model.", "env.", "metrics."}) {
      if (key.rfind(prefix, 0) == 0) unknown.push_back(key);
    }
  }
  if (!unknown.empty()) {
    std::string msg = "unknown config keys:";
    for (const auto& k : unknown) msg += " " + k;
    Fail(ErrorKind::kUsage, msg);
  }

  config_.Store(resolved_);
  StoreSearchConfig(search_, resolved_);
  model_config_.Store(resolved_);
  if (const auto* g = dynamic_cast<const GridworldEnv*>(env_.get())) g->spec().Store(resolved_);
  resolved_.Set("env.name", env_->name());
  resolved_.Set("seed", std::to_string(seed_));

  buffer_ = ReplayBuffer(static_cast<std::size_t>(config_.replay_capacity));
  adam_ = Adam(AdamConfig{config_.lr, config_.adam_beta1, config_.adam_beta2, config_.adam_eps});
  sample_rng_ = RngStream(seed_, 0).Split("replay");

  if (tabular()) {
    if (env_->tabular() == nullptr) Fail(ErrorKind::kUsage, "environment has no tabular model");
    tabular_model_ = std::make_unique<TabularModel>(*env_->tabular());
  } else {
    RngStream init = RngStream(seed_, 0).Split("init");
    params_ = std::make_shared<ModelParams>(InitParams(model_config_, init));
    model_ = std::make_unique<LearnedModel>(model_config_, params_);
    SyncTarget();
  }
}

const Model& Trainer::model() const {
  if (tabular_model_) return *tabular_model_;
  return *model_;
}

void Trainer::SyncTarget() {
  if (!params_) return;
  target_ = std::make_shared<ModelParams>(sync_target(*params_));
  target_model_ = std::make_unique<LearnedModel>(model_config_, target_);
  cache_.clear();
}

RngStream Trainer::PositionRng(std::uint64_t episode_id, int t) const {
  return RngStream(seed_, 0).Split("search").Split(episode_id).Split(static_cast<std::uint64_t>(t));
}

PolicyTarget Trainer::ToPolicyTarget(const SearchResult& r) const {
  PolicyTarget p;
  p.actions = r.actions;
  p.visit_policy = r.visit_policy;
  p.advantages = r.advantages;
  p.alpha = search_.alpha;
  return p;
}

SearchConfig Trainer::ReanalysisConfig() const {
  SearchConfig c = search_;
  if (config_.reanalyze_simulations > 0) c.num_simulations = config_.reanalyze_simulations;
  return c;
}

const Episode& Trainer::SelfPlayEpisode() {
  Episode ep;
  ep.id = next_episode_id_++;
  env_->Seed(RngStream(seed_, 0).Split("selfplay-env").Split(ep.id));
  RngStream act_rng = RngStream(seed_, 0).Split("selfplay-act").Split(ep.id);
  const int depth = model_config_.stack_depth;
  ObservationHistory hist(env_->num_agents(), env_->observation_length(), depth);
  try {
    ObservationFrame obs = env_->Reset();
    hist.Reset(obs);
    ep.observations.push_back(obs);
    while (!env_->done()) {
      RngStream rng = PositionRng(ep.id, ep.length());
      const SearchResult r = run_search(model(), hist, search_, rng);
      const JointAction a = act_from_result(r, config_.selfplay_temperature, act_rng);
      const EnvStep s = env_->Step(a);
      ++env_steps_;
      ep.actions.push_back(a);
      ep.rewards.push_back(s.reward);
      ep.root_values.push_back(r.root_value);
      ep.targets.push_back(ToPolicyTarget(r));
      ep.observations.push_back(s.obs);
      if (s.done) ep.terminal = !s.truncated;
      hist.Push(s.obs);
    }
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kEpisodeDone && e.kind() != ErrorKind::kDimensionMismatch) throw;
    ++env_failures_;
    ep.observations.resize(ep.actions.size() + 1);
  }
  for (int t = 0; t < ep.length(); ++t) {
    const double z = n_step_target(ep.rewards, ep.root_values, t, config_.td_steps, config_.discount);
    ep.priorities.push_back(std::abs(ep.root_values[t] - z) + kPriorityFloor);
  }
  static const Episode kEmpty;
  if (ep.length() == 0) return kEmpty;
  buffer_.Add(std::move(ep));
  return buffer_.episode(buffer_.num_episodes() - 1);
}

PositionTarget Trainer::TargetAt(std::size_t episode, int t) {
  const Episode& ep = buffer_.episode(episode);
  PositionTarget stored{ep.targets[t], ep.root_values[t], true};
  if (!config_.reanalyze || !target_model_) return stored;
  const auto key = std::make_pair(ep.id, t);
  auto it = cache_.find(key);
  if (it != cache_.end() && it->second.first == target_->version) return it->second.second;
  PositionTarget fresh;
  try {
    RngStream rng = PositionRng(ep.id, t);
    const SearchResult r =
        run_search(*target_model_, ep.HistoryAt(t, model_config_.stack_depth), ReanalysisConfig(), rng);
    fresh = {ToPolicyTarget(r), r.root_value, true};
  } catch (const Error&) {
    ++dropped_positions_;
    fresh = stored;
    fresh.valid = false;
  }
  cache_[key] = {target_->version, fresh};
  return fresh;
}

UnrollSample Trainer::BuildSample(std::size_t episode, int t, double weight) {
  const Episode& ep = buffer_.episode(episode);
  const int len = ep.length();
  const int k_max = config_.unroll_steps;
  const int depth = model_config_.stack_depth;
  const int n = model_config_.num_agents;
  const std::vector<int> sizes(n, model_config_.action_size);
  auto value_at = [&](int j) { return TargetAt(episode, j).value; };

  UnrollSample s;
  s.weight = weight;
  s.stacked_obs = ep.HistoryAt(t, depth).Stacked();
  const RowMatrix zeros = RowMatrix::Zero(n, s.stacked_obs.cols());
  for (int k = 1; k <= k_max; ++k) {
    const int j = t + k - 1;
    const bool real = j < len;
    s.actions.push_back(real ? ep.actions[j] : JointAction(std::vector<int>(n, 0)));
    s.reward_targets.push_back(real ? ep.rewards[j] : 0.0);
    s.reward_mask.push_back(real ? 1.0 : 0.0);
    const bool observed = t + k <= len;
    s.future_obs.push_back(observed ? ep.HistoryAt(t + k, depth).Stacked() : zeros);
    s.consistency_mask.push_back(observed ? 1.0 : 0.0);
  }
  for (int k = 0; k <= k_max; ++k) {
    const int j = t + k;
    if (j < len) {
      s.value_targets.push_back(n_step_target(ep.rewards, j, config_.td_steps, config_.discount, value_at));
      s.value_mask.push_back(1.0);
      const PositionTarget target = TargetAt(episode, j);
      if (target.valid) {
        const std::vector<double> w = awpo_weights(
            target.policy, AwpoOptions{config_.awpo_standardize, !config_.awpo});
        s.policy_targets.push_back(MarginalTargets(target.policy.actions, w, sizes));
        s.policy_mask.push_back(1.0);
        continue;
      }
    } else {
      s.value_targets.push_back(0.0);
      s.value_mask.push_back(j == len ? 1.0 : 0.0);
    }
    std::vector<std::vector<double>> empty;
    for (int sz : sizes) empty.emplace_back(sz, 0.0);
    s.policy_targets.push_back(std::move(empty));
    s.policy_mask.push_back(0.0);
  }
  return s;
}

MetricsRow Trainer::GradientStep() {
  if (!model_) Fail(ErrorKind::kInvalidArgument, "gradient step without a learned model");
  const double progress =
      config_.training_steps > 0
          ? std::min(1.0, static_cast<double>(grad_steps_) / static_cast<double>(config_.training_steps))
          : 1.0;
  if (config_.lr_final >= 0.0) {
    adam_.set_lr(config_.lr + (config_.lr_final - config_.lr) * progress);
  }
  const double beta = config_.is_beta_start + (config_.is_beta_end - config_.is_beta_start) * progress;
  const std::vector<ReplaySample> samples =
      buffer_.Sample(config_.batch_size, config_.priority_exponent, beta, sample_rng_);
  TrainBatch batch;
  batch.unroll_steps = config_.unroll_steps;
  for (const ReplaySample& rs : samples) batch.samples.push_back(BuildSample(rs.episode, rs.t, rs.weight));

  MetricsRow row;
  try {
    LossResult loss = unrolled_loss(*model_, batch, config_.loss, true);
    ClipGradients(loss.grads, config_.max_grad_norm);
    adam_.Step(*params_, loss.grads);
    row.loss_total = loss.total;
    row.loss_r = loss.reward;
    row.loss_v = loss.value;
    row.loss_s = loss.consistency;
    row.loss_p = loss.policy;
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kNanDetected) throw;
    ++skipped_steps_;
    row.loss_total = row.loss_r = row.loss_v = row.loss_s = row.loss_p = std::nan("");
  }
  for (const ReplaySample& rs : samples) {
    const Episode& ep = buffer_.episode(rs.episode);
    auto value_at = [&](int j) { return TargetAt(rs.episode, j).value; };
    const double z = n_step_target(ep.rewards, rs.t, config_.td_steps, config_.discount, value_at);
    buffer_.UpdatePriority(rs.episode, rs.t, std::abs(value_at(rs.t) - z) + kPriorityFloor);
  }
  ++grad_steps_;
  if (grad_steps_ % config_.target_interval == 0) SyncTarget();
  row.step = grad_steps_;
  row.env_steps = env_steps_;
  row.buffer_size = buffer_.num_positions();
  return row;
}

EvalStats Trainer::Evaluate(EvalMode mode, std::uint64_t round) {
  return evaluate(model(), *eval_env_, mode, search_, config_.eval_episodes,
                  model_config_.stack_depth, RngStream(seed_, 0).Split("eval").Split(round));
}

Checkpoint Trainer::MakeCheckpoint() const {
  Checkpoint c;
  if (params_) c.params = *params_;
  c.config = resolved_;
  c.seed = seed_;
  return c;
}

void Trainer::SetParams(const ModelParams& params) {
  if (!params_) Fail(ErrorKind::kInvalidArgument, "tabular trainer has no parameters");
  for (auto& [name, m] : params_->tensors) {
    const nn::Matrix& src = params.at(name);
    if (src.rows() != m.rows() || src.cols() != m.cols()) {
      Fail(ErrorKind::kDimensionMismatch, "checkpoint tensor " + name + " has the wrong shape");
    }
    m = src;
  }
  if (params.tensors.size() != params_->tensors.size()) {
    Fail(ErrorKind::kDimensionMismatch, "checkpoint has unexpected tensors");
  }
  params_->version = params.version;
  SyncTarget();
}

EvalStats Trainer::Run(const RunOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  if (options.metrics) WriteMetricsHeader(*options.metrics);
  auto save = [&](const std::string& name) {
    if (options.checkpoint_dir.empty() || tabular()) return;
    std::filesystem::create_directories(options.checkpoint_dir);
    SaveCheckpoint(MakeCheckpoint(), (std::filesystem::path(options.checkpoint_dir) / name).string());
  };
  std::optional<EvalStats> last_eval;
  long long last_eval_step = -1;
  if (!tabular()) {
    for (;;) {
      const bool can_play = env_steps_ < config_.max_env_steps;
      const bool want_grad = grad_steps_ < config_.training_steps;
      if (!want_grad && (config_.training_steps > 0 || !can_play)) break;
      bool played = false;
      for (int e = 0; e < config_.episodes_per_iteration && env_steps_ < config_.max_env_steps; ++e) {
        SelfPlayEpisode();
        played = true;
      }
      if (!want_grad || buffer_.num_positions() < static_cast<std::size_t>(config_.min_replay)) {
        if (!played) break;
        continue;
      }
      if (config_.grad_steps_per_iteration == 0 && !played) break;
      for (int g = 0; g < config_.grad_steps_per_iteration && grad_steps_ < config_.training_steps; ++g) {
        MetricsRow row = GradientStep();
        const bool last = grad_steps_ == config_.training_steps;
        if ((config_.eval_interval > 0 && grad_steps_ % config_.eval_interval == 0) || last) {
          row.eval = Evaluate(EvalMode::kWithSearch, eval_round());
          last_eval = row.eval;
          last_eval_step = grad_steps_;
          if (options.log) {
            *options.log << "step " << grad_steps_ << " env_steps " << env_steps_ << " eval "
                         << FormatDouble(row.eval->mean) << '\n';
          }
        }
        if (config_.wallclock) {
          row.wallclock_s =
              std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        }
        if (options.metrics) WriteMetricsRow(row, *options.metrics);
        if (config_.checkpoint_interval > 0 && grad_steps_ % config_.checkpoint_interval == 0) {
          save("step_" + std::to_string(grad_steps_) + ".ckpt");
        }
      }
    }
  }
  save("final.ckpt");
  if (last_eval && last_eval_step == grad_steps_) return *last_eval;
  return Evaluate(EvalMode::kWithSearch, eval_round());
}

}  // namespace mazero
