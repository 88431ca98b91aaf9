#include "mazero/train/loss.hpp"

#include <cmath>

#include "mazero/model/transforms.hpp"

namespace mazero {
namespace {

nn::Matrix SupportTargets(const std::vector<double>& scalars, const CategoricalSupport& sup) {
  nn::Matrix m(static_cast<Eigen::Index>(scalars.size()), sup.size());
  for (std::size_t b = 0; b < scalars.size(); ++b) {
    const std::vector<double> p = scalar_to_support(value_transform(scalars[b]), sup);
    for (int j = 0; j < sup.size(); ++j) m(static_cast<Eigen::Index>(b), j) = p[j];
  }
  return m;
}

// Categorical cross-entropy against two-hot targets, or squared error of the
// support expectation, both in transformed space.
nn::Var ScalarHeadLoss(nn::Tape& tape, nn::Var logits, const std::vector<double>& targets,
                       const nn::Vector& weights, const CategoricalSupport& sup,
                       ScalarLoss kind) {
  if (kind == ScalarLoss::kCategorical) {
    return tape.SoftmaxCrossEntropy(logits, SupportTargets(targets, sup), weights);
  }
  nn::Matrix centers(sup.size(), 1);
  for (int j = 0; j < sup.size(); ++j) centers(j, 0) = sup.centers()[j];
  nn::Var expectation = tape.MatMulConst(tape.Softmax(logits), centers);
  nn::Matrix t(static_cast<Eigen::Index>(targets.size()), 1);
  for (std::size_t b = 0; b < targets.size(); ++b) t(static_cast<Eigen::Index>(b), 0) = value_transform(targets[b]);
  return tape.SquaredError(expectation, t, weights);
}

}  // namespace

void TrainBatch::Validate(const ModelConfig& config) const {
  const auto k = static_cast<std::size_t>(unroll_steps);
  if (unroll_steps < 0 || samples.empty()) Fail(ErrorKind::kInvalidArgument, "empty train batch");
  const int width = config.obs_features * config.stack_depth;
  for (const UnrollSample& s : samples) {
    auto bad = [](const char* what) { Fail(ErrorKind::kDimensionMismatch, what); };
    if (s.stacked_obs.rows() != config.num_agents || s.stacked_obs.cols() != width) bad("sample observation shape");
    if (s.actions.size() != k || s.future_obs.size() != k || s.reward_targets.size() != k ||
        s.reward_mask.size() != k || s.consistency_mask.size() != k) {
      bad("sample unroll arrays must have K entries");
    }
    if (s.value_targets.size() != k + 1 || s.value_mask.size() != k + 1 ||
        s.policy_targets.size() != k + 1 || s.policy_mask.size() != k + 1) {
      bad("sample target arrays must have K+1 entries");
    }
    for (const auto& per_agent : s.policy_targets) {
      if (per_agent.size() != static_cast<std::size_t>(config.num_agents)) bad("policy target agents");
      for (const auto& w : per_agent) {
        if (w.size() != static_cast<std::size_t>(config.action_size)) bad("policy target width");
      }
    }
    for (const auto& f : s.future_obs) {
      if (f.rows() != config.num_agents || f.cols() != width) bad("future observation shape");
    }
    if (!(s.weight >= 0.0)) bad("importance weight must be nonnegative");
  }
}

LossResult unrolled_loss(const LearnedModel& model, const TrainBatch& batch,
                         const LossOptions& options, bool with_grads) {
  const ModelConfig& cfg = model.config();
  batch.Validate(cfg);
  const int n = cfg.num_agents;
  const int a_size = cfg.action_size;
  const int k_max = batch.unroll_steps;
  const auto b_count = static_cast<Eigen::Index>(batch.samples.size());
  const double inv_b = 1.0 / static_cast<double>(b_count);
  const int width = cfg.obs_features * cfg.stack_depth;

  nn::Tape tape(with_grads);
  std::vector<nn::Var> r_terms, v_terms, s_terms, p_terms;

  RowMatrix obs0(b_count * n, width);
  for (Eigen::Index b = 0; b < b_count; ++b) obs0.middleRows(b * n, n) = batch.samples[b].stacked_obs;
  nn::Var state = model.BuildRepresent(tape, obs0);

  for (int k = 0; k <= k_max; ++k) {
    const double scale = k == 0 ? 1.0 : 1.0 / static_cast<double>(k_max);
    if (k >= 1) {
      std::vector<JointAction> actions;
      std::vector<double> rewards;
      nn::Vector rw(b_count), sw(b_count * n);
      RowMatrix future(b_count * n, width);
      for (Eigen::Index b = 0; b < b_count; ++b) {
        const UnrollSample& s = batch.samples[b];
        actions.push_back(s.actions[k - 1]);
        rewards.push_back(s.reward_targets[k - 1]);
        rw[b] = s.reward_mask[k - 1] * s.weight * scale * inv_b * options.reward_weight;
        const double cw = s.consistency_mask[k - 1] * s.weight * scale * inv_b * options.consistency_weight;
        for (int i = 0; i < n; ++i) sw[b * n + i] = cw;
        future.middleRows(b * n, n) = s.future_obs[k - 1];
      }
      nn::Var onehot = tape.Constant(model.OneHot(actions));
      r_terms.push_back(ScalarHeadLoss(tape, model.BuildRewardLogits(tape, state, onehot), rewards,
                                       rw, model.support(), options.scalar_loss));
      nn::Var comm = model.BuildCommunicate(tape, state, onehot);
      state = model.BuildDynamics(tape, state, onehot, comm);
      if (sw.cwiseAbs().sum() > 0.0) {
        if (options.stop_grad_consistency) {
          nn::Tape target_tape(false);
          const nn::Matrix target = target_tape.value(model.BuildRepresent(target_tape, future));
          s_terms.push_back(tape.SquaredError(state, target, sw));
        } else {
          nn::Var target = model.BuildRepresent(tape, future);
          nn::Var diff = tape.Add(state, tape.Scale(target, -1.0));
          s_terms.push_back(
              tape.SquaredError(diff, nn::Matrix::Zero(b_count * n, cfg.latent_dim), sw));
        }
      }
    }
    std::vector<double> values;
    nn::Vector vw(b_count), pw(b_count * n);
    nn::Matrix policy_targets = nn::Matrix::Zero(b_count * n, a_size);
    for (Eigen::Index b = 0; b < b_count; ++b) {
      const UnrollSample& s = batch.samples[b];
      values.push_back(s.value_targets[k]);
      vw[b] = s.value_mask[k] * s.weight * scale * inv_b * options.value_weight;
      const double w = s.policy_mask[k] * s.weight * scale * inv_b * options.policy_weight;
      for (int i = 0; i < n; ++i) {
        pw[b * n + i] = w;
        for (int j = 0; j < a_size; ++j) policy_targets(b * n + i, j) = s.policy_targets[k][i][j];
      }
    }
    v_terms.push_back(ScalarHeadLoss(tape, model.BuildValueLogits(tape, state), values, vw,
                                     model.support(), options.scalar_loss));
    p_terms.push_back(tape.SoftmaxCrossEntropy(model.BuildPolicyLogits(tape, state), policy_targets, pw));
  }

  LossResult out;
  auto sum = [&](const std::vector<nn::Var>& terms) {
    double s = 0.0;
    for (nn::Var v : terms) s += tape.value(v)(0, 0);
    return s;
  };
  out.reward = sum(r_terms);
  out.value = sum(v_terms);
  out.consistency = sum(s_terms);
  out.policy = sum(p_terms);
  std::vector<nn::Var> all;
  for (const auto* terms : {&r_terms, &v_terms, &s_terms, &p_terms}) {
    all.insert(all.end(), terms->begin(), terms->end());
  }
  nn::Var total = tape.AddScalars(all);
  out.total = tape.value(total)(0, 0);
  if (!std::isfinite(out.total)) {
    const char* part = !std::isfinite(out.reward)        ? "reward"
                       : !std::isfinite(out.value)       ? "value"
                       : !std::isfinite(out.consistency) ? "consistency"
                                                         : "policy";
    Fail(ErrorKind::kNanDetected, std::string("non-finite ") + part + " loss");
  }
  if (with_grads) {
    tape.Backward(total);
    out.grads = tape.ParamGradients();
    CheckGradientsFinite(out.grads);
  }
  return out;
}

}  // namespace mazero
