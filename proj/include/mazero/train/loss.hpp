#pragma once

#include <vector>

#include "mazero/model/learned_model.hpp"
#include "mazero/nn/tape.hpp"

namespace mazero {

/// Targets for one sampled position t and its K-step window. Masked entries
/// contribute nothing.
struct UnrollSample {
  RowMatrix stacked_obs;                 // N x (depth*F), history ending at t
  std::vector<JointAction> actions;      // a_{t+k}, k = 0..K-1
  std::vector<RowMatrix> future_obs;     // history ending at t+k, k = 1..K
  std::vector<double> reward_targets;    // u_{t+k-1}, k = 1..K
  std::vector<double> reward_mask;
  std::vector<double> value_targets;     // z_{t+k}, k = 0..K
  std::vector<double> value_mask;
  // k = 0..K, per agent, unnormalized weights over that agent's actions.
  std::vector<std::vector<std::vector<double>>> policy_targets;
  std::vector<double> policy_mask;
  std::vector<double> consistency_mask;  // k = 1..K
  double weight = 1.0;                   // importance weight
};

struct TrainBatch {
  int unroll_steps = 5;
  std::vector<UnrollSample> samples;

  void Validate(const ModelConfig& config) const;
};

enum class ScalarLoss { kCategorical, kMse };

struct LossOptions {
  ScalarLoss scalar_loss = ScalarLoss::kCategorical;
  bool stop_grad_consistency = true;
  double reward_weight = 1.0;
  double value_weight = 1.0;
  double consistency_weight = 1.0;
  double policy_weight = 1.0;
};

/// Batch-mean loss. Terms at unroll step k >= 1 are scaled by 1/K; the
/// components add up to `total`.
struct LossResult {
  double total = 0.0;
  double reward = 0.0;
  double value = 0.0;
  double consistency = 0.0;
  double policy = 0.0;
  nn::Gradients grads;
};

LossResult unrolled_loss(const LearnedModel& model, const TrainBatch& batch,
                         const LossOptions& options = {}, bool with_grads = true);

}  // namespace mazero
