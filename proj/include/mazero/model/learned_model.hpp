#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "mazero/config.hpp"
#include "mazero/model/model.hpp"
#include "mazero/model/transforms.hpp"
#include "mazero/nn/tape.hpp"

namespace mazero {

struct ModelConfig {
  int num_agents = 2;
  int action_size = 5;
  int obs_features = 1;
  int stack_depth = ObservationHistory::kDefaultDepth;
  int latent_dim = 128;
  std::vector<int> repr_hidden{128, 128};
  std::vector<int> dyn_hidden{128, 128};
  std::vector<int> reward_hidden{32};
  std::vector<int> value_hidden{32};
  std::vector<int> policy_hidden{32};
  int comm_layers = 1;
  bool positional_encoding = true;
  int support_bins = CategoricalSupport::kDefaultBins;
  double support_lo = -5.0;
  double support_hi = 5.0;

  void Load(const ConfigMap& m);
  void Store(ConfigMap& m) const;
  void Validate() const;
};

/// Every learnable tensor of the six model functions, shared by all agents.
struct ModelParams {
  std::map<std::string, nn::Matrix> tensors;
  std::uint64_t version = 0;

  const nn::Matrix& at(const std::string& name) const;
  nn::Matrix& at(const std::string& name);
  std::size_t NumScalars() const;
  bool AllFinite() const;
};

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for affine layers; layer-norm
// gains start at one and offsets at zero.
ModelParams InitParams(const ModelConfig& config, RngStream& rng);

// Delayed target copy.
ModelParams sync_target(const ModelParams& params);

/// Differentiable MLP/attention model. The graph builders below work on row
/// batches where row b*N+i belongs to sample b, agent i.
class LearnedModel final : public Model {
 public:
  LearnedModel(ModelConfig config, std::shared_ptr<const ModelParams> params);

  const ModelConfig& config() const { return config_; }
  const ModelParams& params() const { return *params_; }
  std::shared_ptr<const ModelParams> params_ptr() const { return params_; }
  const CategoricalSupport& support() const { return support_; }

  int num_agents() const override { return config_.num_agents; }
  std::vector<int> action_sizes() const override;
  LatentState Represent(const ObservationHistory& obs) const override;
  Prediction Predict(const LatentState& state) const override;
  ModelTransition Step(const LatentState& state, const JointAction& a) const override;

  // Per-agent communication features for one joint state/action.
  RowMatrix Communication(const LatentState& state, const JointAction& a) const;

  nn::Var BuildRepresent(nn::Tape& tape, const RowMatrix& stacked_rows) const;
  nn::Var BuildCommunicate(nn::Tape& tape, nn::Var states, nn::Var onehot) const;
  nn::Var BuildDynamics(nn::Tape& tape, nn::Var states, nn::Var onehot, nn::Var comm) const;
  nn::Var BuildRewardLogits(nn::Tape& tape, nn::Var states, nn::Var onehot) const;
  nn::Var BuildValueLogits(nn::Tape& tape, nn::Var states) const;
  nn::Var BuildPolicyLogits(nn::Tape& tape, nn::Var states) const;

  // (B*N) x action_size one-hot rows.
  RowMatrix OneHot(const std::vector<JointAction>& actions) const;
  // Softmax over categorical logits, expectation, inverse transform.
  double LogitsToScalar(const nn::Matrix& logits_row) const;

 private:
  struct Layer {
    const nn::Matrix* w = nullptr;
    const nn::Matrix* b = nullptr;
    const nn::Matrix* ln_g = nullptr;
    const nn::Matrix* ln_b = nullptr;
    std::string w_name, b_name, g_name, beta_name;
  };
  struct Mlp {
    std::vector<Layer> hidden;
    Layer out;
  };
  struct Attention {
    Layer q, k, v;
    Layer post_ln;  // only ln fields used; absent for the final layer
  };

  Layer Bind(const std::string& prefix, bool with_ln) const;
  Mlp BindMlp(const std::string& prefix, std::size_t hidden) const;
  nn::Var RunLayer(nn::Tape& tape, const Layer& l, nn::Var x, bool activate) const;
  nn::Var RunMlp(nn::Tape& tape, const Mlp& mlp, nn::Var x) const;

  ModelConfig config_;
  std::shared_ptr<const ModelParams> params_;
  CategoricalSupport support_;

  Layer repr_in_ln_;
  Mlp repr_, dyn_, reward_, value_, policy_;
  Layer comm_enc_;
  std::vector<Attention> comm_layers_;
  const nn::Matrix* comm_pos_ = nullptr;
};

// Names the function block a parameter belongs to ("repr", "comm", ...).
std::string FunctionBlock(const std::string& param_name);

// Throws kNanDetected naming the first block whose gradient is not finite.
void CheckGradientsFinite(const nn::Gradients& grads);

struct Checkpoint {
  ModelParams params;
  ConfigMap config;
  std::uint64_t seed = 0;
};

void SaveCheckpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint LoadCheckpoint(const std::string& path);
std::string SerializeCheckpoint(const Checkpoint& ckpt);
Checkpoint ParseCheckpoint(const std::string& text);

}  // namespace mazero
