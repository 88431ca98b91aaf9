#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mazero/model/model.hpp"

namespace mazero {

struct TabularStep {
  std::int64_t next = 0;
  double reward = 0.0;
  bool terminal = false;
};

// Ground-truth dynamics of an environment with an enumerable state space.
// Terminal states are absorbing with zero reward.
class TabularDynamics {
 public:
  virtual ~TabularDynamics() = default;
  virtual int num_agents() const = 0;
  virtual std::vector<int> action_sizes() const = 0;
  virtual std::int64_t num_states() const = 0;
  virtual std::int64_t DecodeState(const ObservationHistory& obs) const = 0;
  virtual TabularStep Transition(std::int64_t state, const JointAction& a) const = 0;
  virtual bool IsTerminal(std::int64_t state) const = 0;
};

/// Exact model: latents carry the ground-truth state token in every agent row.
/// Policy priors are uniform; the value head is zero unless a table is given.
class TabularModel final : public Model {
 public:
  explicit TabularModel(const TabularDynamics& dynamics,
                        std::optional<std::vector<double>> value_table = std::nullopt);

  int num_agents() const override { return dynamics_.num_agents(); }
  std::vector<int> action_sizes() const override { return dynamics_.action_sizes(); }
  LatentState Represent(const ObservationHistory& obs) const override;
  Prediction Predict(const LatentState& state) const override;
  ModelTransition Step(const LatentState& state, const JointAction& a) const override;

  void SetValueTable(std::optional<std::vector<double>> table);

  static LatentState Encode(std::int64_t token, int num_agents);
  static std::int64_t Token(const LatentState& state);

 private:
  const TabularDynamics& dynamics_;
  std::optional<std::vector<double>> value_table_;
};

}  // namespace mazero
