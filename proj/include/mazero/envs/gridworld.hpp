#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "mazero/envs/env.hpp"

namespace mazero {

/// Two agents on a grid who must stand on goal cells at the same time.
/// Actions: 0 stay, 1 up, 2 down, 3 left, 4 right. Cells may be shared.
struct GridworldSpec {
  int width = 5;
  int height = 5;
  std::vector<std::array<int, 2>> goals{{1, 1}, {3, 3}};  // (x, y)
  int view_radius = 1;
  int horizon = 20;
  double goal_reward = 1.0;
  double step_penalty = 0.01;

  static constexpr int kNumAgents = 2;
  static constexpr int kNumActions = 5;
  static constexpr std::int64_t kMaxStates = 100000;

  int cells() const { return width * height; }
  bool IsGoal(int cell) const;
  // Observation length per agent: 2 coordinates + 3 channels per window cell.
  int ObservationLength() const;
  void Validate() const;
  void Load(const ConfigMap& m);
  void Store(ConfigMap& m) const;
};

class GridworldEnv final : public DecPomdpEnv, public TabularDynamics {
 public:
  explicit GridworldEnv(GridworldSpec spec = {});

  std::string name() const override { return "gridworld"; }
  int num_agents() const override { return GridworldSpec::kNumAgents; }
  std::vector<int> action_sizes() const override;
  int observation_length() const override { return spec_.ObservationLength(); }
  int horizon() const override { return spec_.horizon; }
  const TabularDynamics* tabular() const override { return this; }
  std::int64_t StateToken() const override { return done() ? TerminalToken() : token_; }

  // Tokens: pos0 * cells + pos1; one extra terminal token.
  std::int64_t num_states() const override { return TerminalToken() + 1; }
  std::int64_t DecodeState(const ObservationHistory& obs) const override;
  TabularStep Transition(std::int64_t state, const JointAction& a) const override;
  bool IsTerminal(std::int64_t state) const override { return state == TerminalToken(); }

  std::int64_t TerminalToken() const { return std::int64_t{spec_.cells()} * spec_.cells(); }
  // Stationary observation function of the joint state.
  ObservationFrame Observe(std::int64_t token) const;
  const GridworldSpec& spec() const { return spec_; }

 protected:
  ObservationFrame DoReset(RngStream& rng) override;
  EnvStep DoStep(const JointAction& a, RngStream& rng) override;

 private:
  int Move(int cell, int action) const;

  GridworldSpec spec_;
  std::int64_t token_ = 0;
};

struct GridworldSolution {
  std::vector<double> values;  // per token, terminal = 0
  double discount = 0.99;
  int iterations = 0;
  // Expected undiscounted return of the greedy policy over uniform starts,
  // truncated at the horizon.
  double optimal_return = 0.0;
};

/// Value iteration to a sup-norm change below `tol`; greedy ties go to the
/// lowest joint action.
GridworldSolution gridworld_value_iteration(const GridworldSpec& spec, double discount,
                                            double tol = 1e-10);

/// Greedy joint action of the solved value table at `token`.
JointAction GridworldGreedyAction(const GridworldEnv& env, const GridworldSolution& sol,
                                  std::int64_t token);

}  // namespace mazero
