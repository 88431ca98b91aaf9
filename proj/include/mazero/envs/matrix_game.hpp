#pragma once

#include <cstdint>
#include <vector>

#include "mazero/envs/env.hpp"

namespace mazero {

/// One-shot cooperative game: every agent picks one of m actions and the
/// team receives payoff[joint index].
struct MatrixGameSpec {
  int num_agents = 2;
  int num_actions = 5;
  std::vector<double> payoff;  // row-major over (a_0, ..., a_{N-1})

  std::int64_t JointIndex(const JointAction& a) const;
  JointAction FromIndex(std::int64_t index) const;
  std::int64_t size() const;
  void Validate() const;
};

/// Payoffs drawn i.i.d. uniform on [0, 1).
MatrixGameSpec RandomMatrixGame(int num_agents, int num_actions, RngStream& rng);

class MatrixGameEnv final : public DecPomdpEnv, public TabularDynamics {
 public:
  explicit MatrixGameEnv(MatrixGameSpec spec);

  std::string name() const override { return "matrix"; }
  int num_agents() const override { return spec_.num_agents; }
  std::vector<int> action_sizes() const override;
  int observation_length() const override { return 1; }
  int horizon() const override { return 1; }
  const TabularDynamics* tabular() const override { return this; }
  std::int64_t StateToken() const override { return done() ? 1 : 0; }

  std::int64_t num_states() const override { return 2; }
  std::int64_t DecodeState(const ObservationHistory&) const override { return 0; }
  TabularStep Transition(std::int64_t state, const JointAction& a) const override;
  bool IsTerminal(std::int64_t state) const override { return state == 1; }

  const MatrixGameSpec& spec() const { return spec_; }

 protected:
  ObservationFrame DoReset(RngStream& rng) override;
  EnvStep DoStep(const JointAction& a, RngStream& rng) override;

 private:
  MatrixGameSpec spec_;
};

struct MatrixOptimum {
  JointAction best;
  double payoff = 0.0;
};

/// Exhaustive argmax; the lowest joint index wins ties.
MatrixOptimum matrix_optimal(const MatrixGameSpec& spec);

}  // namespace mazero
