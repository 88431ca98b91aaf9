#include "mazero/model/tabular_model.hpp"

#include <cmath>

namespace mazero {

TabularModel::TabularModel(const TabularDynamics& dynamics,
                           std::optional<std::vector<double>> value_table)
    : dynamics_(dynamics) {
  SetValueTable(std::move(value_table));
}

void TabularModel::SetValueTable(std::optional<std::vector<double>> table) {
  if (table && static_cast<std::int64_t>(table->size()) != dynamics_.num_states()) {
    Fail(ErrorKind::kDimensionMismatch, "value table size does not match state count");
  }
  value_table_ = std::move(table);
}

LatentState TabularModel::Encode(std::int64_t token, int num_agents) {
  LatentState s;
  s.agents = RowMatrix::Constant(num_agents, 1, static_cast<double>(token));
  return s;
}

std::int64_t TabularModel::Token(const LatentState& state) {
  if (state.agents.cols() != 1 || state.agents.rows() < 1) {
    Fail(ErrorKind::kDimensionMismatch, "not a tabular latent state");
  }
  return static_cast<std::int64_t>(std::llround(state.agents(0, 0)));
}

LatentState TabularModel::Represent(const ObservationHistory& obs) const {
  return Encode(dynamics_.DecodeState(obs), num_agents());
}

Prediction TabularModel::Predict(const LatentState& state) const {
  const std::int64_t s = Token(state);
  Prediction p;
  if (value_table_ && !dynamics_.IsTerminal(s)) p.value = (*value_table_)[s];
  for (int m : action_sizes()) p.policy_logits.emplace_back(m, 0.0);
  return p;
}

ModelTransition TabularModel::Step(const LatentState& state, const JointAction& a) const {
  CheckJointAction(a, action_sizes());
  const std::int64_t s = Token(state);
  ModelTransition t;
  if (dynamics_.IsTerminal(s)) {
    t.next = state;
    return t;
  }
  const TabularStep step = dynamics_.Transition(s, a);
  t.next = Encode(step.next, num_agents());
  t.reward = step.reward;
  return t;
}

}  // namespace mazero
