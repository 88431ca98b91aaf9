#include "mazero/envs/matrix_game.hpp"

#include <cmath>

namespace mazero {
namespace {
constexpr std::int64_t kMaxJointActions = std::int64_t{1} << 24;
}

std::int64_t MatrixGameSpec::size() const {
  std::int64_t n = 1;
  for (int i = 0; i < num_agents; ++i) {
    n *= num_actions;
    if (n > kMaxJointActions) Fail(ErrorKind::kSizeOverflow, "matrix game payoff tensor too large");
  }
  return n;
}

std::int64_t MatrixGameSpec::JointIndex(const JointAction& a) const {
  if (a.num_agents() != num_agents) Fail(ErrorKind::kDimensionMismatch, "joint action arity");
  std::int64_t idx = 0;
  for (int i = 0; i < num_agents; ++i) {
    if (a[i] < 0 || a[i] >= num_actions) Fail(ErrorKind::kDimensionMismatch, "action out of range");
    idx = idx * num_actions + a[i];
  }
  return idx;
}

JointAction MatrixGameSpec::FromIndex(std::int64_t index) const {
  std::vector<int> a(num_agents);
  for (int i = num_agents - 1; i >= 0; --i) {
    a[i] = static_cast<int>(index % num_actions);
    index /= num_actions;
  }
  return JointAction(std::move(a));
}

void MatrixGameSpec::Validate() const {
  if (num_agents < 1 || num_actions < 1) Fail(ErrorKind::kInvalidArgument, "empty matrix game");
  if (static_cast<std::int64_t>(payoff.size()) != size()) {
    Fail(ErrorKind::kDimensionMismatch, "payoff tensor size does not match the action space");
  }
  for (double p : payoff) {
    if (!std::isfinite(p)) Fail(ErrorKind::kNanDetected, "non-finite payoff");
  }
}

MatrixGameSpec RandomMatrixGame(int num_agents, int num_actions, RngStream& rng) {
  MatrixGameSpec spec;
  spec.num_agents = num_agents;
  spec.num_actions = num_actions;
  spec.payoff.resize(static_cast<std::size_t>(spec.size()));
  for (double& p : spec.payoff) p = rng.Uniform();
  return spec;
}

MatrixGameEnv::MatrixGameEnv(MatrixGameSpec spec) : spec_(std::move(spec)) { spec_.Validate(); }

std::vector<int> MatrixGameEnv::action_sizes() const {
  return std::vector<int>(spec_.num_agents, spec_.num_actions);
}

TabularStep MatrixGameEnv::Transition(std::int64_t state, const JointAction& a) const {
  if (state == 1) return {1, 0.0, true};
  return {1, spec_.payoff[spec_.JointIndex(a)], true};
}

ObservationFrame MatrixGameEnv::DoReset(RngStream&) {
  return ObservationFrame::Ones(spec_.num_agents, 1);
}

EnvStep MatrixGameEnv::DoStep(const JointAction& a, RngStream&) {
  return {ObservationFrame::Ones(spec_.num_agents, 1), spec_.payoff[spec_.JointIndex(a)], true};
}

MatrixOptimum matrix_optimal(const MatrixGameSpec& spec) {
  spec.Validate();
  std::int64_t best = 0;
  for (std::int64_t i = 1; i < spec.size(); ++i) {
    if (spec.payoff[i] > spec.payoff[best]) best = i;
  }
  return {spec.FromIndex(best), spec.payoff[best]};
}

}  // namespace mazero
