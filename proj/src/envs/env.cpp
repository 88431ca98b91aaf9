#include "mazero/envs/env.hpp"

#include "mazero/envs/bandit.hpp"
#include "mazero/envs/gridworld.hpp"
#include "mazero/envs/matrix_game.hpp"

namespace mazero {

ObservationFrame DecPomdpEnv::Reset() {
  done_ = false;
  t_ = 0;
  return DoReset(rng_);
}

EnvStep DecPomdpEnv::Step(const JointAction& a) {
  if (done_) Fail(ErrorKind::kEpisodeDone, name() + ": step after the episode ended");
  CheckJointAction(a, action_sizes());
  EnvStep s = DoStep(a, rng_);
  ++t_;
  if (t_ >= horizon() && !s.done) {
    s.done = true;
    s.truncated = true;
  }
  done_ = s.done;
  return s;
}

std::vector<std::string> RegisteredEnvs() { return {"bandit", "gridworld", "matrix"}; }

std::unique_ptr<DecPomdpEnv> MakeEnv(const ConfigMap& spec) {
  std::string name = "gridworld";
  spec.Get("env.name", name);
  if (name == "bandit") {
    BanditSpec b;
    spec.Get("env.arms", b.arms);
    spec.Get("env.sampling", b.sampling);
    if (b.arms < 1) Fail(ErrorKind::kUsage, "env.arms must be positive");
    return std::make_unique<BanditEnv>(b);
  }
  if (name == "matrix") {
    int agents = 2, actions = 5;
    std::uint64_t payoff_seed = 0;
    spec.Get("env.agents", agents);
    spec.Get("env.actions", actions);
    spec.Get("env.payoff_seed", payoff_seed);
    if (agents < 1 || actions < 1) Fail(ErrorKind::kUsage, "matrix game needs agents and actions");
    RngStream rng(payoff_seed, 0);
    return std::make_unique<MatrixGameEnv>(RandomMatrixGame(agents, actions, rng));
  }
  if (name == "gridworld") {
    GridworldSpec g;
    g.Load(spec);
    return std::make_unique<GridworldEnv>(g);
  }
  Fail(ErrorKind::kUsage, "unknown environment '" + name + "'");
}

}  // namespace mazero
