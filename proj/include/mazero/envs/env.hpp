#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "mazero/config.hpp"
#include "mazero/core.hpp"
#include "mazero/model/model.hpp"
#include "mazero/model/tabular_model.hpp"

namespace mazero {

struct EnvStep {
  ObservationFrame obs;
  double reward = 0.0;
  bool done = false;
  bool truncated = false;  // ended by the horizon, not by the environment
};

/// Cooperative environment with a shared team reward. Each instance owns its
/// RngStream; the same seed replays the same episodes.
class DecPomdpEnv {
 public:
  virtual ~DecPomdpEnv() = default;

  virtual std::string name() const = 0;
  virtual int num_agents() const = 0;
  virtual std::vector<int> action_sizes() const = 0;
  virtual int observation_length() const = 0;
  virtual int horizon() const = 0;

  void Seed(RngStream rng) { rng_ = rng; }
  ObservationFrame Reset();
  // Throws kEpisodeDone once the episode has ended.
  EnvStep Step(const JointAction& a);

  bool done() const { return done_; }
  int t() const { return t_; }

  // Ground-truth dynamics, or nullptr if the state space is not enumerable.
  virtual const TabularDynamics* tabular() const { return nullptr; }
  // Token of the current state in tabular() numbering.
  virtual std::int64_t StateToken() const { return 0; }

 protected:
  virtual ObservationFrame DoReset(RngStream& rng) = 0;
  virtual EnvStep DoStep(const JointAction& a, RngStream& rng) = 0;

 private:
  RngStream rng_;
  bool done_ = true;
  int t_ = 0;
};

/// Builds an environment from `env.name` and `env.*` keys.
std::unique_ptr<DecPomdpEnv> MakeEnv(const ConfigMap& spec);
std::vector<std::string> RegisteredEnvs();

}  // namespace mazero
