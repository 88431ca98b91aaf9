#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "mazero/envs/env.hpp"

namespace mazero {

struct BanditSpec {
  int arms = 100;
  int sampling = 2;  // K_b draws per sampled set

  double value(int arm) const { return static_cast<double>(arm); }
};

/// One-step, single-agent bandit paying value(a). Its tabular form has a
/// start state 0 and a terminal state 1.
class BanditEnv final : public DecPomdpEnv, public TabularDynamics {
 public:
  explicit BanditEnv(BanditSpec spec = {});

  std::string name() const override { return "bandit"; }
  int num_agents() const override { return 1; }
  std::vector<int> action_sizes() const override { return {spec_.arms}; }
  int observation_length() const override { return 1; }
  int horizon() const override { return 1; }
  const TabularDynamics* tabular() const override { return this; }
  std::int64_t StateToken() const override { return done() ? 1 : 0; }

  std::int64_t num_states() const override { return 2; }
  std::int64_t DecodeState(const ObservationHistory&) const override { return 0; }
  TabularStep Transition(std::int64_t state, const JointAction& a) const override;
  bool IsTerminal(std::int64_t state) const override { return state == 1; }

  const BanditSpec& spec() const { return spec_; }

 protected:
  ObservationFrame DoReset(RngStream& rng) override;
  EnvStep DoStep(const JointAction& a, RngStream& rng) override;

 private:
  BanditSpec spec_;
};

/// Probability that the best-valued of k i.i.d. draws from pi is arm a, with
/// values increasing in the arm index.
std::vector<double> bandit_t(std::span<const double> pi, int k);

/// Advantage of each arm standardized by the sample std of 0..arms-1.
std::vector<double> bandit_adv(int arms = 100);

struct BanditLosses {
  double l_bc = 0.0;
  double l_awpo = 0.0;
  std::vector<double> grad_bc;
  std::vector<double> grad_awpo;
};

/// Expected BC and AWPO (alpha = 1) losses over random sampled sets, with the
/// target distribution t held constant. `adv` defaults to bandit_adv().
BanditLosses bandit_expected_losses(std::span<const double> theta_bc,
                                    std::span<const double> theta_awpo, int k,
                                    std::span<const double> adv = {});

struct BanditExperimentConfig {
  int arms = 100;
  int sampling = 2;
  double lr = 0.1;
  int steps = 2000;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  double init_scale = 0.1;  // theta ~ N(0, init_scale^2)

  void Load(const ConfigMap& m);
  void Store(ConfigMap& m) const;
};

struct BanditCurvePoint {
  std::uint64_t seed = 0;
  int step = 0;
  double loss_bc = 0.0;
  double loss_awpo = 0.0;
  double value_bc = 0.0;
  double value_awpo = 0.0;
};

/// Full-gradient descent on both expected losses from a shared init. Row
/// `step` describes the parameters after `step` updates, for step < steps.
std::vector<BanditCurvePoint> bandit_experiment(const BanditExperimentConfig& config);

void WriteBanditCsv(const std::vector<BanditCurvePoint>& points, std::ostream& out);

}  // namespace mazero
