#pragma once

#include <span>
#include <vector>

#include "mazero/core.hpp"

namespace mazero {

/// Search output used as the policy-improvement target at one state.
struct PolicyTarget {
  std::vector<JointAction> actions;   // T
  std::vector<double> visit_policy;   // omega over T
  std::vector<double> advantages;     // A over T
  double alpha = 3.0;

  void Validate() const;
};

struct AwpoOptions {
  // Standardize A to zero mean / unit std over T before weighting.
  bool standardize = false;
  // Pure behavior cloning (w = omega); the ablation switch.
  bool disabled = false;
};

/// w(a) = omega(a) * exp((A(a) - max_b A(b)) / alpha).
std::vector<double> awpo_weights(const PolicyTarget& target, const AwpoOptions& options = {});

struct AwpoLossResult {
  double loss = 0.0;
  // d loss / d logits, per agent.
  std::vector<std::vector<double>> grad_logits;
  int clamped = 0;
};

/// -sum_a w(a) log pi(a) with pi(a) = prod_i softmax(logits_i)[a_i].
AwpoLossResult awpo_loss(const std::vector<std::vector<double>>& logits,
                         const std::vector<JointAction>& actions, std::span<const double> weights);

/// Per-agent marginals m_i(b) = sum_{a in T, a_i = b} w(a). The joint loss
/// equals the sum over agents of the cross-entropy against these marginals.
std::vector<std::vector<double>> MarginalTargets(const std::vector<JointAction>& actions,
                                                 std::span<const double> weights,
                                                 const std::vector<int>& action_sizes);

struct EtaStar {
  std::vector<double> eta;
  double normalizer = 1.0;      // Z = sum pi exp(A / alpha)
  double log_normalizer = 0.0;  // log Z, finite even when Z overflows
};

/// eta*(a) = pi(a) exp(A(a)/alpha) / Z.
EtaStar eta_star(std::span<const double> pi_mcts, std::span<const double> advantages, double alpha);

/// max_a |A(a) + alpha log pi(a) - alpha log eta(a) - c*| with c* the mean of
/// the bracket over the common support.
double kkt_residual(std::span<const double> eta, std::span<const double> pi,
                    std::span<const double> advantages, double alpha);

}  // namespace mazero
