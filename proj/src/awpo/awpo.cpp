#include "mazero/awpo.hpp"

#include <algorithm>
#include <cmath>

namespace mazero {
namespace {

constexpr double kMinLogProb = -69.0;  // ~log(1e-30)

void RequireFinite(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) Fail(ErrorKind::kNanDetected, std::string("non-finite ") + what);
  }
}

}  // namespace

void PolicyTarget::Validate() const {
  if (actions.size() != visit_policy.size() || actions.size() != advantages.size()) {
    Fail(ErrorKind::kDimensionMismatch, "policy target vectors differ in length");
  }
  if (!(alpha > 0.0)) Fail(ErrorKind::kInvalidArgument, "alpha must be positive");
  RequireFinite(visit_policy, "visit policy");
  RequireFinite(advantages, "advantage");
}

std::vector<double> awpo_weights(const PolicyTarget& target, const AwpoOptions& options) {
  target.Validate();
  std::vector<double> w(target.visit_policy);
  if (options.disabled || w.empty()) return w;
  std::vector<double> adv(target.advantages);
  if (options.standardize && adv.size() > 1) {
    double mean = 0.0;
    for (double a : adv) mean += a;
    mean /= static_cast<double>(adv.size());
    double var = 0.0;
    for (double a : adv) var += (a - mean) * (a - mean);
    const double sd = std::sqrt(var / static_cast<double>(adv.size()));
    for (double& a : adv) a = sd > 0.0 ? (a - mean) / sd : 0.0;
  }
  const double top = *std::max_element(adv.begin(), adv.end());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] *= std::exp((adv[i] - top) / target.alpha);
  return w;
}

AwpoLossResult awpo_loss(const std::vector<std::vector<double>>& logits,
                         const std::vector<JointAction>& actions, std::span<const double> weights) {
  if (actions.size() != weights.size()) {
    Fail(ErrorKind::kDimensionMismatch, "awpo_loss: one weight per action required");
  }
  RequireFinite(weights, "AWPO weight");
  AwpoLossResult out;
  std::vector<std::vector<double>> logp(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    RequireFinite(logits[i], "logit");
    const std::vector<double> p = Softmax(logits[i]);
    const double m = *std::max_element(logits[i].begin(), logits[i].end());
    double z = 0.0;
    for (double l : logits[i]) z += std::exp(l - m);
    const double lse = m + std::log(z);
    logp[i].resize(logits[i].size());
    for (std::size_t j = 0; j < p.size(); ++j) logp[i][j] = logits[i][j] - lse;
    out.grad_logits.emplace_back(p.size(), 0.0);
  }
  for (std::size_t k = 0; k < actions.size(); ++k) {
    const JointAction& a = actions[k];
    if (a.num_agents() != static_cast<int>(logits.size())) {
      Fail(ErrorKind::kDimensionMismatch, "awpo_loss: agent count mismatch");
    }
    const double w = weights[k];
    if (w == 0.0) continue;
    for (int i = 0; i < a.num_agents(); ++i) {
      if (a[i] < 0 || a[i] >= static_cast<int>(logp[i].size())) {
        Fail(ErrorKind::kDimensionMismatch, "awpo_loss: action out of range");
      }
      double lp = logp[i][a[i]];
      if (lp < kMinLogProb) {
        lp = kMinLogProb;
        ++out.clamped;
        out.loss -= w * lp;
        continue;
      }
      out.loss -= w * lp;
      // d(-log softmax_j)/d l_c = p_c - [c == j]
      auto& g = out.grad_logits[i];
      for (std::size_t c = 0; c < g.size(); ++c) g[c] += w * std::exp(logp[i][c]);
      g[a[i]] -= w;
    }
  }
  return out;
}

std::vector<std::vector<double>> MarginalTargets(const std::vector<JointAction>& actions,
                                                 std::span<const double> weights,
                                                 const std::vector<int>& action_sizes) {
  std::vector<std::vector<double>> m;
  for (int s : action_sizes) m.emplace_back(s, 0.0);
  if (actions.size() != weights.size()) {
    Fail(ErrorKind::kDimensionMismatch, "MarginalTargets: one weight per action required");
  }
  for (std::size_t k = 0; k < actions.size(); ++k) {
    if (actions[k].num_agents() != static_cast<int>(m.size())) {
      Fail(ErrorKind::kDimensionMismatch, "MarginalTargets: agent count mismatch");
    }
    for (int i = 0; i < actions[k].num_agents(); ++i) {
      const int b = actions[k][i];
      if (b < 0 || b >= static_cast<int>(m[i].size())) {
        Fail(ErrorKind::kDimensionMismatch, "MarginalTargets: action out of range");
      }
      m[i][b] += weights[k];
    }
  }
  return m;
}

EtaStar eta_star(std::span<const double> pi_mcts, std::span<const double> advantages,
                 double alpha) {
  if (pi_mcts.size() != advantages.size() || pi_mcts.empty()) {
    Fail(ErrorKind::kDimensionMismatch, "eta_star: pi and A must be nonempty and aligned");
  }
  if (!(alpha > 0.0)) Fail(ErrorKind::kInvalidArgument, "alpha must be positive");
  RequireFinite(pi_mcts, "pi");
  RequireFinite(advantages, "advantage");
  const double top = *std::max_element(advantages.begin(), advantages.end());
  EtaStar out;
  out.eta.resize(pi_mcts.size());
  double z = 0.0;
  bool uniform_factor = true;
  for (std::size_t i = 0; i < pi_mcts.size(); ++i) {
    const double e = std::exp((advantages[i] - top) / alpha);
    uniform_factor = uniform_factor && e == 1.0;
    out.eta[i] = pi_mcts[i] * e;
    z += out.eta[i];
  }
  if (!(z > 0.0)) Fail(ErrorKind::kInvalidArgument, "eta_star: pi has no mass");
  out.log_normalizer = std::log(z) + top / alpha;
  out.normalizer = std::exp(out.log_normalizer);
  if (uniform_factor) {
    // exp(A/alpha) is constant on T, so eta* is pi itself.
    std::copy(pi_mcts.begin(), pi_mcts.end(), out.eta.begin());
    return out;
  }
  for (double& x : out.eta) x /= z;
  return out;
}

double kkt_residual(std::span<const double> eta, std::span<const double> pi,
                    std::span<const double> advantages, double alpha) {
  if (eta.size() != pi.size() || eta.size() != advantages.size() || eta.empty()) {
    Fail(ErrorKind::kSupportMismatch, "kkt_residual: eta, pi and A must share one support");
  }
  std::vector<double> g(eta.size());
  for (std::size_t i = 0; i < eta.size(); ++i) {
    if (!(eta[i] > 0.0) || !(pi[i] > 0.0)) {
      Fail(ErrorKind::kSupportMismatch, "kkt_residual: eta and pi must be strictly positive");
    }
    g[i] = advantages[i] + alpha * std::log(pi[i]) - alpha * std::log(eta[i]);
  }
  double c = 0.0;
  for (double x : g) c += x;
  c /= static_cast<double>(g.size());
  double r = 0.0;
  for (double x : g) r = std::max(r, std::abs(x - c));
  return r;
}

}  // namespace mazero
