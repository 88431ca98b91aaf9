#include "mazero/oracles/suites.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"

#include "mazero/awpo.hpp"
#include "mazero/envs/bandit.hpp"
#include "mazero/model/transforms.hpp"
#include "mazero/oracles/oracles.hpp"
#include "mazero/oslambda.hpp"

namespace mazero::verify {
namespace {

void Record(SuiteReport& r, double error, bool ok) {
  ++r.cases;
  r.max_error = std::max(r.max_error, error);
  if (!ok) {
    ++r.failures;
    r.pass = false;
  }
}

std::vector<double> RandomSimplex(int n, RngStream& rng) {
  std::vector<double> p(n);
  double s = 0.0;
  for (double& x : p) {
    x = 0.05 + rng.Uniform();
    s += x;
  }
  for (double& x : p) x /= s;
  return p;
}

}  // namespace

std::string SuiteReport::ToJson() const {
  nlohmann::ordered_json j;
  j["suite"] = suite;
  j["pass"] = pass;
  j["cases"] = cases;
  j["failures"] = failures;
  j["max_error"] = max_error;
  j["tolerance"] = tolerance;
  if (!detail.empty()) j["detail"] = detail;
  return j.dump();
}

SuiteReport OsLambdaSuite(const VerifyOptions& o) {
  SuiteReport r;
  r.suite = "os_lambda";
  r.tolerance = 1e-9;
  const double discounts[] = {0.5, 0.99};
  const oracle::Fraction rhos[] = {{0, 4}, {2, 4}, {3, 4}};
  const double lambdas[] = {0.5, 0.8, 1.0};
  const QuantileRounding rounding =
      o.inject_quantile_floor ? QuantileRounding::kFloor : QuantileRounding::kCeil;
  RngStream base = RngStream(o.seed, 0).Split("os-lambda");
  for (int i = 0; i < o.trees; ++i) {
    RngStream rng = base.Split(static_cast<std::uint64_t>(i));
    const double gamma = discounts[i % 2];
    const oracle::Fraction rho = rhos[(i / 2) % 3];
    const double lambda = lambdas[(i / 6) % 3];
    const double rho_value = static_cast<double>(rho.num) / rho.den;
    const oracle::ExplicitTree tree = oracle::RandomTree({}, rng);

    // Grow the tree node by node, checking every node at a random midpoint
    // and at the end.
    std::vector<NodeStats> stats(tree.size());
    const int midpoint = 1 + static_cast<int>(rng.UniformInt(static_cast<std::uint64_t>(tree.size())));
    auto check = [&](int count) {
      oracle::ExplicitTree prefix;
      prefix.parent.assign(tree.parent.begin(), tree.parent.begin() + count);
      prefix.value.assign(tree.value.begin(), tree.value.begin() + count);
      prefix.reward.assign(tree.reward.begin(), tree.reward.begin() + count);
      prefix.children.resize(count);
      for (int c = 1; c < count; ++c) prefix.children[prefix.parent[c]].push_back(c);
      for (int s = 0; s < count; ++s) {
        const double v = v_lambda(stats[s], rho_value, lambda, rounding);
        const double want = oracle::BruteVLambda(prefix, s, gamma, rho, lambda);
        Record(r, std::abs(v - want), std::abs(v - want) <= r.tolerance);
        if (s > 0) {
          const double a = optimistic_advantage(tree.reward[s], gamma, v, stats[tree.parent[s]].value);
          const double want_a = oracle::BruteAdvantage(prefix, s, gamma, rho, lambda);
          Record(r, std::abs(a - want_a), std::abs(a - want_a) <= r.tolerance);
        }
      }
    };
    for (int n = 0; n < tree.size(); ++n) {
      InitNodeStats(stats[n], tree.value[n]);
      std::vector<NodeStats*> path;
      std::vector<double> rewards;
      for (int cur = n; cur >= 0; cur = tree.parent[cur]) path.push_back(&stats[cur]);
      std::reverse(path.begin(), path.end());
      std::vector<int> ids;
      for (int cur = n; cur > 0; cur = tree.parent[cur]) ids.push_back(cur);
      std::reverse(ids.begin(), ids.end());
      for (int id : ids) rewards.push_back(tree.reward[id]);
      insert_return(path, rewards, tree.value[n], gamma);
      if (n + 1 == midpoint && midpoint < tree.size()) check(midpoint);
    }
    check(tree.size());
  }
  std::ostringstream d;
  d << o.trees << " trees" << (o.inject_quantile_floor ? ", quantile floor injected" : "");
  r.detail = d.str();
  return r;
}

SuiteReport AwpoKktSuite(const VerifyOptions& o) {
  SuiteReport r;
  r.suite = "awpo_kkt";
  r.tolerance = 1e-8;
  const double alphas[] = {0.5, 1.0, 3.0};
  RngStream base = RngStream(o.seed, 0).Split("awpo-kkt");
  for (int i = 0; i < o.awpo_instances; ++i) {
    RngStream rng = base.Split(static_cast<std::uint64_t>(i));
    const int n = 1 + static_cast<int>(rng.UniformInt(10));
    const std::vector<double> pi = RandomSimplex(n, rng);
    std::vector<double> adv(n);
    for (double& a : adv) a = 6.0 * rng.Uniform() - 3.0;
    const double alpha = alphas[i % 3];
    const EtaStar eta = eta_star(pi, adv, alpha);
    const double res = kkt_residual(eta.eta, pi, adv, alpha);
    Record(r, res, res <= r.tolerance);
  }
  return r;
}

SuiteReport AwpoConstantSuite(const VerifyOptions& o) {
  SuiteReport r;
  r.suite = "awpo_constant_advantage";
  r.tolerance = 0.0;
  RngStream base = RngStream(o.seed, 0).Split("awpo-const");
  for (int i = 0; i < o.awpo_instances; ++i) {
    RngStream rng = base.Split(static_cast<std::uint64_t>(i));
    const int n = 1 + static_cast<int>(rng.UniformInt(10));
    const std::vector<double> pi = RandomSimplex(n, rng);
    const std::vector<double> adv(n, 20.0 * rng.Uniform() - 10.0);
    const EtaStar eta = eta_star(pi, adv, 0.5 + 3.0 * rng.Uniform());
    double err = 0.0;
    for (int a = 0; a < n; ++a) err = std::max(err, std::abs(eta.eta[a] - pi[a]));
    Record(r, err, eta.eta == pi);
  }
  return r;
}

SuiteReport AwpoGradientSuite(const VerifyOptions& o) {
  SuiteReport r;
  r.suite = "awpo_gradient";
  r.tolerance = 1e-5;
  RngStream base = RngStream(o.seed, 0).Split("awpo-grad");
  const int instances = std::max(1, o.awpo_instances / 10);
  for (int i = 0; i < instances; ++i) {
    RngStream rng = base.Split(static_cast<std::uint64_t>(i));
    const int agents = 1 + static_cast<int>(rng.UniformInt(3));
    const int actions = 2 + static_cast<int>(rng.UniformInt(3));
    std::vector<std::vector<double>> logits(agents, std::vector<double>(actions));
    for (auto& l : logits) {
      for (double& x : l) x = 2.0 * rng.Normal();
    }
    std::vector<JointAction> set;
    std::vector<double> w;
    const int k = 1 + static_cast<int>(rng.UniformInt(6));
    for (int j = 0; j < k; ++j) {
      std::vector<int> a(agents);
      for (int& x : a) x = static_cast<int>(rng.UniformInt(static_cast<std::uint64_t>(actions)));
      set.emplace_back(std::move(a));
      w.push_back(rng.Uniform());
    }
    const AwpoLossResult res = awpo_loss(logits, set, w);
    std::vector<double> flat;
    for (const auto& l : logits) flat.insert(flat.end(), l.begin(), l.end());
    auto f = [&](const std::vector<double>& x) {
      std::vector<std::vector<double>> l(agents);
      for (int a = 0; a < agents; ++a) l[a].assign(x.begin() + a * actions, x.begin() + (a + 1) * actions);
      return awpo_loss(l, set, w).loss;
    };
    for (std::size_t c = 0; c < flat.size(); ++c) {
      const double fd = oracle::CentralDifference(f, flat, c, 1e-3);
      const double an = res.grad_logits[c / actions][c % actions];
      const double e = oracle::RelativeError(an, fd, kGradientFloor);
      Record(r, e, e <= r.tolerance);
    }
  }
  return r;
}

SuiteReport BanditGradientSuite(const VerifyOptions& o) {
  SuiteReport r;
  r.suite = "bandit_gradient";
  r.tolerance = 1e-6;
  RngStream rng = RngStream(o.seed, 0).Split("bandit-grad");
  std::vector<double> theta(100);
  for (double& x : theta) x = rng.Normal();
  const BanditLosses l = bandit_expected_losses(theta, theta, 2);
  const std::vector<double> t = bandit_t(Softmax(theta), 2);
  const std::vector<double> adv = bandit_adv(100);
  // t is held constant, so differentiate with t frozen at theta.
  auto loss = [&](const std::vector<double>& x, bool awpo) {
    const std::vector<double> pi = Softmax(x);
    double s = 0.0;
    for (std::size_t a = 0; a < x.size(); ++a) s -= t[a] * (awpo ? std::exp(adv[a]) : 1.0) * std::log(pi[a]);
    return s;
  };
  for (std::size_t c = 0; c < theta.size(); ++c) {
    for (bool awpo : {false, true}) {
      const double fd = oracle::CentralDifference(
          [&](const std::vector<double>& x) { return loss(x, awpo); }, theta, c, 1e-3);
      const double an = awpo ? l.grad_awpo[c] : l.grad_bc[c];
      const double e = oracle::RelativeError(an, fd, kGradientFloor);
      Record(r, e, e <= r.tolerance);
    }
  }
  return r;
}

GradientFixture MakeGradientFixture(std::uint64_t seed, int unroll_steps, int latent_dim) {
  GradientFixture fx;
  ModelConfig& c = fx.config;
  c.num_agents = 2;
  c.action_size = 3;
  c.obs_features = 4;
  c.stack_depth = 2;
  c.latent_dim = latent_dim;
  c.repr_hidden = {16};
  c.dyn_hidden = {16};
  c.reward_hidden = {8};
  c.value_hidden = {8};
  c.policy_hidden = {8};
  c.comm_layers = 2;
  RngStream rng = RngStream(seed, 0).Split("gradient-fixture");
  fx.params = std::make_shared<ModelParams>(InitParams(c, rng));
  fx.batch.unroll_steps = unroll_steps;
  const int width = c.obs_features * c.stack_depth;
  auto random_obs = [&] {
    RowMatrix m(c.num_agents, width);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.Normal();
    return m;
  };
  for (int b = 0; b < 4; ++b) {
    UnrollSample s;
    s.stacked_obs = random_obs();
    s.weight = 0.2 + 0.8 * rng.Uniform();
    const int live = b == 3 ? std::min(unroll_steps, 2) : unroll_steps;  // sample 3 ends early
    for (int k = 1; k <= unroll_steps; ++k) {
      s.actions.push_back(JointAction{static_cast<int>(rng.UniformInt(3)), static_cast<int>(rng.UniformInt(3))});
      s.reward_targets.push_back(4.0 * rng.Uniform() - 2.0);
      s.reward_mask.push_back(k <= live ? 1.0 : 0.0);
      s.future_obs.push_back(random_obs());
      s.consistency_mask.push_back(k <= live ? 1.0 : 0.0);
    }
    for (int k = 0; k <= unroll_steps; ++k) {
      s.value_targets.push_back(4.0 * rng.Uniform() - 2.0);
      s.value_mask.push_back(k <= live ? 1.0 : 0.0);
      std::vector<std::vector<double>> p(c.num_agents, std::vector<double>(c.action_size));
      for (auto& row : p) {
        for (double& x : row) x = rng.Uniform();
      }
      s.policy_targets.push_back(std::move(p));
      s.policy_mask.push_back(b != 3 || k < live ? 1.0 : 0.0);
    }
    fx.batch.samples.push_back(std::move(s));
  }
  return fx;
}

SuiteReport UnrolledGradientSuite(const VerifyOptions& o) {
  SuiteReport r;
  r.suite = "unrolled_loss_gradient";
  r.tolerance = 1e-4;
  GradientFixture fx = MakeGradientFixture(o.seed);
  const LearnedModel model(fx.config, fx.params);
  LossOptions options;
  options.stop_grad_consistency = false;
  const LossResult analytic = unrolled_loss(model, fx.batch, options, true);
  std::vector<std::pair<std::string, Eigen::Index>> coords;
  for (const auto& [name, m] : fx.params->tensors) {
    for (Eigen::Index i = 0; i < m.size(); ++i) coords.emplace_back(name, i);
  }
  RngStream rng = RngStream(o.seed, 0).Split("gradient-coords");
  const double h = 1e-4;
  for (int c = 0; c < o.gradient_coordinates; ++c) {
    const auto& [name, idx] = coords[rng.UniformInt(coords.size())];
    double& x = fx.params->at(name).data()[idx];
    const double x0 = x;
    const double fd = oracle::CentralDifference(
        [&](const std::vector<double>& v) {
          x = v[0];
          return unrolled_loss(model, fx.batch, options, false).total;
        },
        {x0}, 0, h);
    x = x0;
    auto it = analytic.grads.find(name);
    const double an = it == analytic.grads.end() ? 0.0 : it->second.data()[idx];
    const double e = oracle::RelativeError(an, fd, kGradientFloor);
    Record(r, e, e <= r.tolerance);
  }
  r.detail = "K=5, D=16, h=1e-4, five-point stencil";
  return r;
}

SuiteReport TransformSuite(const VerifyOptions&) {
  SuiteReport r;
  r.suite = "transforms";
  r.tolerance = 1e-9;
  for (int i = 0; i <= 20000; ++i) {
    const double x = -100.0 + 0.01 * i;
    const double e = std::abs(value_transform_inv(value_transform(x)) - x);
    Record(r, e, e <= 1e-9);
  }
  const CategoricalSupport sup;
  for (int i = 0; i <= 10000; ++i) {
    const double x = -5.0 + 0.001 * i;
    const double e = std::abs(support_to_scalar(scalar_to_support(x, sup), sup) - x);
    Record(r, e, e <= 1e-12);
  }
  r.detail = "h round trip 1e-9 on [-100,100]; support round trip 1e-12 on [-5,5]";
  return r;
}

std::vector<SuiteReport> RunAll(const VerifyOptions& o) {
  return {OsLambdaSuite(o),       AwpoKktSuite(o),          AwpoConstantSuite(o),
          AwpoGradientSuite(o),   BanditGradientSuite(o),   UnrolledGradientSuite(o),
          TransformSuite(o)};
}

}  // namespace mazero::verify
