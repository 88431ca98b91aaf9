#include "mazero/search.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

#include "mazero/config.hpp"

namespace mazero {
namespace {

std::vector<double> SamplingDistribution(std::span<const double> p, double temperature) {
  std::vector<double> beta(p.begin(), p.end());
  if (temperature == 1.0) return beta;
  double z = 0.0;
  for (double& x : beta) {
    x = x > 0.0 ? std::pow(x, 1.0 / temperature) : 0.0;
    z += x;
  }
  for (double& x : beta) x /= z;
  return beta;
}

void CheckFinite(const Prediction& p, const char* where) {
  bool ok = std::isfinite(p.value);
  for (const auto& l : p.policy_logits) {
    for (double x : l) ok = ok && std::isfinite(x);
  }
  if (!ok) Fail(ErrorKind::kModelFailure, std::string("non-finite prediction at ") + where);
}

PolicyDistribution RootPrior(const Prediction& pred, const SearchConfig& config, RngStream& rng) {
  PolicyDistribution prior = PolicyDistribution::FromLogits(pred.policy_logits);
  if (!config.root_dirichlet) return prior;
  for (auto& p : prior.per_agent) {
    std::vector<double> noise(p.size());
    double z = 0.0;
    for (double& x : noise) {
      x = rng.Gamma(config.dirichlet_alpha);
      z += x;
    }
    for (std::size_t j = 0; j < p.size(); ++j) {
      p[j] = (1.0 - config.dirichlet_fraction) * p[j] + config.dirichlet_fraction * noise[j] / z;
    }
  }
  return prior;
}

}  // namespace

SampledActions sample_action_set(const PolicyDistribution& prior, int k, RngStream& rng,
                                 const SearchConfig& config) {
  if (k < 1) Fail(ErrorKind::kInvalidArgument, "sample_action_set needs K >= 1");
  if (prior.num_agents() < 1) Fail(ErrorKind::kInvalidArgument, "prior has no agents");
  std::vector<std::vector<double>> beta;
  for (const auto& p : prior.per_agent) beta.push_back(SamplingDistribution(p, config.sampling_temperature));

  SampledActions out;
  auto joint_beta = [&](const JointAction& a) {
    double b = 1.0;
    for (int i = 0; i < a.num_agents(); ++i) b *= beta[i][a[i]];
    return b;
  };

  if (config.enumerate_if_fits && prior.joint_size() <= k) {
    // Odometer over each agent's support, lexicographic.
    std::vector<std::vector<int>> support(beta.size());
    for (std::size_t i = 0; i < beta.size(); ++i) {
      for (std::size_t j = 0; j < beta[i].size(); ++j) {
        if (beta[i][j] > 0.0) support[i].push_back(static_cast<int>(j));
      }
    }
    std::vector<std::size_t> idx(beta.size(), 0);
    for (;;) {
      JointAction a;
      for (std::size_t i = 0; i < idx.size(); ++i) a.actions.push_back(support[i][idx[i]]);
      const double b = joint_beta(a);
      out.prior.push_back(joint_prob(prior, a));
      out.beta.push_back(b);
      out.beta_hat.push_back(b);
      out.actions.push_back(std::move(a));
      std::size_t i = idx.size();
      while (i > 0) {
        --i;
        if (++idx[i] < support[i].size()) break;
        idx[i] = 0;
        if (i == 0) return out;
      }
    }
  }

  std::map<JointAction, int> counts;
  for (int draw = 0; draw < k; ++draw) {
    JointAction a;
    for (const auto& b : beta) a.actions.push_back(rng.Categorical(b));
    ++counts[a];
  }
  for (const auto& [a, c] : counts) {
    out.prior.push_back(joint_prob(prior, a));
    out.beta.push_back(joint_beta(a));
    out.beta_hat.push_back(static_cast<double>(c) / k);
    out.actions.push_back(a);
  }
  return out;
}

int TreeNode::ChildVisits() const {
  int n = 0;
  for (int v : edge_visits) n += v;
  return n;
}

void MinMaxStats::Update(double x) {
  lo = std::min(lo, x);
  hi = std::max(hi, x);
}

double MinMaxStats::Normalize(double x) const {
  if (!(hi > lo)) return 0.0;
  return 2.0 * (x - lo) / (hi - lo) - 1.0;
}

int SearchTree::AddNode(TreeNode node) {
  nodes_.push_back(std::move(node));
  return static_cast<int>(nodes_.size()) - 1;
}

double SearchTree::VLambda(int node) const {
  return v_lambda(nodes_[node].stats, config_.rho, config_.lambda, config_.quantile_rounding);
}

double SearchTree::Advantage(int node, int slot) const {
  const TreeNode& n = nodes_[node];
  const int child = n.children[slot];
  if (child < 0) Fail(ErrorKind::kUnexpandedChild, "advantage of an unexpanded action");
  return optimistic_advantage(n.edge_reward[slot], config_.discount, VLambda(child), n.stats.value);
}

double SearchTree::QValue(int node, int slot) const {
  const TreeNode& n = nodes_[node];
  const int child = n.children[slot];
  if (child < 0) Fail(ErrorKind::kUnexpandedChild, "Q-value of an unexpanded action");
  return n.edge_reward[slot] + config_.discount * nodes_[child].stats.MeanValue();
}

double SearchTree::EdgeScore(int node, int slot) const {
  if (nodes_[node].children[slot] < 0) return std::nan("");
  return config_.mode == SelectionMode::kAdvantage ? Advantage(node, slot) : QValue(node, slot);
}

int puct_select(const SearchTree& tree, int node_index, SelectionMode mode) {
  const TreeNode& node = tree.node(node_index);
  const SampledActions& t = node.sampled;
  if (t.actions.empty()) Fail(ErrorKind::kEmptyActionSet, "puct_select on an empty action set");
  const SearchConfig& cfg = tree.config();
  const double total = node.ChildVisits();
  // sqrt(sum N) vanishes before the first visit; treat that as one so the
  // prior alone decides the first selection.
  const double sqrt_total = std::sqrt(std::max(total, 1.0));
  const double c = cfg.c1 + std::log((total + cfg.c2 + 1.0) / cfg.c2);
  int best = -1;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int slot = 0; slot < t.size(); ++slot) {
    double score = 0.0;
    if (node.children[slot] >= 0) {
      const double raw = mode == SelectionMode::kAdvantage ? tree.Advantage(node_index, slot)
                                                           : tree.QValue(node_index, slot);
      score = tree.minmax().Normalize(raw);
    }
    const double ratio = t.beta_hat[slot] / t.beta[slot];
    score += ratio * t.prior[slot] * sqrt_total / (1.0 + node.edge_visits[slot]) * c;
    if (score > best_score) {
      best_score = score;
      best = slot;
    }
  }
  return best;
}

namespace {

int ExpandNode(SearchTree& tree, const Model& model, LatentState state, const Prediction& pred,
               const PolicyDistribution& prior, int parent, int parent_slot, RngStream& rng) {
  const SearchConfig& cfg = tree.config();
  TreeNode n;
  n.state = std::move(state);
  n.sampled = sample_action_set(prior, cfg.num_sampled_actions, rng, cfg);
  for (const auto& a : n.sampled.actions) CheckJointAction(a, model.action_sizes());
  n.children.assign(n.sampled.size(), -1);
  n.edge_reward.assign(n.sampled.size(), 0.0);
  n.edge_visits.assign(n.sampled.size(), 0);
  InitNodeStats(n.stats, pred.value, cfg.mode == SelectionMode::kAdvantage);
  n.parent = parent;
  n.parent_slot = parent_slot;
  n.depth = parent < 0 ? 0 : tree.node(parent).depth + 1;
  return tree.AddNode(std::move(n));
}

void Simulate(SearchTree& tree, const Model& model, RngStream& rng) {
  const SearchConfig& cfg = tree.config();
  std::vector<int> path{0};
  std::vector<int> slots;
  int cur = 0;
  for (;;) {
    const int slot = puct_select(tree, cur, cfg.mode);
    slots.push_back(slot);
    const int child = tree.node(cur).children[slot];
    if (child < 0) break;
    cur = child;
    path.push_back(cur);
  }
  const int slot = slots.back();
  const JointAction action = tree.node(cur).sampled.actions[slot];
  ModelTransition t = model.Step(tree.node(cur).state, action);
  if (!std::isfinite(t.reward) || !t.next.AllFinite()) {
    Fail(ErrorKind::kModelFailure, "non-finite dynamics output");
  }
  const Prediction pred = model.Predict(t.next);
  CheckFinite(pred, "expanded node");
  const int leaf = ExpandNode(tree, model, std::move(t.next), pred,
                              PolicyDistribution::FromLogits(pred.policy_logits), cur, slot, rng);
  tree.node(cur).children[slot] = leaf;
  tree.node(cur).edge_reward[slot] = t.reward;
  path.push_back(leaf);

  std::vector<NodeStats*> stats;
  std::vector<double> rewards;
  for (std::size_t i = 0; i < path.size(); ++i) {
    stats.push_back(&tree.node(path[i]).stats);
    if (i + 1 < path.size()) rewards.push_back(tree.node(path[i]).edge_reward[slots[i]]);
  }
  backup(stats, rewards, cfg.discount, cfg.mode == SelectionMode::kAdvantage);
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    tree.node(path[i]).edge_visits[slots[i]] += 1;
    tree.minmax().Update(tree.EdgeScore(path[i], slots[i]));
  }
}

int ArgMax(std::span<const double> v) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

}  // namespace

SearchResult run_search(const Model& model, const LatentState& root, const SearchConfig& config,
                        RngStream& rng, SearchTree* tree_out) {
  config.Validate();
  SearchTree tree(config);
  Prediction pred;
  try {
    pred = model.Predict(root);
    CheckFinite(pred, "root");
  } catch (const Error& e) {
    Fail(ErrorKind::kModelFailure, std::string("root expansion: ") + e.what());
  }
  const PolicyDistribution prior = RootPrior(pred, config, rng);
  ExpandNode(tree, model, root, pred, prior, -1, -1, rng);

  for (int sim = 0; sim < config.num_simulations; ++sim) {
    try {
      Simulate(tree, model, rng);
    } catch (const Error& e) {
      Fail(ErrorKind::kModelFailure, "simulation " + std::to_string(sim) + ": " + e.what());
    }
  }

  const TreeNode& r = tree.node(0);
  SearchResult out;
  out.actions = r.sampled.actions;
  out.visit_counts = r.edge_visits;
  out.root_prediction = r.stats.value;
  const int total = r.ChildVisits();
  out.visit_policy.resize(r.sampled.size());
  if (total > 0) {
    for (int i = 0; i < r.sampled.size(); ++i) {
      out.visit_policy[i] = static_cast<double>(r.edge_visits[i]) / total;
    }
  } else {
    double z = 0.0;
    for (double p : r.sampled.prior) z += p;
    for (int i = 0; i < r.sampled.size(); ++i) out.visit_policy[i] = r.sampled.prior[i] / z;
  }
  out.advantages.resize(r.sampled.size(), 0.0);
  for (int i = 0; i < r.sampled.size(); ++i) {
    if (r.children[i] < 0) continue;
    out.advantages[i] = config.mode == SelectionMode::kAdvantage
                            ? tree.Advantage(0, i)
                            : tree.QValue(0, i) - r.stats.value;
  }
  out.root_value =
      config.mode == SelectionMode::kAdvantage ? tree.VLambda(0) : r.stats.MeanValue();
  out.chosen = out.actions[ArgMax(out.visit_policy)];
  if (tree_out) *tree_out = std::move(tree);
  return out;
}

SearchResult run_search(const Model& model, const ObservationHistory& obs,
                        const SearchConfig& config, RngStream& rng, SearchTree* tree_out) {
  LatentState root;
  try {
    root = model.Represent(obs);
  } catch (const Error& e) {
    Fail(ErrorKind::kModelFailure, std::string("representation: ") + e.what());
  }
  return run_search(model, root, config, rng, tree_out);
}

JointAction act_from_result(const SearchResult& result, double temperature, RngStream& rng) {
  if (result.actions.empty()) Fail(ErrorKind::kEmptyActionSet, "empty search result");
  if (temperature < 0.0) Fail(ErrorKind::kInvalidArgument, "negative temperature");
  if (temperature == 0.0) return result.actions[ArgMax(result.visit_policy)];
  double m = 0.0;
  for (double w : result.visit_policy) m = std::max(m, w);
  std::vector<double> weights;
  for (double w : result.visit_policy) {
    weights.push_back(w > 0.0 ? std::exp(std::log(w / m) / temperature) : 0.0);
  }
  return result.actions[rng.Categorical(weights)];
}

void DumpTree(const SearchTree& tree, std::ostream& out) {
  out << "depth,node_id,parent_id,action,N,r,v,A\n";
  for (int i = 0; i < tree.size(); ++i) {
    const TreeNode& n = tree.node(i);
    std::string action = "-";
    double r = 0.0, adv = 0.0;
    if (n.parent >= 0) {
      const TreeNode& p = tree.node(n.parent);
      const JointAction& a = p.sampled.actions[n.parent_slot];
      action.clear();
      for (int j = 0; j < a.num_agents(); ++j) {
        if (j) action += ':';
        action += std::to_string(a[j]);
      }
      r = p.edge_reward[n.parent_slot];
      adv = tree.config().mode == SelectionMode::kAdvantage
                ? tree.Advantage(n.parent, n.parent_slot)
                : tree.QValue(n.parent, n.parent_slot) - p.stats.value;
    }
    out << n.depth << ',' << i << ',' << n.parent << ',' << action << ',' << n.stats.visits << ','
        << FormatDouble(r) << ',' << FormatDouble(n.stats.value) << ',' << FormatDouble(adv)
        << '\n';
  }
}

}  // namespace mazero
