#pragma once

#include <iosfwd>
#include <limits>
#include <vector>

#include "mazero/core.hpp"
#include "mazero/model/model.hpp"
#include "mazero/oslambda.hpp"

namespace mazero {

/// Sampled subset T(s) with, per action, the prior P(s,a), the sampling
/// distribution beta(a) and the empirical distribution beta_hat(a).
struct SampledActions {
  std::vector<JointAction> actions;  // lexicographic order
  std::vector<double> prior;
  std::vector<double> beta;
  std::vector<double> beta_hat;

  int size() const { return static_cast<int>(actions.size()); }
};

/// Draws K joint actions agent-wise from beta with replacement and merges
/// duplicates (beta_hat = count / K). If enumeration is enabled and K covers
/// the joint space, T is beta's support and beta_hat = beta.
SampledActions sample_action_set(const PolicyDistribution& prior, int k, RngStream& rng,
                                 const SearchConfig& config = {});

struct TreeNode {
  LatentState state;
  SampledActions sampled;
  std::vector<int> children;        // node index, -1 while unexpanded
  std::vector<double> edge_reward;  // r(s,a) once expanded
  std::vector<int> edge_visits;     // N(s,a)
  NodeStats stats;
  int parent = -1;
  int parent_slot = -1;
  int depth = 0;

  int ChildVisits() const;
};

// Running bounds of the selection score across the whole tree.
struct MinMaxStats {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void Update(double x);
  // Maps into [-1, 1]; returns the midpoint 0 while the range is degenerate.
  double Normalize(double x) const;
};

class SearchTree {
 public:
  explicit SearchTree(SearchConfig config) : config_(std::move(config)) {}

  const SearchConfig& config() const { return config_; }
  const TreeNode& node(int i) const { return nodes_[i]; }
  TreeNode& node(int i) { return nodes_[i]; }
  int size() const { return static_cast<int>(nodes_.size()); }
  const MinMaxStats& minmax() const { return minmax_; }
  MinMaxStats& minmax() { return minmax_; }

  int AddNode(TreeNode node);

  // Score of the edge (node, slot) before normalization: optimistic
  // advantage or Q-value depending on the selection mode. NaN if unexpanded.
  double EdgeScore(int node, int slot) const;
  double VLambda(int node) const;
  double Advantage(int node, int slot) const;
  double QValue(int node, int slot) const;

 private:
  SearchConfig config_;
  std::vector<TreeNode> nodes_;
  MinMaxStats minmax_;
};

/// pUCT over T(s) with prior correction beta_hat / beta; returns the slot.
int puct_select(const SearchTree& tree, int node, SelectionMode mode);

struct SearchResult {
  std::vector<JointAction> actions;  // T(root)
  std::vector<int> visit_counts;
  std::vector<double> visit_policy;  // omega
  std::vector<double> advantages;    // 0 for unexpanded actions
  double root_value = 0.0;           // V_lambda^rho (or mean value in q-form)
  double root_prediction = 0.0;      // the model's v(root)
  JointAction chosen;                // argmax omega

  int size() const { return static_cast<int>(actions.size()); }
};

SearchResult run_search(const Model& model, const LatentState& root, const SearchConfig& config,
                        RngStream& rng, SearchTree* tree_out = nullptr);
SearchResult run_search(const Model& model, const ObservationHistory& obs,
                        const SearchConfig& config, RngStream& rng,
                        SearchTree* tree_out = nullptr);

/// Temperature 0 picks argmax omega (lowest index on ties); otherwise samples
/// proportionally to omega^(1/temperature).
JointAction act_from_result(const SearchResult& result, double temperature, RngStream& rng);

/// Text dump, one line per node after a header:
/// depth,node_id,parent_id,action,N,r,v,A
void DumpTree(const SearchTree& tree, std::ostream& out);

}  // namespace mazero
