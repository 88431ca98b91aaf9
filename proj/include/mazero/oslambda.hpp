#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mazero/core.hpp"

namespace mazero {

/// Number of elements kept by the top-(1-rho) filter: ceil((1-rho) n), at
/// least one. The floor variant exists only as a verification fault hook.
std::size_t KeepCount(std::size_t n, double rho,
                      QuantileRounding rounding = QuantileRounding::kCeil);

/// The largest KeepCount(|u|, rho) elements of u, in descending order.
std::vector<double> top_quantile(std::span<const double> u, double rho,
                                 QuantileRounding rounding = QuantileRounding::kCeil);

/// Per-depth multisets U_d(s) of bootstrapped returns for one tree node,
/// each kept sorted in descending order together with the sum of its kept
/// prefix. The lambda-weighted value is cached until the next insert.
class DepthBuckets {
 public:
  void Insert(int depth, double x);

  int num_depths() const { return static_cast<int>(buckets_.size()); }
  std::span<const double> bucket(int depth) const { return buckets_[depth].sorted; }
  std::size_t total_size() const;

  double VLambda(double rho, double lambda,
                 QuantileRounding rounding = QuantileRounding::kCeil) const;

 private:
  struct Bucket {
    std::vector<double> sorted;  // descending
    mutable double kept_sum = 0.0;
    mutable std::size_t kept = 0;
    mutable bool dirty = true;
  };
  std::vector<Bucket> buckets_;
  mutable bool cache_valid_ = false;
  mutable double cached_value_ = 0.0;
  mutable double cached_rho_ = -1.0;
  mutable double cached_lambda_ = -1.0;
  mutable QuantileRounding cached_rounding_ = QuantileRounding::kCeil;
};

/// Backup statistics attached to every search-tree node.
struct NodeStats {
  double value = 0.0;  // the model's v(s)
  int visits = 0;
  double value_sum = 0.0;  // sum of bootstrapped returns through this node
  DepthBuckets buckets;

  double MeanValue() const { return visits > 0 ? value_sum / visits : value; }
};

/// Initializes a freshly expanded node: U_0 = {v}, one visit.
void InitNodeStats(NodeStats& stats, double value, bool track_buckets = true);

/// For a new node at the end of `path`, inserts into every ancestor at
/// distance d the return sum_{k<d} gamma^k r_k + gamma^d v(leaf), where
/// edge_rewards[i] is the reward on the edge path[i] -> path[i+1].
void insert_return(std::span<NodeStats* const> path, std::span<const double> edge_rewards,
                   double leaf_value, double discount);

double v_lambda(const NodeStats& node, double rho, double lambda,
                QuantileRounding rounding = QuantileRounding::kCeil);

/// r(s,a) + gamma * V(child) - v(s).
double optimistic_advantage(double reward, double discount, double child_v_lambda,
                            double parent_value);

/// One simulation's backup. `path` runs from the root to the new leaf, whose
/// stats must already be initialized. Ancestors (all but the leaf) receive one
/// visit and the leaf's bootstrapped return in both the mean statistics and,
/// when track_buckets is set, their depth buckets.
void backup(std::span<NodeStats* const> path, std::span<const double> edge_rewards,
            double discount, bool track_buckets = true);

}  // namespace mazero
