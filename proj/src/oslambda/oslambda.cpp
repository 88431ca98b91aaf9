#include "mazero/oslambda.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace mazero {
namespace {
// Guards ceil/floor against products like (1 - 0.8) * 5 = 0.9999999999999998.
constexpr double kRoundingSlack = 1e-9;
}

std::size_t KeepCount(std::size_t n, double rho, QuantileRounding rounding) {
  if (n == 0) return 0;
  const double x = (1.0 - rho) * static_cast<double>(n);
  const double k = rounding == QuantileRounding::kCeil ? std::ceil(x - kRoundingSlack)
                                                       : std::floor(x + kRoundingSlack);
  return std::clamp<std::size_t>(static_cast<std::size_t>(std::max(k, 0.0)), 1, n);
}

std::vector<double> top_quantile(std::span<const double> u, double rho,
                                 QuantileRounding rounding) {
  if (u.empty()) Fail(ErrorKind::kInvalidArgument, "top_quantile of an empty set");
  std::vector<double> sorted(u.begin(), u.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  sorted.resize(KeepCount(sorted.size(), rho, rounding));
  return sorted;
}

void DepthBuckets::Insert(int depth, double x) {
  if (depth < 0) Fail(ErrorKind::kInvalidArgument, "negative bucket depth");
  if (!std::isfinite(x)) Fail(ErrorKind::kNanDetected, "non-finite bootstrapped return");
  if (static_cast<int>(buckets_.size()) <= depth) buckets_.resize(depth + 1);
  auto& v = buckets_[depth].sorted;
  v.insert(std::upper_bound(v.begin(), v.end(), x, std::greater<>()), x);
  buckets_[depth].dirty = true;
  cache_valid_ = false;
}

std::size_t DepthBuckets::total_size() const {
  std::size_t n = 0;
  for (const auto& b : buckets_) n += b.sorted.size();
  return n;
}

double DepthBuckets::VLambda(double rho, double lambda, QuantileRounding rounding) const {
  if (buckets_.empty() || buckets_[0].sorted.empty()) {
    Fail(ErrorKind::kInvalidArgument, "v_lambda on a node without U_0");
  }
  const bool same_params =
      cached_rho_ == rho && cached_lambda_ == lambda && cached_rounding_ == rounding;
  if (cache_valid_ && same_params) return cached_value_;
  double num = 0.0, den = 0.0, weight = 1.0;
  for (const auto& b : buckets_) {
    if (!b.sorted.empty()) {
      if (b.dirty || !same_params) {
        b.kept = KeepCount(b.sorted.size(), rho, rounding);
        b.kept_sum = 0.0;
        for (std::size_t i = 0; i < b.kept; ++i) b.kept_sum += b.sorted[i];
        b.dirty = false;
      }
      num += weight * b.kept_sum;
      den += weight * static_cast<double>(b.kept);
    }
    weight *= lambda;
  }
  cached_rho_ = rho;
  cached_lambda_ = lambda;
  cached_rounding_ = rounding;
  cached_value_ = num / den;
  cache_valid_ = true;
  return cached_value_;
}

void InitNodeStats(NodeStats& stats, double value, bool track_buckets) {
  stats.value = value;
  stats.visits = 1;
  stats.value_sum = value;
  stats.buckets = DepthBuckets();
  if (track_buckets) stats.buckets.Insert(0, value);
}

void insert_return(std::span<NodeStats* const> path, std::span<const double> edge_rewards,
                   double leaf_value, double discount) {
  if (path.empty()) return;
  if (edge_rewards.size() + 1 != path.size()) {
    Fail(ErrorKind::kDimensionMismatch, "insert_return: need one reward per path edge");
  }
  double ret = leaf_value;
  for (std::size_t i = path.size() - 1; i-- > 0;) {
    ret = edge_rewards[i] + discount * ret;
    path[i]->buckets.Insert(static_cast<int>(path.size() - 1 - i), ret);
  }
}

double v_lambda(const NodeStats& node, double rho, double lambda, QuantileRounding rounding) {
  return node.buckets.VLambda(rho, lambda, rounding);
}

double optimistic_advantage(double reward, double discount, double child_v_lambda,
                            double parent_value) {
  return reward + discount * child_v_lambda - parent_value;
}

void backup(std::span<NodeStats* const> path, std::span<const double> edge_rewards,
            double discount, bool track_buckets) {
  if (path.empty()) return;
  if (edge_rewards.size() + 1 != path.size()) {
    Fail(ErrorKind::kDimensionMismatch, "backup: need one reward per path edge");
  }
  const double leaf_value = path.back()->value;
  if (track_buckets) insert_return(path, edge_rewards, leaf_value, discount);
  double ret = leaf_value;
  for (std::size_t i = path.size() - 1; i-- > 0;) {
    ret = edge_rewards[i] + discount * ret;
    path[i]->visits += 1;
    path[i]->value_sum += ret;
  }
}

}  // namespace mazero
