#include "mazero/oracles/oracles.hpp"

#include <algorithm>
#include <cmath>

namespace mazero::oracle {

ExplicitTree RandomTree(const TreeShape& shape, RngStream& rng) {
  ExplicitTree t;
  std::vector<int> depth;
  auto add = [&](int parent, int d) {
    t.parent.push_back(parent);
    t.value.push_back(2.0 * rng.Uniform() - 1.0);
    t.reward.push_back(parent < 0 ? 0.0 : 2.0 * rng.Uniform() - 1.0);
    t.children.emplace_back();
    depth.push_back(d);
    const int id = t.size() - 1;
    if (parent >= 0) t.children[parent].push_back(id);
    return id;
  };
  add(-1, 0);
  // Breadth-first growth; deeper nodes branch less often to bound the size.
  for (int i = 0; i < t.size(); ++i) {
    if (depth[i] >= shape.max_depth) continue;
    const double keep = 1.0 - static_cast<double>(depth[i]) / (shape.max_depth + 1);
    const int branches = static_cast<int>(rng.UniformInt(static_cast<std::uint64_t>(shape.max_branching) + 1));
    for (int b = 0; b < branches; ++b) {
      if (i == 0 || rng.Uniform() < keep) add(i, depth[i] + 1);
    }
  }
  return t;
}

std::vector<std::vector<double>> ReturnSets(const ExplicitTree& tree, int node, double discount) {
  std::vector<std::vector<double>> sets;
  // Depth-first walk carrying the discounted reward prefix.
  struct Frame {
    int id;
    int d;
    double prefix;
  };
  std::vector<Frame> stack{{node, 0, 0.0}};
  while (!stack.empty()) {
    const Frame f = stack.back();
    stack.pop_back();
    if (static_cast<int>(sets.size()) <= f.d) sets.resize(f.d + 1);
    sets[f.d].push_back(f.prefix + std::pow(discount, f.d) * tree.value[f.id]);
    for (int c : tree.children[f.id]) {
      stack.push_back({c, f.d + 1, f.prefix + std::pow(discount, f.d) * tree.reward[c]});
    }
  }
  return sets;
}

double BruteVLambda(const ExplicitTree& tree, int node, double discount, Fraction rho,
                    double lambda) {
  const auto sets = ReturnSets(tree, node, discount);
  double num = 0.0, den = 0.0;
  for (std::size_t d = 0; d < sets.size(); ++d) {
    std::vector<double> u = sets[d];
    std::sort(u.begin(), u.end());
    const long long n = static_cast<long long>(u.size());
    // ceil((den - num) * n / den) in integers, at least one.
    const long long top = (static_cast<long long>(rho.den - rho.num) * n + rho.den - 1) / rho.den;
    const long long keep = std::max<long long>(1, std::min(n, top));
    double s = 0.0;
    for (long long i = n - keep; i < n; ++i) s += u[static_cast<std::size_t>(i)];
    const double w = std::pow(lambda, static_cast<double>(d));
    num += w * s;
    den += w * static_cast<double>(keep);
  }
  return num / den;
}

double BruteAdvantage(const ExplicitTree& tree, int child, double discount, Fraction rho,
                      double lambda) {
  const int parent = tree.parent[child];
  return tree.reward[child] + discount * BruteVLambda(tree, child, discount, rho, lambda) -
         tree.value[parent];
}

double CentralDifference(const std::function<double(const std::vector<double>&)>& f,
                         std::vector<double> x, std::size_t i, double h) {
  const double x0 = x[i];
  auto at = [&](double d) {
    x[i] = x0 + d;
    return f(x);
  };
  return (at(-2.0 * h) - 8.0 * at(-h) + 8.0 * at(h) - at(2.0 * h)) / (12.0 * h);
}

double RelativeError(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

MatrixOptimum ReverseScanOptimum(const MatrixGameSpec& spec) {
  const std::int64_t n = static_cast<std::int64_t>(spec.payoff.size());
  std::int64_t best = n - 1;
  for (std::int64_t i = n - 1; i >= 0; --i) {
    if (spec.payoff[i] >= spec.payoff[best]) best = i;
  }
  return {spec.FromIndex(best), spec.payoff[best]};
}

std::vector<double> MonteCarloBanditT(const std::vector<double>& pi, int k, long long trials,
                                      RngStream& rng) {
  std::vector<double> counts(pi.size(), 0.0);
  for (long long t = 0; t < trials; ++t) {
    int best = -1;
    for (int j = 0; j < k; ++j) best = std::max(best, rng.Categorical(pi));
    counts[best] += 1.0;
  }
  for (double& c : counts) c /= static_cast<double>(trials);
  return counts;
}

}  // namespace mazero::oracle
