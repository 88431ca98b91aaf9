#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "mazero/core.hpp"
#include "mazero/envs/matrix_game.hpp"

// Independent reference implementations used by the verification suites and
// tests. Nothing in the library proper depends on them.
namespace mazero::oracle {

/// Explicit tree with node values and parent-edge rewards; node 0 is the root.
struct ExplicitTree {
  std::vector<int> parent;       // -1 for the root
  std::vector<double> value;     // v(s)
  std::vector<double> reward;    // reward on the edge from parent, 0 for root
  std::vector<std::vector<int>> children;

  int size() const { return static_cast<int>(parent.size()); }
};

struct TreeShape {
  int max_depth = 6;
  int max_branching = 4;
};

/// Random tree with rewards and values uniform on [-1, 1]. Nodes are numbered
/// so that every parent precedes its children.
ExplicitTree RandomTree(const TreeShape& shape, RngStream& rng);

/// Quantile parameter as an exact fraction so the kept count uses integers.
struct Fraction {
  int num = 0;
  int den = 1;
};

/// All bootstrapped returns from `node` to its descendants at distance d,
/// recomputed from scratch.
std::vector<std::vector<double>> ReturnSets(const ExplicitTree& tree, int node, double discount);

/// Brute-force V_lambda^rho at `node`.
double BruteVLambda(const ExplicitTree& tree, int node, double discount, Fraction rho,
                    double lambda);

/// Brute-force optimistic advantage of the edge into `child`.
double BruteAdvantage(const ExplicitTree& tree, int child, double discount, Fraction rho,
                      double lambda);

/// Fourth-order central difference of f along coordinate i.
double CentralDifference(const std::function<double(const std::vector<double>&)>& f,
                         std::vector<double> x, std::size_t i, double h);

/// |a - f| / max(|a|, |f|, floor).
double RelativeError(double analytic, double numeric, double floor);

/// Best joint action by scanning the payoff tensor from the last index down.
MatrixOptimum ReverseScanOptimum(const MatrixGameSpec& spec);

/// Empirical frequency of the best-valued arm over `trials` sets of k draws.
std::vector<double> MonteCarloBanditT(const std::vector<double>& pi, int k, long long trials,
                                      RngStream& rng);

}  // namespace mazero::oracle
