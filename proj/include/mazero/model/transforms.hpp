#pragma once

#include <array>
#include <span>
#include <vector>

namespace mazero {

/// Invertible target scaling h(x) = sign(x)(sqrt(|x|+1) - 1) + eps*x.
double value_transform(double x);

/// Closed-form inverse of value_transform.
double value_transform_inv(double y);

/// Fixed categorical support for reward and value heads: evenly spaced bin
/// centers covering [lo, hi].
class CategoricalSupport {
 public:
  static constexpr int kDefaultBins = 10;

  CategoricalSupport() : CategoricalSupport(kDefaultBins, -5.0, 5.0) {}
  CategoricalSupport(int bins, double lo, double hi);

  int size() const { return static_cast<int>(centers_.size()); }
  double lo() const { return centers_.front(); }
  double hi() const { return centers_.back(); }
  const std::vector<double>& centers() const { return centers_; }

 private:
  std::vector<double> centers_;
};

/// Two-hot projection of clamp(x, lo, hi) onto the two adjacent bin centers.
std::vector<double> scalar_to_support(double x, const CategoricalSupport& sup);

/// Expectation of the bin centers under `weights`.
double support_to_scalar(std::span<const double> weights, const CategoricalSupport& sup);

}  // namespace mazero
