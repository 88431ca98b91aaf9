#include "mazero/model/transforms.hpp"

#include <algorithm>
#include <cmath>

#include "mazero/core.hpp"

namespace mazero {
namespace {
constexpr double kEps = 0.001;
}

double value_transform(double x) {
  const double s = (x > 0.0) - (x < 0.0);
  return s * (std::sqrt(std::abs(x) + 1.0) - 1.0) + kEps * x;
}

double value_transform_inv(double y) {
  // Solving eps*t^2 + t - (|y| + 1 + eps) = 0 for t = sqrt(|x| + 1) via the
  // cancellation-free root, then |x| = t^2 - 1.
  const double s = (y > 0.0) - (y < 0.0);
  const double c = std::abs(y) + 1.0 + kEps;
  const double t = 2.0 * c / (1.0 + std::sqrt(1.0 + 4.0 * kEps * c));
  return s * (t * t - 1.0);
}

CategoricalSupport::CategoricalSupport(int bins, double lo, double hi) {
  if (bins < 2 || !(hi > lo)) {
    Fail(ErrorKind::kInvalidArgument, "support needs >= 2 bins and hi > lo");
  }
  centers_.resize(bins);
  for (int i = 0; i < bins; ++i) {
    centers_[i] = lo + (hi - lo) * static_cast<double>(i) / (bins - 1);
  }
}

std::vector<double> scalar_to_support(double x, const CategoricalSupport& sup) {
  const auto& c = sup.centers();
  std::vector<double> w(c.size(), 0.0);
  x = std::clamp(x, sup.lo(), sup.hi());
  if (x >= c.back()) {
    w.back() = 1.0;
    return w;
  }
  // Largest i with c[i] <= x.
  const auto it = std::upper_bound(c.begin(), c.end(), x);
  const std::size_t i = static_cast<std::size_t>(it - c.begin()) - 1;
  const double frac = (x - c[i]) / (c[i + 1] - c[i]);
  w[i] = 1.0 - frac;
  w[i + 1] = frac;
  return w;
}

double support_to_scalar(std::span<const double> weights, const CategoricalSupport& sup) {
  if (static_cast<int>(weights.size()) != sup.size()) {
    Fail(ErrorKind::kDimensionMismatch, "support weights length mismatch");
  }
  double v = 0.0;
  for (int i = 0; i < sup.size(); ++i) v += weights[i] * sup.centers()[i];
  return v;
}

}  // namespace mazero
