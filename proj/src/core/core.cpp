#include "mazero/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace mazero {

const char* ToString(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "invalid_argument";
    case ErrorKind::kDimensionMismatch: return "dimension_mismatch";
    case ErrorKind::kEmptyActionSet: return "empty_action_set";
    case ErrorKind::kUnexpandedChild: return "unexpanded_child";
    case ErrorKind::kSupportMismatch: return "support_mismatch";
    case ErrorKind::kNanDetected: return "nan_detected";
    case ErrorKind::kSizeOverflow: return "size_overflow";
    case ErrorKind::kEpisodeDone: return "episode_done";
    case ErrorKind::kModelFailure: return "model_failure";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kUsage: return "usage";
  }
  return "unknown";
}

void Fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, std::string(ToString(kind)) + ": " + what);
}

std::string ToString(const JointAction& a) {
  std::ostringstream os;
  os << '(';
  for (int i = 0; i < a.num_agents(); ++i) {
    if (i) os << ' ';
    os << a[i];
  }
  os << ')';
  return os.str();
}

std::size_t JointActionHash::operator()(const JointAction& a) const {
  std::uint64_t h = 0x9e3779b97f4a7c15ULL;
  for (int x : a.actions) h = Mix64(h ^ static_cast<std::uint64_t>(x));
  return static_cast<std::size_t>(h);
}

std::int64_t PolicyDistribution::joint_size() const {
  std::int64_t n = 1;
  for (const auto& p : per_agent) {
    const auto m = static_cast<std::int64_t>(p.size());
    if (m != 0 && n > std::numeric_limits<std::int64_t>::max() / m) {
      return std::numeric_limits<std::int64_t>::max();
    }
    n *= m;
  }
  return n;
}

PolicyDistribution PolicyDistribution::Uniform(std::span<const int> action_sizes) {
  PolicyDistribution p;
  for (int m : action_sizes) {
    if (m <= 0) Fail(ErrorKind::kInvalidArgument, "action space must be nonempty");
    p.per_agent.emplace_back(m, 1.0 / m);
  }
  return p;
}

PolicyDistribution PolicyDistribution::FromLogits(
    const std::vector<std::vector<double>>& logits) {
  PolicyDistribution p;
  for (const auto& l : logits) p.per_agent.push_back(Softmax(l));
  return p;
}

void ValidateDistribution(std::span<const double> p, double tol) {
  double sum = 0.0;
  for (double x : p) {
    if (!(x >= 0.0)) Fail(ErrorKind::kInvalidArgument, "negative or NaN probability");
    sum += x;
  }
  if (std::abs(sum - 1.0) > tol) {
    Fail(ErrorKind::kInvalidArgument, "probabilities sum to " + std::to_string(sum));
  }
}

double joint_prob(const PolicyDistribution& policy, const JointAction& a) {
  if (policy.num_agents() != a.num_agents()) {
    Fail(ErrorKind::kDimensionMismatch,
         "policy has " + std::to_string(policy.num_agents()) +
             " agents, action has " + std::to_string(a.num_agents()));
  }
  double p = 1.0;
  for (int i = 0; i < a.num_agents(); ++i) {
    if (a[i] < 0 || a[i] >= policy.num_actions(i)) {
      Fail(ErrorKind::kDimensionMismatch,
           "action " + std::to_string(a[i]) + " out of range for agent " +
               std::to_string(i));
    }
    p *= policy.per_agent[i][a[i]];
  }
  return p;
}

std::vector<double> Softmax(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - m);
    z += out[i];
  }
  for (double& x : out) x /= z;
  return out;
}

SelectionMode ParseSelectionMode(std::string_view s) {
  if (s == "advantage") return SelectionMode::kAdvantage;
  if (s == "q") return SelectionMode::kQValue;
  Fail(ErrorKind::kInvalidArgument, "unknown selection mode '" + std::string(s) + "'");
}

const char* ToString(SelectionMode m) {
  return m == SelectionMode::kAdvantage ? "advantage" : "q";
}

void SearchConfig::Validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) Fail(ErrorKind::kInvalidArgument, what);
  };
  require(num_sampled_actions >= 1, "num_sampled_actions must be >= 1");
  require(num_simulations >= 0, "num_simulations must be >= 0");
  require(rho >= 0.0 && rho <= 1.0, "rho must lie in [0,1]");
  require(lambda >= 0.0 && lambda <= 1.0, "lambda must lie in [0,1]");
  require(alpha > 0.0, "alpha must be positive");
  require(discount >= 0.0 && discount <= 1.0, "discount must lie in [0,1]");
  require(c2 > 0.0, "c2 must be positive");
  require(temperature >= 0.0, "temperature must be nonnegative");
  require(sampling_temperature > 0.0, "sampling_temperature must be positive");
}

// SplitMix64 finalizer.
std::uint64_t Mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t HashLabel(std::string_view label) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return Mix64(h);
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id),
      state_(Mix64(seed ^ Mix64(stream_id + 0x632be59bd9b4e019ULL))) {}

std::uint64_t RngStream::NextU64() {
  state_ += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double RngStream::Uniform() {
  return static_cast<double>(NextU64() >> 11) * 0x1.0p-53;
}

std::uint64_t RngStream::UniformInt(std::uint64_t n) {
  if (n == 0) Fail(ErrorKind::kInvalidArgument, "UniformInt(0)");
  // Rejection sampling keeps the draw exactly uniform.
  const std::uint64_t limit = max() - max() % n;
  std::uint64_t x;
  do {
    x = NextU64();
  } while (x >= limit);
  return x % n;
}

double RngStream::Normal() {
  // Box-Muller; one variate per call keeps the call sequence simple.
  double u1 = Uniform();
  while (u1 <= 0.0) u1 = Uniform();
  const double u2 = Uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

double RngStream::Gamma(double shape) {
  if (shape <= 0.0) Fail(ErrorKind::kInvalidArgument, "gamma shape must be positive");
  if (shape < 1.0) {
    double u = Uniform();
    while (u <= 0.0) u = Uniform();
    return Gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
  }
  // Marsaglia-Tsang.
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = Normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = Uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

int RngStream::Categorical(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) Fail(ErrorKind::kInvalidArgument, "categorical weights sum to zero");
  const double r = Uniform() * total;
  double acc = 0.0;
  int last_positive = -1;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    last_positive = static_cast<int>(i);
    acc += weights[i];
    if (r < acc) return last_positive;
  }
  return last_positive;
}

RngStream RngStream::Split(std::string_view label) const {
  const std::uint64_t h = HashLabel(label);
  return RngStream(Mix64(seed_ ^ h), Mix64(stream_id_ + h));
}

RngStream RngStream::Split(std::uint64_t index) const {
  const std::uint64_t h = Mix64(index ^ 0xd1b54a32d192ed03ULL);
  return RngStream(Mix64(seed_ ^ h), Mix64(stream_id_ + h + 1));
}

RngStream split_rng(const RngStream& parent, std::string_view label) {
  return parent.Split(label);
}

}  // namespace mazero
