#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mazero {

enum class ErrorKind {
  kInvalidArgument,
  kDimensionMismatch,
  kEmptyActionSet,
  kUnexpandedChild,
  kSupportMismatch,
  kNanDetected,
  kSizeOverflow,
  kEpisodeDone,
  kModelFailure,
  kIo,
  kUsage,
};

const char* ToString(ErrorKind kind);

// All recoverable failures in the library surface as this exception type.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void Fail(ErrorKind kind, const std::string& what);

struct AgentId {
  int index = 0;
  friend auto operator<=>(const AgentId&, const AgentId&) = default;
};

// One discrete action index per agent. Ordered lexicographically so it can
// key maps and give search trees a stable tie-break order.
struct JointAction {
  std::vector<int> actions;

  JointAction() = default;
  explicit JointAction(std::vector<int> a) : actions(std::move(a)) {}
  JointAction(std::initializer_list<int> a) : actions(a) {}

  int num_agents() const { return static_cast<int>(actions.size()); }
  int operator[](int i) const { return actions[i]; }
  friend auto operator<=>(const JointAction&, const JointAction&) = default;
  friend bool operator==(const JointAction&, const JointAction&) = default;
};

std::string ToString(const JointAction& a);

struct JointActionHash {
  std::size_t operator()(const JointAction& a) const;
};

// Per-agent categorical distributions. Joint probabilities factorize.
struct PolicyDistribution {
  std::vector<std::vector<double>> per_agent;

  int num_agents() const { return static_cast<int>(per_agent.size()); }
  int num_actions(int agent) const {
    return static_cast<int>(per_agent[agent].size());
  }
  // Total number of joint actions; saturates at INT64_MAX.
  std::int64_t joint_size() const;

  static PolicyDistribution Uniform(std::span<const int> action_sizes);
  static PolicyDistribution FromLogits(
      const std::vector<std::vector<double>>& logits);
};

// Throws if any vector has negative entries or does not sum to one.
void ValidateDistribution(std::span<const double> p, double tol = 1e-9);

double joint_prob(const PolicyDistribution& policy, const JointAction& a);

// Numerically stable softmax over a logit vector.
std::vector<double> Softmax(std::span<const double> logits);

enum class SelectionMode { kAdvantage, kQValue };
enum class QuantileRounding { kCeil, kFloor };

SelectionMode ParseSelectionMode(std::string_view s);
const char* ToString(SelectionMode m);

struct SearchConfig {
  int num_sampled_actions = 10;
  int num_simulations = 100;
  double rho = 0.75;
  double lambda = 0.8;
  double alpha = 3.0;
  double discount = 0.99;
  double c1 = 1.25;
  double c2 = 19652.0;
  double temperature = 1.0;
  SelectionMode mode = SelectionMode::kAdvantage;
  // When K covers the whole joint space, expand the prior's support exactly.
  bool enumerate_if_fits = true;
  // beta is proportional to prior^(1/sampling_temperature); 1 means beta = prior.
  double sampling_temperature = 1.0;
  bool root_dirichlet = false;
  double dirichlet_alpha = 0.3;
  double dirichlet_fraction = 0.25;
  // Test hook for the verification suite's negative control.
  QuantileRounding quantile_rounding = QuantileRounding::kCeil;

  void Validate() const;
};

// Counter-based deterministic stream. Draws depend only on (seed, stream id,
// call sequence), never on the platform's standard-library distributions.
class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream() : RngStream(0, 0) {}
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }
  result_type operator()() { return NextU64(); }

  std::uint64_t NextU64();
  // Uniform in [0, 1) with 53 bits of mantissa.
  double Uniform();
  // Uniform integer in [0, n).
  std::uint64_t UniformInt(std::uint64_t n);
  double Normal();
  double Gamma(double shape);
  // Index drawn proportionally to nonnegative weights.
  int Categorical(std::span<const double> weights);

  RngStream Split(std::string_view label) const;
  RngStream Split(std::uint64_t index) const;

  friend bool operator==(const RngStream&, const RngStream&) = default;

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t state_;
};

RngStream split_rng(const RngStream& parent, std::string_view label);

std::uint64_t Mix64(std::uint64_t x);
std::uint64_t HashLabel(std::string_view label);

}  // namespace mazero
