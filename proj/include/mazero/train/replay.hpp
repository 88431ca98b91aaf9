#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "mazero/awpo.hpp"
#include "mazero/core.hpp"
#include "mazero/model/model.hpp"

namespace mazero {

inline constexpr double kPriorityFloor = 1e-6;

/// One self-play episode. observations has one more frame than there are
/// steps: the frame seen after the last action.
struct Episode {
  std::uint64_t id = 0;
  std::vector<ObservationFrame> observations;
  std::vector<JointAction> actions;
  std::vector<double> rewards;      // u
  std::vector<double> root_values;  // nu, stored at search time
  std::vector<PolicyTarget> targets;
  std::vector<double> priorities;
  bool terminal = false;  // ended by the environment rather than the horizon

  int length() const { return static_cast<int>(actions.size()); }
  // Observation window ending at frame t (t may equal length()).
  ObservationHistory HistoryAt(int t, int depth) const;
  void Validate() const;
};

/// z_t = sum_{i<n} gamma^i u_{t+i} + gamma^n nu_{t+n}; rewards past the end
/// are dropped and the bootstrap is 0 past the end.
double n_step_target(std::span<const double> rewards, std::span<const double> values, int t,
                     int n, double discount);
double n_step_target(std::span<const double> rewards, int t, int n, double discount,
                     const std::function<double(int)>& value_at);

/// p^exponent normalized to sum to one.
std::vector<double> SamplingProbabilities(std::span<const double> priorities, double exponent);

struct ReplaySample {
  std::size_t episode = 0;  // index into the buffer at sampling time
  int t = 0;
  double probability = 0.0;
  double weight = 1.0;  // importance weight, max-normalized over the batch
};

/// Episodes with per-position priorities; the oldest episodes are evicted
/// once more than `capacity` positions are stored.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 100000) : capacity_(capacity) {}

  void Add(Episode episode);
  std::size_t num_positions() const { return positions_; }
  std::size_t num_episodes() const { return episodes_.size(); }
  const Episode& episode(std::size_t i) const { return episodes_[i]; }
  Episode& episode(std::size_t i) { return episodes_[i]; }

  std::vector<ReplaySample> Sample(int batch, double exponent, double is_beta,
                                   RngStream& rng) const;
  void UpdatePriority(std::size_t episode, int t, double priority);

 private:
  std::size_t capacity_;
  std::size_t positions_ = 0;
  std::deque<Episode> episodes_;
};

}  // namespace mazero
