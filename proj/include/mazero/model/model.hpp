#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "mazero/core.hpp"

namespace mazero {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Per-agent observation frame: one row per agent.
using ObservationFrame = RowMatrix;

/// Rolling window of the most recent local observations of every agent.
/// Frames older than the episode start are zero.
class ObservationHistory {
 public:
  static constexpr int kDefaultDepth = 4;

  ObservationHistory() = default;
  ObservationHistory(int num_agents, int feature_length, int depth = kDefaultDepth);

  // Starts a new episode: clears the window and appends `first`.
  void Reset(const ObservationFrame& first);
  void Push(const ObservationFrame& frame);

  int num_agents() const { return num_agents_; }
  int feature_length() const { return feature_length_; }
  int depth() const { return depth_; }
  const ObservationFrame& Latest() const { return frames_.back(); }
  const ObservationFrame& Frame(int i) const { return frames_[i]; }

  // N x (depth * F), oldest frame first.
  RowMatrix Stacked() const;

 private:
  int num_agents_ = 0;
  int feature_length_ = 0;
  int depth_ = kDefaultDepth;
  std::vector<ObservationFrame> frames_;
};

/// Joint latent state: one row per agent.
struct LatentState {
  RowMatrix agents;
  int num_agents() const { return static_cast<int>(agents.rows()); }
  bool AllFinite() const { return agents.allFinite(); }
};

struct Prediction {
  double value = 0.0;
  std::vector<std::vector<double>> policy_logits;
};

struct ModelTransition {
  LatentState next;
  double reward = 0.0;
};

/// The six-function world model seen by search. Representation, dynamics
/// (communication folded in) with the reward head, and the value/policy heads.
class Model {
 public:
  virtual ~Model() = default;
  virtual int num_agents() const = 0;
  virtual std::vector<int> action_sizes() const = 0;
  virtual LatentState Represent(const ObservationHistory& obs) const = 0;
  virtual Prediction Predict(const LatentState& state) const = 0;
  virtual ModelTransition Step(const LatentState& state, const JointAction& a) const = 0;
};

void CheckJointAction(const JointAction& a, const std::vector<int>& action_sizes);

}  // namespace mazero
