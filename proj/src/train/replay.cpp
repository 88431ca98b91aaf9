#include "mazero/train/replay.hpp"

#include <algorithm>
#include <cmath>

namespace mazero {

ObservationHistory Episode::HistoryAt(int t, int depth) const {
  if (t < 0 || t >= static_cast<int>(observations.size())) {
    Fail(ErrorKind::kInvalidArgument, "episode frame index out of range");
  }
  const ObservationFrame& f = observations[t];
  ObservationHistory h(static_cast<int>(f.rows()), static_cast<int>(f.cols()), depth);
  const int first = std::max(0, t - depth + 1);
  h.Reset(observations[first]);
  for (int i = first + 1; i <= t; ++i) h.Push(observations[i]);
  return h;
}

void Episode::Validate() const {
  const std::size_t n = actions.size();
  if (observations.size() != n + 1 || rewards.size() != n || root_values.size() != n ||
      targets.size() != n || priorities.size() != n) {
    Fail(ErrorKind::kDimensionMismatch, "episode fields have inconsistent lengths");
  }
  for (double p : priorities) {
    if (!(p >= 0.0)) Fail(ErrorKind::kInvalidArgument, "negative priority");
  }
}

double n_step_target(std::span<const double> rewards, int t, int n, double discount,
                     const std::function<double(int)>& value_at) {
  const int len = static_cast<int>(rewards.size());
  if (t >= len) return 0.0;
  double z = 0.0, g = 1.0;
  for (int i = 0; i < n && t + i < len; ++i) {
    z += g * rewards[t + i];
    g *= discount;
  }
  if (t + n < len) z += std::pow(discount, n) * value_at(t + n);
  return z;
}

double n_step_target(std::span<const double> rewards, std::span<const double> values, int t,
                     int n, double discount) {
  if (values.size() != rewards.size()) {
    Fail(ErrorKind::kDimensionMismatch, "n_step_target: one value per reward required");
  }
  return n_step_target(rewards, t, n, discount, [&](int i) { return values[i]; });
}

std::vector<double> SamplingProbabilities(std::span<const double> priorities, double exponent) {
  std::vector<double> p(priorities.size());
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::pow(priorities[i], exponent);
    total += p[i];
  }
  if (!(total > 0.0)) Fail(ErrorKind::kInvalidArgument, "priorities have no mass");
  for (double& x : p) x /= total;
  return p;
}

void ReplayBuffer::Add(Episode episode) {
  episode.Validate();
  if (episode.length() == 0) return;
  positions_ += static_cast<std::size_t>(episode.length());
  episodes_.push_back(std::move(episode));
  while (positions_ > capacity_ && episodes_.size() > 1) {
    positions_ -= static_cast<std::size_t>(episodes_.front().length());
    episodes_.pop_front();
  }
}

std::vector<ReplaySample> ReplayBuffer::Sample(int batch, double exponent, double is_beta,
                                               RngStream& rng) const {
  if (positions_ == 0) Fail(ErrorKind::kInvalidArgument, "sampling from an empty buffer");
  std::vector<double> cumulative;
  cumulative.reserve(positions_);
  double total = 0.0;
  for (const Episode& ep : episodes_) {
    for (double p : ep.priorities) {
      total += std::pow(p, exponent);
      cumulative.push_back(total);
    }
  }
  if (!(total > 0.0)) Fail(ErrorKind::kInvalidArgument, "priorities have no mass");
  std::vector<ReplaySample> out;
  out.reserve(batch);
  double max_weight = 0.0;
  for (int b = 0; b < batch; ++b) {
    const double u = rng.Uniform() * total;
    std::size_t flat = static_cast<std::size_t>(
        std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
    flat = std::min(flat, cumulative.size() - 1);
    const double mass = cumulative[flat] - (flat ? cumulative[flat - 1] : 0.0);
    ReplaySample s;
    s.probability = mass / total;
    std::size_t e = 0;
    while (flat >= static_cast<std::size_t>(episodes_[e].length())) {
      flat -= static_cast<std::size_t>(episodes_[e].length());
      ++e;
    }
    s.episode = e;
    s.t = static_cast<int>(flat);
    s.weight = std::pow(1.0 / (s.probability * static_cast<double>(positions_)), is_beta);
    max_weight = std::max(max_weight, s.weight);
    out.push_back(s);
  }
  for (auto& s : out) s.weight /= max_weight;
  return out;
}

void ReplayBuffer::UpdatePriority(std::size_t episode, int t, double priority) {
  if (!(priority >= 0.0) || !std::isfinite(priority)) {
    Fail(ErrorKind::kInvalidArgument, "priority must be finite and nonnegative");
  }
  episodes_.at(episode).priorities.at(static_cast<std::size_t>(t)) = priority;
}

}  // namespace mazero
