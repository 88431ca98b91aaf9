#include "mazero/envs/gridworld.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace mazero {

bool GridworldSpec::IsGoal(int cell) const {
  const int x = cell % width, y = cell / width;
  for (const auto& g : goals) {
    if (g[0] == x && g[1] == y) return true;
  }
  return false;
}

int GridworldSpec::ObservationLength() const {
  const int side = 2 * view_radius + 1;
  return 2 + 3 * side * side;
}

void GridworldSpec::Validate() const {
  if (width < 1 || height < 1 || view_radius < 0 || horizon < 1 || goals.empty()) {
    Fail(ErrorKind::kInvalidArgument, "invalid gridworld spec");
  }
  const std::int64_t states = std::int64_t{cells()} * cells() + 1;
  if (states > kMaxStates) {
    Fail(ErrorKind::kSizeOverflow,
         "gridworld joint state space has " + std::to_string(states) + " states, limit " +
             std::to_string(kMaxStates));
  }
  for (const auto& g : goals) {
    if (g[0] < 0 || g[0] >= width || g[1] < 0 || g[1] >= height) {
      Fail(ErrorKind::kInvalidArgument, "goal cell outside the grid");
    }
  }
}

void GridworldSpec::Load(const ConfigMap& m) {
  m.Get("env.width", width);
  m.Get("env.height", height);
  m.Get("env.view_radius", view_radius);
  m.Get("env.horizon", horizon);
  m.Get("env.goal_reward", goal_reward);
  m.Get("env.step_penalty", step_penalty);
  if (m.Has("env.goals")) {
    std::string raw;
    m.Get("env.goals", raw);
    goals.clear();
    std::stringstream ss(raw);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item.empty()) continue;
      const auto colon = item.find(':');
      try {
        if (colon == std::string::npos) throw std::invalid_argument(item);
        goals.push_back({std::stoi(item.substr(0, colon)), std::stoi(item.substr(colon + 1))});
      } catch (const std::exception&) {
        Fail(ErrorKind::kUsage, "env.goals: expected x:y pairs, got '" + item + "'");
      }
    }
  }
  Validate();
}

void GridworldSpec::Store(ConfigMap& m) const {
  m.Set("env.name", "gridworld");
  m.Set("env.width", std::to_string(width));
  m.Set("env.height", std::to_string(height));
  m.Set("env.view_radius", std::to_string(view_radius));
  m.Set("env.horizon", std::to_string(horizon));
  m.Set("env.goal_reward", FormatDouble(goal_reward));
  m.Set("env.step_penalty", FormatDouble(step_penalty));
  std::string g;
  for (std::size_t i = 0; i < goals.size(); ++i) {
    g += (i ? "," : "") + std::to_string(goals[i][0]) + ":" + std::to_string(goals[i][1]);
  }
  m.Set("env.goals", g);
}

GridworldEnv::GridworldEnv(GridworldSpec spec) : spec_(std::move(spec)) { spec_.Validate(); }

std::vector<int> GridworldEnv::action_sizes() const {
  return std::vector<int>(GridworldSpec::kNumAgents, GridworldSpec::kNumActions);
}

int GridworldEnv::Move(int cell, int action) const {
  int x = cell % spec_.width, y = cell / spec_.width;
  switch (action) {
    case 1: y = std::max(y - 1, 0); break;
    case 2: y = std::min(y + 1, spec_.height - 1); break;
    case 3: x = std::max(x - 1, 0); break;
    case 4: x = std::min(x + 1, spec_.width - 1); break;
    default: break;
  }
  return y * spec_.width + x;
}

TabularStep GridworldEnv::Transition(std::int64_t state, const JointAction& a) const {
  if (state == TerminalToken()) return {state, 0.0, true};
  if (state < 0 || state > TerminalToken()) Fail(ErrorKind::kInvalidArgument, "bad gridworld token");
  CheckJointAction(a, action_sizes());
  const int c = spec_.cells();
  const int p0 = Move(static_cast<int>(state / c), a[0]);
  const int p1 = Move(static_cast<int>(state % c), a[1]);
  if (spec_.IsGoal(p0) && spec_.IsGoal(p1)) return {TerminalToken(), spec_.goal_reward, true};
  return {std::int64_t{p0} * c + p1, -spec_.step_penalty, false};
}

ObservationFrame GridworldEnv::Observe(std::int64_t token) const {
  const int c = spec_.cells();
  const int w = spec_.width, h = spec_.height, r = spec_.view_radius;
  const int pos[2] = {static_cast<int>(token / c), static_cast<int>(token % c)};
  ObservationFrame obs = ObservationFrame::Zero(2, spec_.ObservationLength());
  for (int i = 0; i < 2; ++i) {
    const int x = pos[i] % w, y = pos[i] / w;
    const int ox = pos[1 - i] % w, oy = pos[1 - i] / w;
    obs(i, 0) = w > 1 ? static_cast<double>(x) / (w - 1) : 0.0;
    obs(i, 1) = h > 1 ? static_cast<double>(y) / (h - 1) : 0.0;
    int col = 2;
    for (int dy = -r; dy <= r; ++dy) {
      for (int dx = -r; dx <= r; ++dx, col += 3) {
        const int cx = x + dx, cy = y + dy;
        if (cx < 0 || cx >= w || cy < 0 || cy >= h) {
          obs(i, col) = 1.0;
          continue;
        }
        if (spec_.IsGoal(cy * w + cx)) obs(i, col + 1) = 1.0;
        if (cx == ox && cy == oy) obs(i, col + 2) = 1.0;
      }
    }
  }
  return obs;
}

std::int64_t GridworldEnv::DecodeState(const ObservationHistory& obs) const {
  const ObservationFrame& f = obs.Latest();
  if (f.rows() != 2 || f.cols() != spec_.ObservationLength()) {
    Fail(ErrorKind::kDimensionMismatch, "gridworld observation has the wrong shape");
  }
  int pos[2];
  for (int i = 0; i < 2; ++i) {
    const int x = static_cast<int>(std::lround(f(i, 0) * (spec_.width - 1)));
    const int y = static_cast<int>(std::lround(f(i, 1) * (spec_.height - 1)));
    pos[i] = y * spec_.width + x;
  }
  return std::int64_t{pos[0]} * spec_.cells() + pos[1];
}

ObservationFrame GridworldEnv::DoReset(RngStream& rng) {
  const auto c = static_cast<std::uint64_t>(spec_.cells());
  const auto p0 = static_cast<std::int64_t>(rng.UniformInt(c));
  const auto p1 = static_cast<std::int64_t>(rng.UniformInt(c));
  token_ = p0 * spec_.cells() + p1;
  return Observe(token_);
}

EnvStep GridworldEnv::DoStep(const JointAction& a, RngStream&) {
  const TabularStep s = Transition(token_, a);
  // On success the final frame still shows where the agents ended up.
  const int c = spec_.cells();
  token_ = std::int64_t{Move(static_cast<int>(token_ / c), a[0])} * c +
           Move(static_cast<int>(token_ % c), a[1]);
  return {Observe(token_), s.reward, s.terminal};
}

namespace {

double GreedyQ(const GridworldEnv& env, const std::vector<double>& v, double discount,
               std::int64_t token, const JointAction& a) {
  const TabularStep s = env.Transition(token, a);
  return s.reward + (s.terminal ? 0.0 : discount * v[s.next]);
}

}  // namespace

JointAction GridworldGreedyAction(const GridworldEnv& env, const GridworldSolution& sol,
                                  std::int64_t token) {
  JointAction best{0, 0};
  double best_q = -std::numeric_limits<double>::infinity();
  for (int a0 = 0; a0 < GridworldSpec::kNumActions; ++a0) {
    for (int a1 = 0; a1 < GridworldSpec::kNumActions; ++a1) {
      const JointAction a{a0, a1};
      const double q = GreedyQ(env, sol.values, sol.discount, token, a);
      if (q > best_q) {
        best_q = q;
        best = a;
      }
    }
  }
  return best;
}

GridworldSolution gridworld_value_iteration(const GridworldSpec& spec, double discount,
                                            double tol) {
  if (!(discount >= 0.0 && discount < 1.0)) {
    Fail(ErrorKind::kInvalidArgument, "value iteration needs discount in [0, 1)");
  }
  const GridworldEnv env(spec);
  const std::int64_t n = env.num_states();
  GridworldSolution sol;
  sol.discount = discount;
  sol.values.assign(static_cast<std::size_t>(n), 0.0);
  std::vector<double> next(sol.values.size(), 0.0);
  for (;;) {
    double delta = 0.0;
    for (std::int64_t s = 0; s < env.TerminalToken(); ++s) {
      double best = -std::numeric_limits<double>::infinity();
      for (int a0 = 0; a0 < GridworldSpec::kNumActions; ++a0) {
        for (int a1 = 0; a1 < GridworldSpec::kNumActions; ++a1) {
          best = std::max(best, GreedyQ(env, sol.values, discount, s, JointAction{a0, a1}));
        }
      }
      next[s] = best;
      delta = std::max(delta, std::abs(best - sol.values[s]));
    }
    sol.values.swap(next);
    ++sol.iterations;
    if (delta < tol) break;
  }
  double total = 0.0;
  for (std::int64_t start = 0; start < env.TerminalToken(); ++start) {
    std::int64_t s = start;
    double ret = 0.0;
    for (int t = 0; t < spec.horizon; ++t) {
      const TabularStep step = env.Transition(s, GridworldGreedyAction(env, sol, s));
      ret += step.reward;
      if (step.terminal) break;
      s = step.next;
    }
    total += ret;
  }
  sol.optimal_return = total / static_cast<double>(env.TerminalToken());
  return sol;
}

}  // namespace mazero
