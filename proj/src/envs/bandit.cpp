#include "mazero/envs/bandit.hpp"

#include <cmath>
#include <ostream>

#include "mazero/config.hpp"

namespace mazero {

BanditEnv::BanditEnv(BanditSpec spec) : spec_(spec) {
  if (spec_.arms < 1 || spec_.sampling < 1) Fail(ErrorKind::kInvalidArgument, "bad bandit spec");
}

TabularStep BanditEnv::Transition(std::int64_t state, const JointAction& a) const {
  if (state == 1) return {1, 0.0, true};
  CheckJointAction(a, action_sizes());
  return {1, spec_.value(a[0]), true};
}

ObservationFrame BanditEnv::DoReset(RngStream&) { return ObservationFrame::Ones(1, 1); }

EnvStep BanditEnv::DoStep(const JointAction& a, RngStream&) {
  return {ObservationFrame::Ones(1, 1), spec_.value(a[0]), true};
}

std::vector<double> bandit_t(std::span<const double> pi, int k) {
  if (k < 1) Fail(ErrorKind::kInvalidArgument, "bandit_t needs k >= 1");
  std::vector<double> t(pi.size());
  double below = 0.0;
  for (std::size_t a = 0; a < pi.size(); ++a) {
    const double upto = below + pi[a];
    t[a] = std::pow(upto, k) - std::pow(below, k);
    below = upto;
  }
  return t;
}

std::vector<double> bandit_adv(int arms) {
  if (arms < 2) Fail(ErrorKind::kInvalidArgument, "bandit_adv needs at least two arms");
  // Sample std of 0..n-1 is sqrt(n(n+1)/12); for n = 100 this is sqrt(2525/3).
  const double n = arms;
  const double mid = (n - 1.0) / 2.0;
  const double inv_sd = std::sqrt(12.0 / (n * (n + 1.0)));
  std::vector<double> adv(arms);
  for (int a = 0; a < arms; ++a) adv[a] = (a - mid) * inv_sd;
  return adv;
}

namespace {

// -sum_a w(a) log softmax(theta)(a) and its gradient pi * sum(w) - w.
double WeightedXent(std::span<const double> theta, std::span<const double> w,
                    std::vector<double>& grad) {
  const std::vector<double> pi = Softmax(theta);
  double m = theta[0];
  for (double x : theta) m = std::max(m, x);
  double z = 0.0;
  for (double x : theta) z += std::exp(x - m);
  const double lse = m + std::log(z);
  double loss = 0.0, total = 0.0;
  for (std::size_t a = 0; a < theta.size(); ++a) {
    loss -= w[a] * (theta[a] - lse);
    total += w[a];
  }
  grad.resize(theta.size());
  for (std::size_t a = 0; a < theta.size(); ++a) grad[a] = pi[a] * total - w[a];
  return loss;
}

}  // namespace

BanditLosses bandit_expected_losses(std::span<const double> theta_bc,
                                    std::span<const double> theta_awpo, int k,
                                    std::span<const double> adv) {
  if (theta_bc.size() != theta_awpo.size() || theta_bc.empty()) {
    Fail(ErrorKind::kDimensionMismatch, "bandit losses need equal-length parameter vectors");
  }
  std::vector<double> default_adv;
  if (adv.empty()) {
    default_adv = bandit_adv(static_cast<int>(theta_bc.size()));
    adv = default_adv;
  }
  if (adv.size() != theta_bc.size()) Fail(ErrorKind::kDimensionMismatch, "adv length mismatch");
  BanditLosses out;
  const std::vector<double> t_bc = bandit_t(Softmax(theta_bc), k);
  out.l_bc = WeightedXent(theta_bc, t_bc, out.grad_bc);
  std::vector<double> w = bandit_t(Softmax(theta_awpo), k);
  for (std::size_t a = 0; a < w.size(); ++a) w[a] *= std::exp(adv[a]);
  out.l_awpo = WeightedXent(theta_awpo, w, out.grad_awpo);
  return out;
}

void BanditExperimentConfig::Load(const ConfigMap& m) {
  m.Get("bandit.arms", arms);
  m.Get("bandit.sampling", sampling);
  m.Get("bandit.lr", lr);
  m.Get("bandit.steps", steps);
  m.Get("bandit.init_scale", init_scale);
  if (m.Has("bandit.seeds")) {
    std::string raw;
    m.Get("bandit.seeds", raw);
    seeds.clear();
    std::size_t pos = 0;
    while (pos <= raw.size()) {
      const std::size_t next = std::min(raw.find(',', pos), raw.size());
      const std::string item = raw.substr(pos, next - pos);
      if (!item.empty()) {
        try {
          seeds.push_back(std::stoull(item));
        } catch (const std::exception&) {
          Fail(ErrorKind::kUsage, "bandit.seeds: bad seed '" + item + "'");
        }
      }
      pos = next + 1;
    }
  }
  if (arms < 2 || sampling < 1 || steps < 0 || !(lr > 0.0) || seeds.empty()) {
    Fail(ErrorKind::kUsage, "invalid bandit experiment configuration");
  }
}

void BanditExperimentConfig::Store(ConfigMap& m) const {
  m.Set("bandit.arms", std::to_string(arms));
  m.Set("bandit.sampling", std::to_string(sampling));
  m.Set("bandit.lr", FormatDouble(lr));
  m.Set("bandit.steps", std::to_string(steps));
  m.Set("bandit.init_scale", FormatDouble(init_scale));
  std::string s;
  for (std::size_t i = 0; i < seeds.size(); ++i) s += (i ? "," : "") + std::to_string(seeds[i]);
  m.Set("bandit.seeds", s);
}

std::vector<BanditCurvePoint> bandit_experiment(const BanditExperimentConfig& config) {
  const std::vector<double> adv = bandit_adv(config.arms);
  std::vector<BanditCurvePoint> points;
  auto expected_value = [](std::span<const double> theta) {
    const std::vector<double> pi = Softmax(theta);
    double e = 0.0;
    for (std::size_t a = 0; a < pi.size(); ++a) e += pi[a] * static_cast<double>(a);
    return e;
  };
  for (std::uint64_t seed : config.seeds) {
    RngStream rng = RngStream(seed, 0).Split("bandit-init");
    std::vector<double> theta(config.arms);
    for (double& x : theta) x = config.init_scale * rng.Normal();
    std::vector<double> bc = theta, aw = theta;
    for (int step = 0; step < config.steps; ++step) {
      const BanditLosses l = bandit_expected_losses(bc, aw, config.sampling, adv);
      points.push_back({seed, step, l.l_bc, l.l_awpo, expected_value(bc), expected_value(aw)});
      for (int a = 0; a < config.arms; ++a) {
        bc[a] -= config.lr * l.grad_bc[a];
        aw[a] -= config.lr * l.grad_awpo[a];
      }
    }
  }
  return points;
}

void WriteBanditCsv(const std::vector<BanditCurvePoint>& points, std::ostream& out) {
  out << "seed,step,loss_bc,loss_awpo,value_bc,value_awpo\n";
  for (const auto& p : points) {
    out << p.seed << ',' << p.step << ',' << FormatDouble(p.loss_bc) << ','
        << FormatDouble(p.loss_awpo) << ',' << FormatDouble(p.value_bc) << ','
        << FormatDouble(p.value_awpo) << '\n';
  }
}

}  // namespace mazero
