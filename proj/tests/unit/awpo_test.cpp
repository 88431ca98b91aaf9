#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "mazero/awpo.hpp"
#include "mazero/oracles/oracles.hpp"
#include "mazero/oracles/suites.hpp"

namespace mazero {
namespace {

PolicyTarget SingleAgentTarget(std::vector<double> omega, std::vector<double> adv, double alpha) {
  PolicyTarget t;
  for (std::size_t i = 0; i < omega.size(); ++i) t.actions.push_back(JointAction{static_cast<int>(i)});
  t.visit_policy = std::move(omega);
  t.advantages = std::move(adv);
  t.alpha = alpha;
  return t;
}

TEST(AwpoWeights, ZeroAdvantageIsBehaviorCloning) {
  const PolicyTarget t = SingleAgentTarget({0.2, 0.5, 0.3}, {0.0, 0.0, 0.0}, 3.0);
  EXPECT_EQ(awpo_weights(t), t.visit_policy);
}

TEST(AwpoWeights, ShiftedExample) {
  const double alpha = 3.0;
  const PolicyTarget t = SingleAgentTarget({0.5, 0.5}, {alpha * std::log(2.0), 0.0}, alpha);
  const std::vector<double> w = awpo_weights(t);
  EXPECT_NEAR(w[0], 0.5, 1e-15);
  EXPECT_NEAR(w[1], 0.25, 1e-15);
}

TEST(AwpoWeights, OneHotOmegaStaysOneHot) {
  const PolicyTarget t = SingleAgentTarget({0.0, 1.0, 0.0}, {5.0, -2.0, 9.0}, 1.0);
  const std::vector<double> w = awpo_weights(t);
  EXPECT_EQ(w[0], 0.0);
  EXPECT_GT(w[1], 0.0);
  EXPECT_EQ(w[2], 0.0);
}

TEST(AwpoWeights, DisabledReturnsOmega) {
  const PolicyTarget t = SingleAgentTarget({0.4, 0.6}, {1.0, -1.0}, 3.0);
  EXPECT_EQ(awpo_weights(t, AwpoOptions{false, true}), t.visit_policy);
}

TEST(AwpoWeights, StandardizedIsScaleFree) {
  const PolicyTarget a = SingleAgentTarget({0.3, 0.3, 0.4}, {1.0, 2.0, 4.0}, 3.0);
  const PolicyTarget b = SingleAgentTarget({0.3, 0.3, 0.4}, {10.0, 20.0, 40.0}, 3.0);
  const std::vector<double> wa = awpo_weights(a, AwpoOptions{true, false});
  const std::vector<double> wb = awpo_weights(b, AwpoOptions{true, false});
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(wa[i], wb[i], 1e-15);
}

TEST(AwpoWeights, NanAdvantageIsRejected) {
  const PolicyTarget t = SingleAgentTarget({0.5, 0.5}, {std::nan(""), 0.0}, 3.0);
  try {
    awpo_weights(t);
    FAIL() << "expected kNanDetected";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kNanDetected);
  }
}

TEST(AwpoWeights, MismatchedTargetIsRejected) {
  PolicyTarget t = SingleAgentTarget({0.5, 0.5}, {0.0, 0.0}, 3.0);
  t.advantages.pop_back();
  EXPECT_THROW(awpo_weights(t), Error);
  t = SingleAgentTarget({0.5, 0.5}, {0.0, 0.0}, 0.0);
  EXPECT_THROW(awpo_weights(t), Error);
}

TEST(AwpoLoss, UniformPolicyGivesLogTwo) {
  const std::vector<std::vector<double>> logits{{0.0, 0.0}};
  const std::vector<JointAction> actions{JointAction{0}, JointAction{1}};
  const std::vector<double> w{0.5, 0.5};
  EXPECT_NEAR(awpo_loss(logits, actions, w).loss, std::log(2.0), 1e-15);
}

TEST(AwpoLoss, MinimizedWhenPolicyMatchesWeights) {
  const std::vector<JointAction> actions{JointAction{0}, JointAction{1}, JointAction{2}};
  const std::vector<double> w{0.2, 0.3, 0.5};
  const std::vector<std::vector<double>> best{{std::log(0.2), std::log(0.3), std::log(0.5)}};
  const double at_best = awpo_loss(best, actions, w).loss;
  RngStream rng(1, 0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::vector<double>> other = best;
    for (double& l : other[0]) l += 0.3 * rng.Normal();
    EXPECT_GE(awpo_loss(other, actions, w).loss, at_best - 1e-15);
  }
  const AwpoLossResult r = awpo_loss(best, actions, w);
  for (double g : r.grad_logits[0]) EXPECT_NEAR(g, 0.0, 1e-15);
}

TEST(AwpoLoss, GradientMatchesFiniteDifferences) {
  const std::vector<JointAction> actions{JointAction{0}, JointAction{2}};
  const std::vector<double> w{0.7, 0.2};
  const std::vector<double> x0{0.3, -1.2, 0.8};
  const auto f = [&](const std::vector<double>& x) { return awpo_loss({x}, actions, w).loss; };
  const AwpoLossResult r = awpo_loss({x0}, actions, w);
  for (std::size_t i = 0; i < 3; ++i) {
    const double fd = oracle::CentralDifference(f, x0, i, 1e-3);
    EXPECT_LE(oracle::RelativeError(r.grad_logits[0][i], fd, verify::kGradientFloor), 1e-5) << i;
  }
}

TEST(AwpoLoss, JointEqualsSumOfMarginalCrossEntropies) {
  const std::vector<JointAction> actions{{0, 1}, {1, 1}, {2, 0}};
  const std::vector<double> w{0.1, 0.6, 0.3};
  const std::vector<std::vector<double>> logits{{0.2, -0.1, 0.5}, {1.0, -1.0}};
  const auto m = MarginalTargets(actions, w, {3, 2});
  double ce = 0.0;
  for (int i = 0; i < 2; ++i) {
    const std::vector<double> p = Softmax(logits[i]);
    for (std::size_t b = 0; b < p.size(); ++b) ce -= m[i][b] * std::log(p[b]);
  }
  EXPECT_NEAR(awpo_loss(logits, actions, w).loss, ce, 1e-14);
  EXPECT_NEAR(m[0][1], 0.6, 1e-15);
  EXPECT_NEAR(m[1][1], 0.7, 1e-15);
  EXPECT_THROW(MarginalTargets(actions, w, {2, 2}), Error);
}

TEST(AwpoLoss, ZeroProbabilityIsClamped) {
  const std::vector<std::vector<double>> logits{{0.0, -1e6}};
  const std::vector<JointAction> actions{JointAction{1}};
  const std::vector<double> w{1.0};
  const AwpoLossResult r = awpo_loss(logits, actions, w);
  EXPECT_TRUE(std::isfinite(r.loss));
  EXPECT_EQ(r.clamped, 1);
}

TEST(EtaStar, ConstantAdvantageReturnsPi) {
  const std::vector<double> pi{0.1, 0.2, 0.3, 0.4};
  const std::vector<double> a(4, 1.7);
  EXPECT_EQ(eta_star(pi, a, 3.0).eta, pi);
}

TEST(EtaStar, LogThreeExample) {
  const double alpha = 2.0;
  const std::vector<double> pi{0.5, 0.5};
  const std::vector<double> a{alpha * std::log(3.0), 0.0};
  const EtaStar e = eta_star(pi, a, alpha);
  EXPECT_NEAR(e.eta[0], 0.75, 1e-15);
  EXPECT_NEAR(e.eta[1], 0.25, 1e-15);
  EXPECT_NEAR(e.normalizer, 2.0, 1e-14);
  EXPECT_LE(kkt_residual(e.eta, pi, a, alpha), 1e-8);
}

TEST(EtaStar, LargeTemperatureApproachesPi) {
  const std::vector<double> pi{0.25, 0.6, 0.15};
  const std::vector<double> a{3.0, -2.0, 1.0};
  const EtaStar e = eta_star(pi, a, 1e9);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(e.eta[i], pi[i], 1e-6);
}

TEST(EtaStar, HugeAdvantagesStayFinite) {
  const std::vector<double> pi{0.5, 0.5};
  const std::vector<double> a{5000.0, 0.0};
  const EtaStar e = eta_star(pi, a, 1.0);
  EXPECT_NEAR(e.eta[0], 1.0, 1e-15);
  EXPECT_TRUE(std::isfinite(e.log_normalizer));
}

TEST(KktResidual, PiWithNonconstantAdvantage) {
  const std::vector<double> pi{0.5, 0.3, 0.2};
  const std::vector<double> a{1.0, 2.0, 6.0};
  EXPECT_NEAR(kkt_residual(pi, pi, a, 3.0), 3.0, 1e-12);
}

TEST(KktResidual, SingleActionIsZero) {
  const std::vector<double> one{1.0};
  const std::vector<double> a{4.2};
  EXPECT_EQ(kkt_residual(one, one, a, 3.0), 0.0);
}

TEST(KktResidual, SupportMismatchIsReported) {
  const std::vector<double> eta{1.0, 0.0};
  const std::vector<double> pi{0.5, 0.5};
  const std::vector<double> a{0.0, 0.0};
  try {
    kkt_residual(eta, pi, a, 3.0);
    FAIL() << "expected kSupportMismatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kSupportMismatch);
  }
}

TEST(AwpoSuites, QuickRun) {
  verify::VerifyOptions o;
  o.awpo_instances = 200;
  o.seed = 5;
  for (const auto& r : {verify::AwpoKktSuite(o), verify::AwpoConstantSuite(o),
                        verify::AwpoGradientSuite(o)}) {
    EXPECT_TRUE(r.pass) << r.suite << ": " << r.detail;
  }
}

}  // namespace
}  // namespace mazero
