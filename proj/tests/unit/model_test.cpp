#include <gtest/gtest.h>

#include <cmath>

#include "mazero/envs/gridworld.hpp"
#include "mazero/envs/matrix_game.hpp"
#include "mazero/model/learned_model.hpp"
#include "mazero/model/tabular_model.hpp"
#include "mazero/nn/tape.hpp"

namespace mazero {
namespace {

ModelConfig SmallConfig(int agents = 2) {
  ModelConfig c;
  c.num_agents = agents;
  c.action_size = 3;
  c.obs_features = 4;
  c.stack_depth = 2;
  c.latent_dim = 6;
  c.repr_hidden = {8};
  c.dyn_hidden = {8};
  c.reward_hidden = {4};
  c.value_hidden = {4};
  c.policy_hidden = {4};
  return c;
}

ObservationHistory FixtureObs(int agents, int features, int depth) {
  ObservationHistory h(agents, features, depth);
  ObservationFrame f(agents, features);
  for (int i = 0; i < agents; ++i) {
    for (int j = 0; j < features; ++j) f(i, j) = 0.1 * (i + 1) - 0.05 * j;
  }
  h.Reset(f);
  h.Push(f * -0.5);
  return h;
}

std::shared_ptr<ModelParams> SeededParams(const ModelConfig& c, std::uint64_t seed = 0) {
  RngStream rng(seed, 0);
  return std::make_shared<ModelParams>(InitParams(c, rng));
}

void ZeroMatching(ModelParams& p, const std::string& prefix, const std::string& suffix) {
  for (auto& [name, m] : p.tensors) {
    const bool pre = name.rfind(prefix, 0) == 0;
    const bool suf = name.size() >= suffix.size() &&
                     name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0;
    if (pre && suf) m.setZero();
  }
}

TEST(ObservationHistory, ZeroPaddedAndOldestFirst) {
  ObservationHistory h(1, 2, 3);
  ObservationFrame a(1, 2), b(1, 2);
  a << 1, 2;
  b << 3, 4;
  h.Reset(a);
  h.Push(b);
  const RowMatrix s = h.Stacked();
  ASSERT_EQ(s.cols(), 6);
  EXPECT_EQ(s(0, 0), 0.0);
  EXPECT_EQ(s(0, 1), 0.0);
  EXPECT_EQ(s(0, 2), 1.0);
  EXPECT_EQ(s(0, 5), 4.0);
  EXPECT_THROW(h.Push(ObservationFrame::Zero(2, 2)), Error);
}

TEST(TabularModel, RepresentationKeepsToken) {
  GridworldEnv env;
  TabularModel model(env);
  for (std::int64_t token : {0, 7, 312, 624}) {
    ObservationHistory h(2, env.observation_length(), 4);
    h.Reset(env.Observe(token));
    EXPECT_EQ(TabularModel::Token(model.Represent(h)), token);
  }
}

TEST(TabularModel, StepMatchesEnvironment) {
  GridworldEnv env;
  TabularModel model(env);
  for (std::int64_t token = 0; token < 625; token += 37) {
    for (int a0 = 0; a0 < 5; ++a0) {
      const JointAction a{a0, 4 - a0};
      const TabularStep truth = env.Transition(token, a);
      const ModelTransition t = model.Step(TabularModel::Encode(token, 2), a);
      EXPECT_EQ(TabularModel::Token(t.next), truth.next);
      EXPECT_EQ(t.reward, truth.reward);
    }
  }
}

TEST(TabularModel, MatrixGameRewardIsPayoff) {
  MatrixGameSpec spec{2, 2, {1.0, 0.0, 0.0, 0.0}};
  MatrixGameEnv env(spec);
  TabularModel model(env);
  EXPECT_EQ(model.Step(TabularModel::Encode(0, 2), JointAction{0, 0}).reward, 1.0);
  EXPECT_EQ(model.Step(TabularModel::Encode(0, 2), JointAction{1, 0}).reward, 0.0);
}

TEST(TabularModel, ValueTableGivesOptimalValues) {
  GridworldEnv env;
  const GridworldSolution sol = gridworld_value_iteration(env.spec(), 0.99);
  TabularModel model(env, sol.values);
  for (std::int64_t token = 0; token < 626; token += 25) {
    EXPECT_DOUBLE_EQ(model.Predict(TabularModel::Encode(token, 2)).value, sol.values[token]);
  }
  TabularModel plain(env);
  const Prediction p = plain.Predict(TabularModel::Encode(3, 2));
  EXPECT_EQ(p.value, 0.0);
  EXPECT_EQ(p.policy_logits[0], p.policy_logits[1]);
}

TEST(LearnedModel, ZeroWeightsGiveBiasPerAgent) {
  const ModelConfig c = SmallConfig();
  auto params = SeededParams(c);
  ZeroMatching(*params, "repr.", ".W");
  LearnedModel model(c, params);
  const LatentState s = model.Represent(FixtureObs(2, 4, 2));
  const nn::Matrix& bias = params->at("repr.out.b");
  for (int i = 0; i < 2; ++i) {
    for (int d = 0; d < c.latent_dim; ++d) EXPECT_DOUBLE_EQ(s.agents(i, d), bias(0, d));
  }
}

TEST(LearnedModel, SingleAgentCommunicationIsValueProjection) {
  ModelConfig c = SmallConfig(1);
  auto params = SeededParams(c, 3);
  LearnedModel model(c, params);
  const LatentState s = model.Represent(FixtureObs(1, 4, 2));
  const JointAction a{2};
  nn::Matrix in(1, c.latent_dim + c.action_size);
  in << s.agents, nn::Matrix::Zero(1, c.action_size);
  in(0, c.latent_dim + 2) = 1.0;
  const nn::Matrix u = in * params->at("comm.enc.W") + params->at("comm.enc.b") + params->at("comm.pos");
  const nn::Matrix v = u * params->at("comm.a0.v.W") + params->at("comm.a0.v.b");
  const RowMatrix e = model.Communication(s, a);
  ASSERT_EQ(e.rows(), 1);
  for (int d = 0; d < c.latent_dim; ++d) EXPECT_NEAR(e(0, d), v(0, d), 1e-12);
}

TEST(LearnedModel, IdenticalAgentsWithoutPositionsCommunicateIdentically) {
  ModelConfig c = SmallConfig();
  c.positional_encoding = false;
  c.comm_layers = 2;
  LearnedModel model(c, SeededParams(c, 5));
  LatentState s;
  s.agents = RowMatrix::Zero(2, c.latent_dim);
  for (int d = 0; d < c.latent_dim; ++d) s.agents(0, d) = s.agents(1, d) = 0.3 * d - 0.4;
  const RowMatrix e = model.Communication(s, JointAction{1, 1});
  for (int d = 0; d < c.latent_dim; ++d) EXPECT_DOUBLE_EQ(e(0, d), e(1, d));
}

TEST(Tape, AttentionWeightsByHand) {
  nn::Tape tape;
  nn::Matrix q(2, 2), k(2, 2), v(2, 2);
  q << 1, 0, 0, 2;
  k << 1, 1, 0, 1;
  v << 1, 2, 3, 4;
  const nn::Var out = tape.Attention(tape.Constant(q), tape.Constant(k), tape.Constant(v), 2);
  const nn::Matrix& w = tape.LastAttentionWeights();
  // Row 0 scores: (1, 0) / sqrt 2; row 1 scores: (2, 2) / sqrt 2.
  const double e = std::exp(1.0 / std::sqrt(2.0));
  EXPECT_NEAR(w(0, 0), e / (e + 1.0), 1e-15);
  EXPECT_NEAR(w(0, 1), 1.0 / (e + 1.0), 1e-15);
  EXPECT_NEAR(w(1, 0), 0.5, 1e-15);
  EXPECT_NEAR(w(1, 1), 0.5, 1e-15);
  const nn::Matrix& y = tape.value(out);
  EXPECT_NEAR(y(0, 0), w(0, 0) * 1 + w(0, 1) * 3, 1e-15);
  EXPECT_NEAR(y(1, 1), 3.0, 1e-15);
}

TEST(LearnedModel, ZeroDynamicsIsResidualIdentity) {
  const ModelConfig c = SmallConfig();
  auto params = SeededParams(c, 2);
  ZeroMatching(*params, "dyn.", ".W");
  ZeroMatching(*params, "dyn.", ".b");
  LearnedModel model(c, params);
  const LatentState s = model.Represent(FixtureObs(2, 4, 2));
  const ModelTransition t = model.Step(s, JointAction{0, 2});
  EXPECT_TRUE(t.next.agents.isApprox(s.agents, 0.0) || t.next.agents == s.agents);
}

TEST(LearnedModel, UniformRewardLogitsGiveZeroReward) {
  const ModelConfig c = SmallConfig();
  auto params = SeededParams(c, 2);
  ZeroMatching(*params, "reward.out", ".W");
  ZeroMatching(*params, "reward.out", ".b");
  LearnedModel model(c, params);
  const LatentState s = model.Represent(FixtureObs(2, 4, 2));
  EXPECT_NEAR(model.Step(s, JointAction{1, 0}).reward, 0.0, 1e-14);
}

TEST(LearnedModel, PredictShapes) {
  const ModelConfig c = SmallConfig();
  LearnedModel model(c, SeededParams(c));
  const Prediction p = model.Predict(model.Represent(FixtureObs(2, 4, 2)));
  ASSERT_EQ(p.policy_logits.size(), 2u);
  EXPECT_EQ(p.policy_logits[0].size(), 3u);
  EXPECT_TRUE(std::isfinite(p.value));
}

TEST(LearnedModel, ShapeMismatchesAreReported) {
  const ModelConfig c = SmallConfig();
  LearnedModel model(c, SeededParams(c));
  try {
    model.Represent(FixtureObs(2, 5, 2));
    FAIL() << "expected a dimension mismatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDimensionMismatch);
  }
  const LatentState s = model.Represent(FixtureObs(2, 4, 2));
  EXPECT_THROW(model.Step(s, JointAction{3, 0}), Error);
  EXPECT_THROW(model.Step(s, JointAction{0}), Error);
}

// Frozen regression fixture: seed-0 parameters of SmallConfig on FixtureObs.
TEST(LearnedModel, GoldenLatentAndDynamics) {
  const ModelConfig c = SmallConfig();
  LearnedModel model(c, SeededParams(c, 0));
  const LatentState s = model.Represent(FixtureObs(2, 4, 2));
  const ModelTransition t = model.Step(s, JointAction{1, 2});
  const double golden_latent[6] = {-0.25895296374632099, -1.1521712249832072, 0.53161012623938309,
                                   0.58444801262731616,  0.41825769098406507, -0.58565231258135275};
  const double golden_next[6] = {-0.73940395469817721, -0.63731947575521897, 0.65466060909979107,
                                 -0.45376609870580958, 1.085770805246888,    -0.0041019019422025016};
  for (int d = 0; d < 6; ++d) {
    EXPECT_NEAR(s.agents(0, d), golden_latent[d], 1e-12) << d;
    EXPECT_NEAR(t.next.agents(1, d), golden_next[d], 1e-12) << d;
  }
}

TEST(Checkpoint, RoundTripIsExact) {
  const ModelConfig c = SmallConfig();
  Checkpoint ck;
  ck.params = *SeededParams(c, 9);
  ck.params.version = 42;
  ck.config.Set("model.latent_dim", "6");
  ck.seed = 17;
  const Checkpoint back = ParseCheckpoint(SerializeCheckpoint(ck));
  EXPECT_EQ(back.seed, 17u);
  EXPECT_EQ(back.params.version, 42u);
  EXPECT_EQ(back.config.values(), ck.config.values());
  ASSERT_EQ(back.params.tensors.size(), ck.params.tensors.size());
  for (const auto& [name, m] : ck.params.tensors) EXPECT_EQ(back.params.at(name), m) << name;
}

TEST(Checkpoint, RejectsCorruptText) {
  EXPECT_THROW(ParseCheckpoint("not a checkpoint"), Error);
  const ModelConfig c = SmallConfig();
  Checkpoint ck;
  ck.params = *SeededParams(c);
  std::string text = SerializeCheckpoint(ck);
  text.resize(text.size() / 2);
  EXPECT_THROW(ParseCheckpoint(text), Error);
}

TEST(SyncTarget, IsAnIndependentCopy) {
  const ModelConfig c = SmallConfig();
  ModelParams p = *SeededParams(c);
  ModelParams target = sync_target(p);
  p.at("value.out.b")(0, 0) += 1.0;
  EXPECT_NE(p.at("value.out.b")(0, 0), target.at("value.out.b")(0, 0));
}

}  // namespace
}  // namespace mazero
