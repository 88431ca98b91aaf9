#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "mazero/model/learned_model.hpp"
#include "mazero/train/loss.hpp"

namespace mazero::verify {

struct SuiteReport {
  std::string suite;
  bool pass = true;
  long long cases = 0;
  long long failures = 0;
  double max_error = 0.0;
  double tolerance = 0.0;
  std::string detail;

  // One JSON object on a single line.
  std::string ToJson() const;
};

struct VerifyOptions {
  int trees = 1000;
  int awpo_instances = 1000;
  int gradient_coordinates = 120;
  std::uint64_t seed = 0;
  // Negative control: incremental OS(lambda) rounds the kept count down.
  bool inject_quantile_floor = false;
};

// Incremental V and A against brute-force recomputation, tolerance 1e-9.
SuiteReport OsLambdaSuite(const VerifyOptions& o);
// kkt_residual(eta_star) <= 1e-8 on random instances.
SuiteReport AwpoKktSuite(const VerifyOptions& o);
// Constant advantages give eta* == pi bit for bit.
SuiteReport AwpoConstantSuite(const VerifyOptions& o);
// awpo_loss logit gradient against central differences, rel err <= 1e-5.
SuiteReport AwpoGradientSuite(const VerifyOptions& o);
// Expected bandit losses against central differences, rel err <= 1e-6.
SuiteReport BanditGradientSuite(const VerifyOptions& o);
// unrolled_loss (K = 5, D = 16) against central differences, rel err <= 1e-4.
SuiteReport UnrolledGradientSuite(const VerifyOptions& o);
// h / h^-1 within 1e-9 on [-100, 100]; two-hot round trip within 1e-12.
SuiteReport TransformSuite(const VerifyOptions& o);

/// Small learned model with a random batch: 2 agents, 3 actions, masked
/// tails in some samples.
struct GradientFixture {
  ModelConfig config;
  std::shared_ptr<ModelParams> params;
  TrainBatch batch;
};
GradientFixture MakeGradientFixture(std::uint64_t seed, int unroll_steps = 5, int latent_dim = 16);

std::vector<SuiteReport> RunAll(const VerifyOptions& o);

// Relative-error floor used by every finite-difference comparison.
inline constexpr double kGradientFloor = 1e-6;

}  // namespace mazero::verify
