#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "mazero/model/transforms.hpp"

namespace mazero {
namespace {

TEST(ValueTransform, FixedPointAndKnownValue) {
  EXPECT_EQ(value_transform(0.0), 0.0);
  EXPECT_NEAR(value_transform(3.0), 1.003, 1e-15);
  EXPECT_NEAR(value_transform(-3.0), -1.003, 1e-15);
}

TEST(ValueTransform, InverseOfKnownValue) {
  EXPECT_NEAR(value_transform_inv(1.003), 3.0, 1e-9);
  EXPECT_EQ(value_transform_inv(0.0), 0.0);
}

TEST(ValueTransform, RoundTripGrid) {
  for (int i = -10000; i <= 10000; ++i) {
    const double x = i / 100.0;
    ASSERT_NEAR(value_transform_inv(value_transform(x)), x, 1e-9) << x;
  }
}

TEST(ValueTransform, StrictlyIncreasing) {
  double prev = value_transform(-100.0);
  for (int i = -9999; i <= 10000; ++i) {
    const double y = value_transform(i / 100.0);
    ASSERT_GT(y, prev);
    prev = y;
  }
}

TEST(CategoricalSupport, DefaultCentersAreSymmetric) {
  const CategoricalSupport sup;
  ASSERT_EQ(sup.size(), 10);
  EXPECT_DOUBLE_EQ(sup.lo(), -5.0);
  EXPECT_DOUBLE_EQ(sup.hi(), 5.0);
  EXPECT_NEAR(sup.centers()[4], -5.0 / 9.0, 1e-15);
  EXPECT_NEAR(sup.centers()[5], 5.0 / 9.0, 1e-15);
}

TEST(CategoricalSupport, LowerBoundIsOneHot) {
  const CategoricalSupport sup;
  const std::vector<double> w = scalar_to_support(-5.0, sup);
  EXPECT_DOUBLE_EQ(w[0], 1.0);
  EXPECT_DOUBLE_EQ(std::accumulate(w.begin(), w.end(), 0.0), 1.0);
}

TEST(CategoricalSupport, ZeroSplitsBetweenMiddleBins) {
  const CategoricalSupport sup;
  const std::vector<double> w = scalar_to_support(0.0, sup);
  EXPECT_NEAR(w[4], 0.5, 1e-15);
  EXPECT_NEAR(w[5], 0.5, 1e-15);
  for (int i : {0, 1, 2, 3, 6, 7, 8, 9}) EXPECT_EQ(w[i], 0.0);
}

TEST(CategoricalSupport, RoundTrip) {
  const CategoricalSupport sup;
  EXPECT_NEAR(support_to_scalar(scalar_to_support(1.7, sup), sup), 1.7, 1e-12);
  for (int i = -500; i <= 500; ++i) {
    const double x = i / 100.0;
    ASSERT_NEAR(support_to_scalar(scalar_to_support(x, sup), sup), x, 1e-12) << x;
  }
}

TEST(CategoricalSupport, ClampsOutOfRange) {
  const CategoricalSupport sup;
  EXPECT_DOUBLE_EQ(support_to_scalar(scalar_to_support(12.0, sup), sup), 5.0);
  EXPECT_DOUBLE_EQ(support_to_scalar(scalar_to_support(-12.0, sup), sup), -5.0);
}

TEST(CategoricalSupport, UniformWeightsGiveZero) {
  const CategoricalSupport sup;
  const std::vector<double> w(10, 0.1);
  EXPECT_NEAR(support_to_scalar(w, sup), 0.0, 1e-15);
  EXPECT_NEAR(value_transform_inv(support_to_scalar(w, sup)), 0.0, 1e-14);
}

TEST(CategoricalSupport, RejectsMismatchedWeights) {
  const CategoricalSupport sup;
  const std::vector<double> w(9, 1.0 / 9.0);
  EXPECT_THROW(support_to_scalar(w, sup), std::exception);
  EXPECT_THROW(CategoricalSupport(1, 0.0, 1.0), std::exception);
}

}  // namespace
}  // namespace mazero
