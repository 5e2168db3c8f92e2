#include <gtest/gtest.h>

#include <random>

#include "mwafm/error.hpp"
#include "mwafm/tensor.hpp"
#include "oracles.hpp"

using mwafm::Tensor;

TEST(Tensor, ShapeAndFill) {
  Tensor t({2, 3}, 1.5);
  EXPECT_EQ(t.numel(), 6u);
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.cols(), 3u);
  EXPECT_DOUBLE_EQ(t(1, 2), 1.5);
  EXPECT_EQ(Tensor::vector({1, 2, 3}).rows(), 1u);
}

TEST(Tensor, RejectsBadShapes) {
  EXPECT_THROW(Tensor({2, 0}), mwafm::DimensionError);
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), mwafm::DimensionError);
  EXPECT_THROW(Tensor({2, 3}).reshaped({4}), mwafm::DimensionError);
}

TEST(Tensor, ReshapeKeepsData) {
  const Tensor t = Tensor::matrix({{1, 2, 3}, {4, 5, 6}});
  const Tensor r = t.reshaped({3, 2});
  EXPECT_EQ(r.storage(), t.storage());
  EXPECT_DOUBLE_EQ(r(2, 1), 6.0);
}

TEST(Tensor, ItemNeedsOneElement) {
  EXPECT_DOUBLE_EQ(Tensor::scalar(4.0).item(), 4.0);
  EXPECT_THROW(Tensor({2}).item(), mwafm::DimensionError);
}

TEST(Tensor, FiniteCheck) {
  Tensor t({2}, 0.0);
  EXPECT_TRUE(t.all_finite());
  t[1] = std::nan("");
  EXPECT_FALSE(t.all_finite());
}

TEST(InterpolateTime, SameLengthUnchanged) {
  std::mt19937_64 rng(1);
  const Tensor x = oracle::random_tensor({24, 5}, rng);
  EXPECT_EQ(mwafm::interpolate_time(x, 24), x);
}

TEST(InterpolateTime, Midpoint) {
  const Tensor y = mwafm::interpolate_time(Tensor::matrix({{0}, {2}}), 3);
  EXPECT_EQ(y, Tensor::matrix({{0}, {1}, {2}}));
}

TEST(InterpolateTime, MatchesPiecewiseLinearOracle) {
  std::mt19937_64 rng(2);
  const Tensor x = oracle::random_tensor({7, 3}, rng);
  const Tensor y = mwafm::interpolate_time(x, 24);
  EXPECT_LE(oracle::max_diff(oracle::to_mat(y), oracle::interpolate(oracle::to_mat(x), 24)), 1e-12);
}

TEST(InterpolateTime, SingleRowReplicates) {
  const Tensor y = mwafm::interpolate_time(Tensor::matrix({{3, 4}}), 4);
  for (std::size_t r = 0; r < 4; ++r) {
    EXPECT_DOUBLE_EQ(y(r, 0), 3.0);
    EXPECT_DOUBLE_EQ(y(r, 1), 4.0);
  }
}

TEST(InterpolateTime, Downsampling) {
  std::mt19937_64 rng(3);
  const Tensor x = oracle::random_tensor({30, 4}, rng);
  const Tensor y = mwafm::interpolate_time(x, 24);
  EXPECT_LE(oracle::max_diff(oracle::to_mat(y), oracle::interpolate(oracle::to_mat(x), 24)), 1e-12);
  for (std::size_t c = 0; c < 4; ++c) {
    EXPECT_DOUBLE_EQ(y(0, c), x(0, c));
    EXPECT_DOUBLE_EQ(y(23, c), x(29, c));
  }
}
