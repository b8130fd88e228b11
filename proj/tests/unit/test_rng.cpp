#include <gtest/gtest.h>

#include <array>
#include <set>

#include "karma/rng.hpp"

using namespace karma;

TEST(Rng, Splitmix64KnownValue) {
  // First output of the reference splitmix64 generator started at state 0.
  EXPECT_EQ(splitmix64(0), 0xe220a8397b1dcdafULL);
}

TEST(Rng, DerivedStreamsDiffer) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t seed = 0; seed < 50; ++seed)
    for (std::uint64_t stream = 0; stream < 20; ++stream) seen.insert(derive_seed(seed, stream));
  EXPECT_EQ(seen.size(), 1000u);
  EXPECT_EQ(derive_seed(7, 3), derive_seed(7, 3));
}

TEST(Rng, UniformBelowIsInRangeAndFlat) {
  Rng rng(42);
  std::array<int, 7> counts{};
  const int draws = 70000;
  for (int i = 0; i < draws; ++i) {
    auto x = uniform_below(rng, 7);
    ASSERT_LT(x, 7u);
    ++counts[x];
  }
  for (int c : counts) EXPECT_NEAR(c / double(draws), 1.0 / 7.0, 0.01);
  EXPECT_EQ(uniform_below(rng, 1), 0u);
}

TEST(Rng, UnitIntervalAndCoins) {
  Rng rng(5);
  double sum = 0.0;
  int heads = 0, hits = 0;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) {
    double u = uniform_unit(rng);
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
    heads += fair_coin(rng);
    hits += bernoulli(rng, 0.25);
  }
  EXPECT_NEAR(sum / draws, 0.5, 0.005);
  EXPECT_NEAR(heads / double(draws), 0.5, 0.006);
  EXPECT_NEAR(hits / double(draws), 0.25, 0.006);
}

TEST(Rng, BernoulliEdges) {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    EXPECT_FALSE(bernoulli(rng, 0.0));
    EXPECT_TRUE(bernoulli(rng, 1.0));
  }
}
