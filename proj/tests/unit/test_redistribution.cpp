#include <gtest/gtest.h>

#include <map>
#include <numeric>

#include "karma/engine.hpp"

using namespace karma;

TEST(Redistribution, EvenSplit) {
  Rng rng(1);
  std::vector<int> karma{3, 5, 0, 9};
  auto g = redistribute(karma, 18, 8, rng);
  EXPECT_EQ(g, (std::vector<int>{2, 2, 2, 2}));
  EXPECT_EQ(redistribute(karma, 18, 0, rng), (std::vector<int>{0, 0, 0, 0}));
}

TEST(Redistribution, RemainderGoesToAUniformSubset) {
  // Oracle: 2 extra units among 4 uncapped people; each of the C(4,2) = 6
  // subsets has probability 1/6.
  Rng rng(2);
  std::vector<int> karma{0, 0, 0, 0};
  std::map<std::vector<int>, int> counts;
  const int draws = 30000;
  for (int i = 0; i < draws; ++i) {
    auto g = redistribute(karma, 18, 2, rng);
    ASSERT_EQ(std::accumulate(g.begin(), g.end(), 0), 2);
    for (int v : g) ASSERT_LE(v, 1);
    ++counts[g];
  }
  ASSERT_EQ(counts.size(), 6u);
  for (const auto& [g, c] : counts) EXPECT_NEAR(c / double(draws), 1.0 / 6.0, 0.015);
}

TEST(Redistribution, CapOverflowIsReissued) {
  // Post-payment karma (18,17,9,9), 10 units to hand out, cap 18.
  // Base grant 2: seat 0 takes 0 (2 overflow), seat 1 takes 1 (1 overflow).
  // The remainder 2 can only go to seats 2 and 3 (one each), then the 3
  // overflow units land one at a time uniformly on seats 2 and 3.
  // Oracle: grant to seat 2 = 3 + Binomial(3, 1/2).
  Rng rng(3);
  std::vector<int> karma{18, 17, 9, 9};
  std::map<int, int> counts;
  const int draws = 40000;
  for (int i = 0; i < draws; ++i) {
    auto g = redistribute(karma, 18, 10, rng);
    ASSERT_EQ(g[0], 0);
    ASSERT_EQ(g[1], 1);
    ASSERT_EQ(g[2] + g[3], 9);
    ++counts[g[2]];
  }
  const std::map<int, double> expect{{3, 1 / 8.0}, {4, 3 / 8.0}, {5, 3 / 8.0}, {6, 1 / 8.0}};
  ASSERT_EQ(counts.size(), expect.size());
  for (auto [v, p] : expect) EXPECT_NEAR(counts[v] / double(draws), p, 0.01) << v;
}

TEST(Redistribution, ReissueStopsAtTheCap) {
  Rng rng(4);
  std::vector<int> karma{18, 18, 17, 0};
  for (int i = 0; i < 200; ++i) {
    auto g = redistribute(karma, 18, 12, rng);
    EXPECT_EQ(g, (std::vector<int>{0, 0, 1, 11}));
  }
}

TEST(Redistribution, EveryoneCappedIsAnError) {
  Rng rng(5);
  std::vector<int> karma{18, 18};
  EXPECT_THROW(redistribute(karma, 18, 1, rng), ConfigError);
  EXPECT_THROW(redistribute(karma, 18, -1, rng), StateError);
}

TEST(Redistribution, RandomisedInvariants) {
  Rng rng(6), gen(7);
  const int kmax = 18;
  for (int trial = 0; trial < 5000; ++trial) {
    const int n = 2 + 2 * static_cast<int>(uniform_below(gen, 10));
    std::vector<int> karma(n);
    int room = 0;
    for (auto& k : karma) {
      k = static_cast<int>(uniform_below(gen, kmax + 1));
      room += kmax - k;
    }
    const int p = static_cast<int>(uniform_below(gen, std::min(room, 3 * n) + 1));
    auto g = redistribute(karma, kmax, p, rng);
    ASSERT_EQ(std::accumulate(g.begin(), g.end(), 0), p);
    for (int i = 0; i < n; ++i) {
      ASSERT_GE(g[i], std::min(p / n, kmax - karma[i]));
      ASSERT_LE(karma[i] + g[i], kmax);
    }
  }
}
