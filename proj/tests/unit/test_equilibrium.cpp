#include <gtest/gtest.h>

#include <numeric>

#include "karma/config.hpp"
#include "karma/equilibrium.hpp"

using namespace karma;

namespace {

Policy threshold_policy(const GameConfig& c) {
  return Policy::pure(c.scheme, c.karma_max,
                      [&](int u, int k) { return u == 1 ? max_allowed_bid(c.scheme, k) : 0; });
}

MeanField threshold_field(const GameConfig& c) {
  SolverOptions o;
  return stationary_distribution(threshold_policy(c), c, o).mean_field;
}

// Independent win probability: strictly lower bids win, equal bids half.
double oracle_win(int b, const std::vector<double>& dist) {
  double w = 0.0;
  for (std::size_t j = 0; j < dist.size(); ++j) {
    if (static_cast<int>(j) < b) w += dist[j];
    if (static_cast<int>(j) == b) w += 0.5 * dist[j];
  }
  return w;
}

}  // namespace

TEST(Equilibrium, WinProbabilityOnUniformBids) {
  std::vector<double> d{1 / 3.0, 1 / 3.0, 1 / 3.0};
  EXPECT_NEAR(win_probability(1, d), 0.5, 1e-15);
  EXPECT_NEAR(win_probability(0, d), 1 / 6.0, 1e-15);
  EXPECT_NEAR(win_probability(2, d), 5 / 6.0, 1e-15);
}

TEST(Equilibrium, ExAnteGains) {
  EXPECT_NEAR(exante_efficient_gain(preset("low-binary")), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(exante_efficient_gain(preset("high-full")), 0.5, 1e-15);
  EXPECT_NEAR(exante_efficient_gain(1, 5, 0.0), 0.0, 1e-15);
}

TEST(Equilibrium, SolverOptionsValidation) {
  SolverOptions o;
  o.discount = 1.0;
  EXPECT_THROW(validate(o), ConfigError);
  o.discount = -0.1;
  EXPECT_THROW(validate(o), ConfigError);
  o.discount = 0.0;
  EXPECT_NO_THROW(validate(o));
  o.damping = 0.0;
  EXPECT_THROW(validate(o), ConfigError);
}

TEST(Equilibrium, StationaryDistributionConservesKarma) {
  for (const auto& name : preset_names()) {
    auto c = preset(name);
    auto mf = threshold_field(c);
    EXPECT_NEAR(std::accumulate(mf.karma_dist.begin(), mf.karma_dist.end(), 0.0), 1.0, 1e-9) << name;
    EXPECT_NEAR(mf.mean_karma(), c.karma_init, 1e-5) << name;
    EXPECT_NEAR(std::accumulate(mf.bid_dist.begin(), mf.bid_dist.end(), 0.0), 1.0, 1e-9) << name;
    EXPECT_GE(mf.mean_redistribution, mf.mean_payment - 1e-12) << name;
  }
}

TEST(Equilibrium, MyopicBestResponseMaximisesImmediateWinChance) {
  for (const auto& name : preset_names()) {
    auto c = preset(name);
    auto mf = threshold_field(c);
    SolverOptions o;
    o.discount = 0.0;
    auto br = best_response(mf, c, o);
    for (int u = 0; u < kUrgencyLevels; ++u)
      for (int k = 0; k <= c.karma_max; ++k) {
        int expect = 0;
        double best = oracle_win(0, mf.bid_dist);
        for (int b : allowed_bids(c.scheme, k))
          if (oracle_win(b, mf.bid_dist) > best + 1e-12) {
            best = oracle_win(b, mf.bid_dist);
            expect = b;
          }
        EXPECT_EQ(br.policy.mode(u, k), expect) << name << " u=" << u << " k=" << k;
      }
  }
}

TEST(Equilibrium, MyopicBidOfOneAgainstAllZero) {
  // Everybody else bids 0: bid 1 already wins for sure, and ties in the
  // argmax go to the cheapest bid.
  auto c = preset("low-full");
  MeanField mf;
  mf.karma_dist.assign(c.karma_max + 1, 0.0);
  mf.karma_dist[c.karma_init] = 1.0;
  mf.bid_dist.assign(c.karma_max + 1, 0.0);
  mf.bid_dist[0] = 1.0;
  mf.state_dist.assign(2 * (c.karma_max + 1), 0.0);
  SolverOptions o;
  o.discount = 0.0;
  auto br = best_response(mf, c, o);
  for (int u = 0; u < 2; ++u) {
    EXPECT_EQ(br.policy.mode(u, 0), 0);
    for (int k = 1; k <= c.karma_max; ++k) EXPECT_EQ(br.policy.mode(u, k), 1);
  }
}

TEST(Equilibrium, ValueIterationContracts) {
  auto c = preset("high-binary");
  auto mf = threshold_field(c);
  for (double alpha : {0.5, 0.9, 0.98}) {
    SolverOptions o;
    o.discount = alpha;
    auto br = best_response(mf, c, o);
    ASSERT_GE(br.residuals.size(), 2u);
    for (std::size_t i = 1; i < br.residuals.size(); ++i)
      EXPECT_LE(br.residuals[i], alpha * br.residuals[i - 1] + 1e-12) << alpha << " step " << i;
  }
}

TEST(Equilibrium, PolicyValueOfBestResponseMatchesOptimalValue) {
  auto c = preset("low-full");
  auto mf = threshold_field(c);
  SolverOptions o;
  o.discount = 0.9;
  o.tol = 1e-10;
  auto br = best_response(mf, c, o);
  auto v = policy_value(br.policy, mf, c, o);
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(v[i], br.value[i], 1e-7);
  EXPECT_NEAR(exploitability(br.policy, mf, c, o), 0.0, 1e-8);
  EXPECT_GT(exploitability(threshold_policy(c), mf, c, o), -1e-12);
}

class SolvedPreset : public ::testing::TestWithParam<std::tuple<std::string, double>> {};

TEST_P(SolvedPreset, ConvergesWithSmallExploitability) {
  auto [name, alpha] = GetParam();
  auto c = preset(name);
  SolverOptions o;
  o.discount = alpha;
  auto eq = solve_equilibrium(c, o);
  EXPECT_TRUE(eq.converged);
  EXPECT_TRUE(eq.policy.valid(1e-9));
  // Per-round utility units. Full-range mixing leaves a small residual gap.
  const double mean_urgency = (1 - c.p_high) * c.urgency_low + c.p_high * c.urgency_high;
  EXPECT_LT(eq.exploitability, 5e-4 * mean_urgency);
  EXPECT_NEAR(eq.mean_field.mean_karma(), c.karma_init, 1e-5);
  EXPECT_FALSE(eq.residual_history.empty());
  const int levels = c.karma_max + 1;
  for (int u = 0; u < kUrgencyLevels; ++u)
    for (int k = 1; k < levels; ++k)
      EXPECT_GE(eq.value[u * levels + k], eq.value[u * levels + k - 1] - 1e-9) << "u=" << u << " k=" << k;
  // High urgency is worth at least as much as low urgency at equal karma.
  for (int k = 0; k < levels; ++k) EXPECT_GE(eq.value[levels + k], eq.value[k] - 1e-9);
}

INSTANTIATE_TEST_SUITE_P(Presets, SolvedPreset,
                         ::testing::Combine(::testing::Values("low-binary", "low-full", "high-binary",
                                                             "high-full"),
                                            ::testing::Values(0.0, 0.5, 0.98)));

TEST(Equilibrium, PolicyJsonRoundTrip) {
  auto c = preset("high-full");
  SolverOptions o;
  o.discount = 0.7;
  auto eq = solve_equilibrium(c, o);
  auto j = policy_to_json(eq.policy, c);
  auto back = policy_from_json(j, c);
  EXPECT_LT(back.max_abs_diff(eq.policy), 1e-15);
  EXPECT_THROW(policy_from_json(j, preset("high-binary")), ConfigError);
}

TEST(Equilibrium, PolicyValidityChecks) {
  auto c = preset("low-binary");
  Policy p(c.scheme, c.karma_max);
  EXPECT_TRUE(p.valid());
  p.probs(1, 10)[3] = 1.0;  // not allowed in the binary scheme
  p.probs(1, 10)[0] = 0.0;
  EXPECT_FALSE(p.valid());
}
