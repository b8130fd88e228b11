#include <gtest/gtest.h>

#include <numeric>
#include <sstream>

#include "karma/simulator.hpp"

using namespace karma;

TEST(Simulator, EfficiencyGain) {
  EXPECT_DOUBLE_EQ(efficiency_gain(90, 75), 0.2);
  EXPECT_DOUBLE_EQ(efficiency_gain(75, 75), 0.0);
  EXPECT_THROW(efficiency_gain(3, 0), StateError);
}

TEST(Simulator, GameResultMatchesTrace) {
  auto c = preset("low-full");
  auto pop = parse_population("threshold:10,random:10");
  auto g = run_game(c, pop, 17);
  ASSERT_EQ(g.trace.size(), std::size_t(c.n_rounds + c.n_test_rounds));
  ASSERT_EQ(g.participants.size(), 20u);
  const auto& last = g.trace.back();
  for (const auto& p : g.participants) {
    EXPECT_EQ(p.score, last.score_after[p.participant]);
    EXPECT_EQ(p.urgencies.size(), std::size_t(c.n_rounds));
    EXPECT_EQ(p.score_first_half + p.score_second_half, p.score);
    EXPECT_DOUBLE_EQ(p.score_random, 0.5 * std::accumulate(p.urgencies.begin(), p.urgencies.end(), 0));
  }
}

TEST(Simulator, RunGameIsDeterministic) {
  auto c = preset("high-binary");
  auto pop = parse_population("random:20");
  EXPECT_EQ(run_game(c, pop, 5).trace, run_game(c, pop, 5).trace);
}

TEST(Simulator, BaselineSharesUrgenciesWithKarmaGame) {
  auto c = preset("low-binary");
  auto pop = parse_population("zero:20");
  auto k = run_game(c, pop, 21);
  auto r = run_baseline(c, Baseline::RandomAllocation, 21);
  ASSERT_EQ(k.trace.size(), r.trace.size());
  for (std::size_t t = 0; t < k.trace.size(); ++t) {
    EXPECT_EQ(k.trace[t].urgencies, r.trace[t].urgencies);
    EXPECT_EQ(k.trace[t].pairing, r.trace[t].pairing);
  }
  // All-zero bids are pure coin flips: identical winners too.
  for (std::size_t t = 0; t < k.trace.size(); ++t) EXPECT_EQ(k.trace[t].winners, r.trace[t].winners);
}

TEST(Simulator, TurnTakingWithTwoAlternates) {
  GameConfig c;
  c.n_participants = 2;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto g = run_baseline(c, Baseline::TurnTaking, seed);
    int wins0 = 0;
    for (const auto& r : g.trace)
      if (!r.test_round) wins0 += r.winners[0] == 0;
    EXPECT_EQ(wins0, c.n_rounds / 2);
  }
}

TEST(Simulator, TurnTakingEqualisesAllocationCounts) {
  auto c = preset("high-full");
  auto g = run_baseline(c, Baseline::TurnTaking, 3);
  std::vector<int> wins(c.n_participants, 0);
  for (const auto& r : g.trace)
    if (!r.test_round)
      for (int w : r.winners) ++wins[w];
  auto [lo, hi] = std::minmax_element(wins.begin(), wins.end());
  EXPECT_LE(*hi - *lo, 3);
  EXPECT_EQ(std::accumulate(wins.begin(), wins.end(), 0), c.n_rounds * c.n_participants / 2);
}

TEST(Simulator, BatchRowsAndThreadIndependence) {
  BatchSpec spec;
  spec.config = preset("low-binary");
  spec.population = parse_population("threshold:18,zero:2");
  spec.n_games = 12;
  spec.base_seed = 100;
  spec.threads = 1;
  auto one = run_batch(spec);
  spec.threads = 4;
  auto four = run_batch(spec);
  ASSERT_EQ(one.rows.size(), 240u);
  EXPECT_EQ(one.rows, four.rows);
  for (std::size_t i = 0; i < one.rows.size(); ++i) {
    EXPECT_EQ(one.rows[i].game, static_cast<int>(i / 20));
    EXPECT_EQ(one.rows[i].participant, static_cast<int>(i % 20));
  }
  EXPECT_EQ(one.rows[19].agent_kind, "zero");
  EXPECT_DOUBLE_EQ(one.rows[19].zero_bid_frac, 1.0);
  // Game i of a batch is run_game with seed base_seed + i.
  auto g3 = rows_of(run_game(spec.config, spec.population, 103), 3);
  for (int p = 0; p < 20; ++p) EXPECT_EQ(one.rows[60 + p], g3[p]);
}

TEST(Simulator, DatasetCsvRoundTrip) {
  auto rows = simulate_random_allocation(preset("high-binary"), 3, 8);
  std::stringstream ss;
  write_dataset(ss, rows);
  auto back = read_dataset(ss);
  EXPECT_EQ(back, rows);
}

TEST(Simulator, DatasetSchemaErrors) {
  std::stringstream missing("game,participant,S\n1,2,3\n");
  EXPECT_THROW(read_dataset(missing), IoError);
  std::stringstream ragged(std::string(kDatasetHeader) + "\n1,2,x\n");
  EXPECT_THROW(read_dataset(ragged), IoError);
  std::stringstream empty;
  EXPECT_THROW(read_dataset(empty), IoError);
  EXPECT_THROW(read_dataset_file("/nonexistent/file.csv"), IoError);
}

TEST(Simulator, PopulationSizeMismatch) {
  auto pop = parse_population("zero:3");
  EXPECT_THROW(run_game(preset("low-binary"), pop, 1), ConfigError);
}
