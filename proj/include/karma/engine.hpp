#pragma once

// One karma game: urgency draws, random pairwise matching, contest
// resolution, payments and capped integer redistribution.
//
// Randomness comes from two streams derived from GameConfig::seed.
//   env stream:      urgencies (participant-index order), then the matching
//   resolve stream:  tie-breaks (pair order), then the remainder subset,
//                    then cap-overflow reissue draws
// Keeping the environment on its own stream means baselines run with the same
// seed see the same urgency and matching sequence as the karma game.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "karma/config.hpp"
#include "karma/error.hpp"
#include "karma/rng.hpp"

namespace karma {

enum class Phase { Test, Main, Finished };

inline std::string to_string(Phase p) {
  switch (p) {
    case Phase::Test: return "test";
    case Phase::Main: return "main";
    case Phase::Finished: return "finished";
  }
  return "?";
}

struct PlayerState {
  int karma = 0;
  int score = 0;
  int consecutive_inactive = 0;
  bool dropped = false;

  bool operator==(const PlayerState&) const = default;
};

using Pair = std::pair<int, int>;
using Pairing = std::vector<Pair>;

struct RoundRecord {
  int round_index = 0;  // 1-based within its phase
  bool test_round = false;
  std::vector<int> urgencies;
  Pairing pairing;
  std::vector<int> bids;       // every participant's bid, losers included
  std::vector<int> winners;    // one participant index per pair
  std::vector<bool> tied;      // per pair: resolved by coin flip
  int payments_total = 0;
  std::vector<int> redistribution;
  std::vector<int> karma_after;
  std::vector<int> score_after;

  bool operator==(const RoundRecord&) const = default;
};

struct GameState {
  GameConfig config;
  Phase phase = Phase::Main;
  int round = 1;
  std::vector<PlayerState> players;
  std::vector<int> urgencies;  // current round, empty until drawn
  Pairing pairing;             // current round, empty until drawn
  Rng env_rng;
  Rng resolve_rng;
  std::vector<RoundRecord> trace;

  int n() const { return config.n_participants; }
  bool finished() const { return phase == Phase::Finished; }
  bool scoring() const { return phase == Phase::Main; }
  int total_karma() const {
    int s = 0;
    for (const auto& p : players) s += p.karma;
    return s;
  }
};

inline GameState new_game(const GameConfig& config) {
  validate(config);
  GameState s;
  s.config = config;
  s.phase = config.n_test_rounds > 0 ? Phase::Test : Phase::Main;
  s.round = 1;
  s.players.assign(config.n_participants, PlayerState{config.karma_init, 0, 0, false});
  s.env_rng.seed(derive_seed(config.seed, 0));
  s.resolve_rng.seed(derive_seed(config.seed, 1));
  return s;
}

inline int urgency_draw(Rng& rng, const GameConfig& c) {
  return bernoulli(rng, c.p_high) ? c.urgency_high : c.urgency_low;
}

inline const std::vector<int>& draw_urgencies(GameState& s) {
  if (s.finished()) throw StateError("draw_urgencies: game is finished");
  s.urgencies.resize(s.n());
  for (int i = 0; i < s.n(); ++i) s.urgencies[i] = urgency_draw(s.env_rng, s.config);
  return s.urgencies;
}

// Uniform perfect matching: Fisher-Yates shuffle, then consecutive pairs.
inline Pairing uniform_matching(Rng& rng, int n) {
  if (n <= 0 || n % 2 != 0) throw ConfigError("random_matching: population must be even");
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = n - 1; i > 0; --i) {
    int j = static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(i) + 1));
    std::swap(idx[i], idx[j]);
  }
  Pairing p;
  p.reserve(n / 2);
  for (int i = 0; i < n; i += 2) p.emplace_back(idx[i], idx[i + 1]);
  return p;
}

inline const Pairing& random_matching(GameState& s) {
  if (s.finished()) throw StateError("random_matching: game is finished");
  s.pairing = uniform_matching(s.env_rng, s.n());
  return s.pairing;
}

// Urgencies then matching, the fixed per-round draw order.
inline void begin_round(GameState& s) {
  draw_urgencies(s);
  random_matching(s);
}

inline bool is_allowed(Scheme scheme, int karma, int bid) {
  if (bid < 0 || bid > karma) return false;
  if (scheme == Scheme::Binary) return bid == 0 || bid == karma / 2;
  return true;
}

inline int max_allowed_bid(Scheme scheme, int karma) {
  return scheme == Scheme::Binary ? karma / 2 : karma;
}

// Ascending, duplicate-free.
inline std::vector<int> allowed_bids(Scheme scheme, int karma) {
  if (karma < 0) throw BidError("allowed_bids: negative karma");
  if (scheme == Scheme::Binary) {
    if (karma / 2 == 0) return {0};
    return {0, karma / 2};
  }
  std::vector<int> out(karma + 1);
  std::iota(out.begin(), out.end(), 0);
  return out;
}

struct PairOutcome {
  bool first_wins = false;
  bool tie = false;
};

// Higher bid wins; a tie is settled by one fair coin from `rng`.
inline PairOutcome resolve_pair(int bid_a, int bid_b, Rng& rng) {
  if (bid_a != bid_b) return {bid_a > bid_b, false};
  return {fair_coin(rng), true};
}

// Integer-preserving uniform redistribution of `p_tot` on top of
// `karma_after_payment`, never pushing anyone past `karma_max`.
//
// Every participant gets floor(p_tot/N). The p_tot mod N remainder units go
// to a uniformly random subset of the participants still below the cap; any
// unit that does not fit is reissued one at a time to a uniformly random
// participant strictly below the cap.
inline std::vector<int> redistribute(std::span<const int> karma_after_payment, int karma_max,
                                     int p_tot, Rng& rng) {
  const int n = static_cast<int>(karma_after_payment.size());
  if (n == 0) throw StateError("redistribute: empty population");
  if (p_tot < 0) throw StateError("redistribute: negative payment total");
  std::vector<int> grant(n, p_tot / n);
  int remainder = p_tot % n;

  auto room = [&](int i) { return karma_max - karma_after_payment[i] - grant[i]; };

  int overflow = 0;
  for (int i = 0; i < n; ++i) {
    if (room(i) < 0) {
      overflow += -room(i);
      grant[i] = karma_max - karma_after_payment[i];
    }
  }

  if (remainder > 0) {
    std::vector<int> eligible;
    for (int i = 0; i < n; ++i)
      if (room(i) > 0) eligible.push_back(i);
    const int take = std::min<int>(remainder, static_cast<int>(eligible.size()));
    // Partial Fisher-Yates: the first `take` entries form a uniform subset.
    for (int j = 0; j < take; ++j) {
      int pick = j + static_cast<int>(uniform_below(rng, eligible.size() - j));
      std::swap(eligible[j], eligible[pick]);
      ++grant[eligible[j]];
    }
    overflow += remainder - take;
  }

  if (overflow > 0) {
    std::vector<int> below;
    for (int i = 0; i < n; ++i)
      if (room(i) > 0) below.push_back(i);
    while (overflow > 0) {
      if (below.empty())
        throw ConfigError("redistribute: " + std::to_string(overflow) +
                          " karma units left over with every participant at karma_max; "
                          "N*karma_init must be below N*karma_max");
      std::size_t pos = uniform_below(rng, below.size());
      int i = below[pos];
      ++grant[i];
      --overflow;
      if (room(i) == 0) {
        below[pos] = below.back();
        below.pop_back();
      }
    }
  }
  return grant;
}

inline const RoundRecord& step_round(GameState& s, std::span<const int> bids) {
  if (s.finished()) throw StateError("step_round: game is finished");
  const int n = s.n();
  if (static_cast<int>(bids.size()) != n)
    throw StateError("step_round: expected " + std::to_string(n) + " bids, got " +
                     std::to_string(bids.size()));
  if (static_cast<int>(s.urgencies.size()) != n || static_cast<int>(s.pairing.size()) != n / 2)
    throw StateError("step_round: urgencies and matching must be drawn first");
  for (int i = 0; i < n; ++i) {
    if (!is_allowed(s.config.scheme, s.players[i].karma, bids[i]))
      throw BidError("step_round: participant " + std::to_string(i) + " bid " +
                     std::to_string(bids[i]) + " not allowed with karma " +
                     std::to_string(s.players[i].karma));
  }

  RoundRecord rec;
  rec.round_index = s.round;
  rec.test_round = s.phase == Phase::Test;
  rec.urgencies = s.urgencies;
  rec.pairing = s.pairing;
  rec.bids.assign(bids.begin(), bids.end());
  rec.winners.reserve(s.pairing.size());
  rec.tied.reserve(s.pairing.size());

  std::vector<int> karma(n);
  for (int i = 0; i < n; ++i) karma[i] = s.players[i].karma;

  for (const auto& [a, b] : s.pairing) {
    PairOutcome o = resolve_pair(bids[a], bids[b], s.resolve_rng);
    int w = o.first_wins ? a : b;
    rec.winners.push_back(w);
    rec.tied.push_back(o.tie);
    karma[w] -= bids[w];
    rec.payments_total += bids[w];
  }

  rec.redistribution =
      redistribute(karma, s.config.karma_max, rec.payments_total, s.resolve_rng);
  for (int i = 0; i < n; ++i) s.players[i].karma = karma[i] + rec.redistribution[i];

  if (s.scoring())
    for (int w : rec.winners) s.players[w].score += s.urgencies[w];

  rec.karma_after.resize(n);
  rec.score_after.resize(n);
  for (int i = 0; i < n; ++i) {
    rec.karma_after[i] = s.players[i].karma;
    rec.score_after[i] = s.players[i].score;
  }
  s.trace.push_back(std::move(rec));

  s.urgencies.clear();
  s.pairing.clear();
  ++s.round;
  if (s.phase == Phase::Test && s.round > s.config.n_test_rounds) {
    // Practice is over: everybody restarts from the endowment.
    s.phase = Phase::Main;
    s.round = 1;
    for (auto& p : s.players) {
      p.karma = s.config.karma_init;
      p.score = 0;
    }
  } else if (s.phase == Phase::Main && s.round > s.config.n_rounds) {
    s.phase = Phase::Finished;
  }
  return s.trace.back();
}

}  // namespace karma
