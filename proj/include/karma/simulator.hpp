#pragma once

// Batch execution of karma games and the two urgency-blind baselines
// (coin-flip random allocation and token turn-taking).

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <exception>
#include <map>
#include <mutex>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "karma/agents.hpp"
#include "karma/config.hpp"
#include "karma/engine.hpp"
#include "karma/error.hpp"

namespace karma {

struct ParticipantResult {
  int participant = 0;
  std::string agent_kind;
  std::vector<int> urgencies;  // scored rounds only
  int score = 0;               // S_i
  double score_random = 0.0;   // S_rand_i = 1/2 sum of urgencies
  int zero_bids = 0;           // scored rounds with bid 0
  int score_first_half = 0;
  int score_second_half = 0;
  bool dropped = false;
};

struct GameResult {
  GameConfig config;
  std::vector<ParticipantResult> participants;
  std::vector<RoundRecord> trace;  // test rounds first, then scored rounds
};

// One participant-level row of a dataset.
struct DatasetRow {
  int game = 0;
  int participant = 0;
  std::string agent_kind;
  double S = 0.0;
  double S_rand = 0.0;
  double gain = 0.0;
  bool dropped = false;
  double zero_bid_frac = 0.0;
  double S_h1 = 0.0;
  double S_rand_h1 = 0.0;
  double S_h2 = 0.0;
  double S_rand_h2 = 0.0;

  bool operator==(const DatasetRow&) const = default;
};

using Dataset = std::vector<DatasetRow>;

inline double efficiency_gain(double score, double score_random) {
  if (!(score_random > 0.0))
    throw StateError("efficiency_gain: degenerate benchmark S_rand = " + std::to_string(score_random));
  return (score - score_random) / score_random;
}

namespace detail {

inline ParticipantResult summarize_participant(const GameConfig& c, int i, std::string kind,
                                               const std::vector<RoundRecord>& trace) {
  ParticipantResult p;
  p.participant = i;
  p.agent_kind = std::move(kind);
  const int half = c.n_rounds / 2;
  int t = 0;
  for (const auto& r : trace) {
    if (r.test_round) continue;
    int u = r.urgencies[i];
    p.urgencies.push_back(u);
    bool won = false;
    for (int w : r.winners) won = won || w == i;
    if (won) {
      p.score += u;
      (t < half ? p.score_first_half : p.score_second_half) += u;
    }
    if (r.bids[i] == 0) ++p.zero_bids;
    ++t;
  }
  int sum = 0;
  for (int u : p.urgencies) sum += u;
  p.score_random = 0.5 * sum;
  return p;
}

}  // namespace detail

inline Observation observe(const GameState& s, int i, const std::vector<Outcome>& history) {
  Observation o;
  o.urgency = s.urgencies[i];
  o.high_urgency = s.urgencies[i] == s.config.urgency_high;
  o.karma = s.players[i].karma;
  o.round = s.round;
  o.test_round = s.phase == Phase::Test;
  o.scheme = s.config.scheme;
  o.history = history;
  return o;
}

// Own-outcome feedback for every participant after a round.
inline std::vector<Outcome> outcomes(const RoundRecord& r) {
  std::vector<Outcome> out(r.bids.size());
  for (std::size_t p = 0; p < r.pairing.size(); ++p) {
    auto [a, b] = r.pairing[p];
    int w = r.winners[p];
    out[a] = {w == a, r.bids[b], w == a ? r.bids[a] : 0, r.redistribution[a]};
    out[b] = {w == b, r.bids[a], w == b ? r.bids[b] : 0, r.redistribution[b]};
  }
  return out;
}

// T_test unscored rounds then T scored rounds, bids from `agents`.
inline GameResult run_game(const GameConfig& config, std::vector<std::unique_ptr<Agent>>& agents) {
  GameState s = new_game(config);
  if (static_cast<int>(agents.size()) != s.n())
    throw ConfigError("population size " + std::to_string(agents.size()) +
                      " does not match n_participants " + std::to_string(s.n()));
  std::vector<std::vector<Outcome>> history(s.n());
  std::vector<int> bids(s.n());
  while (!s.finished()) {
    begin_round(s);
    for (int i = 0; i < s.n(); ++i) bids[i] = agents[i]->decide(observe(s, i, history[i]));
    const RoundRecord& r = step_round(s, bids);
    auto fb = outcomes(r);
    for (int i = 0; i < s.n(); ++i) history[i].push_back(fb[i]);
  }
  GameResult res;
  res.config = config;
  for (int i = 0; i < s.n(); ++i)
    res.participants.push_back(
        detail::summarize_participant(config, i, to_string(agents[i]->kind()), s.trace));
  res.trace = std::move(s.trace);
  return res;
}

inline GameResult run_game(GameConfig config, const Population& population, std::uint64_t seed) {
  config.seed = seed;
  auto agents = make_agents(population, seed);
  return run_game(config, agents);
}

enum class Baseline { RandomAllocation, TurnTaking };

inline std::string to_string(Baseline b) {
  return b == Baseline::RandomAllocation ? "random-allocation" : "turn-taking";
}

// Urgency-blind allocation. Urgencies and matching come from the engine's
// environment stream, so a baseline and a karma game with the same seed face
// the same urgency trace. Coin flips use the resolve stream.
//   RandomAllocation: every pair decided by a fair coin.
//   TurnTaking: the participant with fewer allocations so far (more tokens)
//               wins, ties by coin; counts restart when scoring starts.
inline GameResult run_baseline(GameConfig config, Baseline kind, std::uint64_t seed) {
  config.seed = seed;
  GameState s = new_game(config);
  std::vector<int> allocations(s.n(), 0);
  std::vector<int> zeros(s.n(), 0);
  while (!s.finished()) {
    begin_round(s);
    RoundRecord r;
    r.round_index = s.round;
    r.test_round = s.phase == Phase::Test;
    r.urgencies = s.urgencies;
    r.pairing = s.pairing;
    r.bids = zeros;
    for (auto [a, b] : s.pairing) {
      bool first;
      bool tie = true;
      if (kind == Baseline::TurnTaking && allocations[a] != allocations[b]) {
        first = allocations[a] < allocations[b];
        tie = false;
      } else {
        first = fair_coin(s.resolve_rng);
      }
      int w = first ? a : b;
      ++allocations[w];
      r.winners.push_back(w);
      r.tied.push_back(tie);
      if (s.scoring()) s.players[w].score += s.urgencies[w];
    }
    r.redistribution = zeros;
    for (const auto& p : s.players) {
      r.karma_after.push_back(p.karma);
      r.score_after.push_back(p.score);
    }
    s.trace.push_back(std::move(r));
    s.urgencies.clear();
    s.pairing.clear();
    ++s.round;
    if (s.phase == Phase::Test && s.round > config.n_test_rounds) {
      s.phase = Phase::Main;
      s.round = 1;
      std::fill(allocations.begin(), allocations.end(), 0);
    } else if (s.phase == Phase::Main && s.round > config.n_rounds) {
      s.phase = Phase::Finished;
    }
  }
  GameResult res;
  res.config = config;
  for (int i = 0; i < s.n(); ++i)
    res.participants.push_back(detail::summarize_participant(config, i, to_string(kind), s.trace));
  res.trace = std::move(s.trace);
  return res;
}

inline std::vector<DatasetRow> rows_of(const GameResult& g, int game_index) {
  std::vector<DatasetRow> rows;
  const int half = g.config.n_rounds / 2;
  for (const auto& p : g.participants) {
    DatasetRow r;
    r.game = game_index;
    r.participant = p.participant;
    r.agent_kind = p.agent_kind;
    r.S = p.score;
    r.S_rand = p.score_random;
    r.gain = efficiency_gain(r.S, r.S_rand);
    r.dropped = p.dropped;
    r.zero_bid_frac = p.urgencies.empty() ? 0.0 : static_cast<double>(p.zero_bids) / p.urgencies.size();
    int u1 = 0, u2 = 0;
    for (std::size_t t = 0; t < p.urgencies.size(); ++t)
      (static_cast<int>(t) < half ? u1 : u2) += p.urgencies[t];
    r.S_h1 = p.score_first_half;
    r.S_rand_h1 = 0.5 * u1;
    r.S_h2 = p.score_second_half;
    r.S_rand_h2 = 0.5 * u2;
    rows.push_back(std::move(r));
  }
  return rows;
}

struct BatchSpec {
  GameConfig config;
  Population population;
  int n_games = 1;
  std::uint64_t base_seed = 0;
  double default_alpha = 0.98;  // for PolicyAgent entries without a discount
  int threads = 0;              // 0: hardware concurrency
  bool keep_traces = false;
};

struct BatchResult {
  Dataset rows;                              // game-major, participant-minor
  std::vector<std::vector<RoundRecord>> traces;  // filled when keep_traces
};

namespace detail {

// Runs job(i) for i in [0, n) on up to `threads` workers.
template <typename Job>
void parallel_for(int n, int threads, Job job) {
  int workers = threads > 0 ? threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  workers = std::min(workers, n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) job(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          job(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

template <typename GameFn>
BatchResult run_games(int n_games, int threads, bool keep_traces, GameFn play) {
  if (n_games < 1) throw ConfigError("n_games must be at least 1");
  std::vector<std::vector<DatasetRow>> per_game(n_games);
  BatchResult out;
  if (keep_traces) out.traces.resize(n_games);
  parallel_for(n_games, threads, [&](int g) {
    GameResult r = play(g);
    per_game[g] = rows_of(r, g);
    if (keep_traces) out.traces[g] = std::move(r.trace);
  });
  for (auto& rows : per_game) out.rows.insert(out.rows.end(), rows.begin(), rows.end());
  return out;
}

}  // namespace detail

// Game i uses seed base_seed + i.
inline BatchResult run_batch(BatchSpec spec) {
  validate(spec.config);
  if (population_size(spec.population) != spec.config.n_participants)
    throw ConfigError("population counts sum to " + std::to_string(population_size(spec.population)) +
                      ", expected " + std::to_string(spec.config.n_participants));
  attach_policies(spec.population, spec.config, spec.default_alpha);
  return detail::run_games(spec.n_games, spec.threads, spec.keep_traces, [&](int g) {
    return run_game(spec.config, spec.population, spec.base_seed + static_cast<std::uint64_t>(g));
  });
}

inline BatchResult simulate_baseline(const GameConfig& config, Baseline kind, int n_games,
                                     std::uint64_t seed, int threads = 0, bool keep_traces = false) {
  validate(config);
  return detail::run_games(n_games, threads, keep_traces, [&](int g) {
    return run_baseline(config, kind, seed + static_cast<std::uint64_t>(g));
  });
}

inline Dataset simulate_random_allocation(const GameConfig& config, int n_games, std::uint64_t seed) {
  return simulate_baseline(config, Baseline::RandomAllocation, n_games, seed).rows;
}

inline Dataset simulate_turn_taking(const GameConfig& config, int n_games, std::uint64_t seed) {
  return simulate_baseline(config, Baseline::TurnTaking, n_games, seed).rows;
}

// ---------------------------------------------------------------------------
// CSV

inline std::string format_number(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

inline const char* kDatasetHeader =
    "game,participant,agent_kind,S,S_rand,gain,dropped,zero_bid_frac,S_h1,S_rand_h1,S_h2,S_rand_h2";

inline void write_dataset(std::ostream& out, const Dataset& rows) {
  out << kDatasetHeader << '\n';
  for (const auto& r : rows) {
    out << r.game << ',' << r.participant << ',' << r.agent_kind << ',' << format_number(r.S) << ','
        << format_number(r.S_rand) << ',' << format_number(r.gain) << ',' << (r.dropped ? 1 : 0) << ','
        << format_number(r.zero_bid_frac) << ',' << format_number(r.S_h1) << ','
        << format_number(r.S_rand_h1) << ',' << format_number(r.S_h2) << ','
        << format_number(r.S_rand_h2) << '\n';
  }
}

inline Dataset read_dataset(std::istream& in, const std::string& source = "dataset") {
  std::string line;
  if (!std::getline(in, line)) throw IoError(source + ": empty file");
  std::vector<std::string> cols;
  {
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cols.push_back(c);
  }
  std::map<std::string, int> at;
  for (int i = 0; i < static_cast<int>(cols.size()); ++i) at[cols[i]] = i;
  for (const char* req : {"game", "participant", "agent_kind", "S", "S_rand", "gain"})
    if (!at.count(req)) throw IoError(source + ": missing column '" + req + "'");

  Dataset rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) f.push_back(c);
    if (f.size() != cols.size())
      throw IoError(source + ":" + std::to_string(lineno) + ": expected " + std::to_string(cols.size()) +
                    " fields");
    auto num = [&](const char* name, double fallback) {
      auto it = at.find(name);
      if (it == at.end()) return fallback;
      try {
        return std::stod(f[it->second]);
      } catch (const std::logic_error&) {
        throw IoError(source + ":" + std::to_string(lineno) + ": bad number in column " + name);
      }
    };
    DatasetRow r;
    r.game = static_cast<int>(num("game", 0));
    r.participant = static_cast<int>(num("participant", 0));
    r.agent_kind = f[at["agent_kind"]];
    r.S = num("S", 0);
    r.S_rand = num("S_rand", 0);
    r.gain = num("gain", 0);
    r.dropped = num("dropped", 0) != 0.0;
    r.zero_bid_frac = num("zero_bid_frac", 0);
    r.S_h1 = num("S_h1", 0);
    r.S_rand_h1 = num("S_rand_h1", 0);
    r.S_h2 = num("S_h2", 0);
    r.S_rand_h2 = num("S_rand_h2", 0);
    rows.push_back(std::move(r));
  }
  return rows;
}

inline Dataset read_dataset_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset " + path);
  return read_dataset(in, path);
}

inline std::vector<double> gains_of(const Dataset& rows) {
  std::vector<double> g;
  g.reserve(rows.size());
  for (const auto& r : rows) g.push_back(r.gain);
  return g;
}

}  // namespace karma
