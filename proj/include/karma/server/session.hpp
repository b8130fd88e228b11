#pragma once

// A live karma session: seats held by humans (opaque tokens) or bots,
// decision windows with timeout, own-outcome feedback, inactivity handling
// and fee computation. All public methods lock the session, so client
// messages and timer expiry are applied one at a time.

#include <chrono>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "karma/agents.hpp"
#include "karma/config.hpp"
#include "karma/engine.hpp"
#include "karma/fees.hpp"
#include "karma/server/protocol.hpp"
#include "karma/simulator.hpp"

namespace karma::server {

using Clock = std::function<std::int64_t()>;

inline std::int64_t system_now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

enum class SessionPhase { Lobby, TestRounds, Main, Finished };

inline std::string to_string(SessionPhase p) {
  switch (p) {
    case SessionPhase::Lobby: return "lobby";
    case SessionPhase::TestRounds: return "test";
    case SessionPhase::Main: return "main";
    case SessionPhase::Finished: return "finished";
  }
  return "?";
}

struct SessionSpec {
  GameConfig config;
  int humans = 0;
  Population bots;  // must cover the remaining seats; policies attached on creation
  std::int64_t lobby_timeout_ms = 10 * 60 * 1000;
  double default_alpha = 0.98;
};

inline std::string random_token() {
  static thread_local std::mt19937_64 gen{std::random_device{}()};
  static constexpr char hex[] = "0123456789abcdef";
  std::string t(24, '0');
  for (auto& c : t) c = hex[gen() & 0xf];
  return t;
}

class Session {
 public:
  using Sink = std::function<void(const Message&)>;

  // Human seats come first, bots fill the rest in population order.
  Session(std::string id, SessionSpec spec, std::uint64_t seed, Clock clock = system_now_ms)
      : id_(std::move(id)), spec_(std::move(spec)), clock_(std::move(clock)) {
    spec_.config.seed = seed;
    validate(spec_.config);
    const int n = spec_.config.n_participants;
    if (spec_.humans < 0 || spec_.humans > n) throw ConfigError("human seat count out of range");
    if (spec_.humans + population_size(spec_.bots) != n)
      throw ConfigError("bots (" + std::to_string(population_size(spec_.bots)) + ") + humans (" +
                        std::to_string(spec_.humans) + ") must equal n_participants (" + std::to_string(n) +
                        ")");
    attach_policies(spec_.bots, spec_.config, spec_.default_alpha);
    game_ = new_game(spec_.config);
    auto bots = make_agents(spec_.bots, seed);
    seats_.resize(n);
    for (int i = 0; i < n; ++i) {
      Seat& s = seats_[i];
      if (i < spec_.humans) {
        s.human = true;
        s.token = random_token();
        s.kind = "human";
      } else {
        s.bot = std::move(bots[i - spec_.humans]);
        s.kind = to_string(s.bot->kind());
      }
    }
    created_ms_ = clock_();
  }

  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  const std::string& id() const { return id_; }
  const GameConfig& config() const { return spec_.config; }

  std::vector<std::string> tokens() const {
    std::lock_guard lock(mutex_);
    std::vector<std::string> out;
    for (const auto& s : seats_)
      if (s.human) out.push_back(s.token);
    return out;
  }

  SessionPhase phase() const {
    std::lock_guard lock(mutex_);
    return phase_;
  }

  bool finished() const { return phase() == SessionPhase::Finished; }

  // Global round number of the open decision window (0 when none).
  int current_round() const {
    std::lock_guard lock(mutex_);
    return decision_open_ ? global_round_ : 0;
  }

  std::int64_t deadline_ms() const {
    std::lock_guard lock(mutex_);
    return deadline_ms_;
  }

  std::optional<int> seat_of(const std::string& token) const {
    std::lock_guard lock(mutex_);
    return find_seat(token);
  }

  // Joins or re-joins a human seat. Returns the welcome plus, when a decision
  // window is open, the current RoundStart (missed rounds stay zero-bid).
  // With a sink, later messages are pushed to it; otherwise they queue for
  // drain(). The game starts once every human seat has joined.
  std::vector<Message> attach(const std::string& token, Sink sink = {}) {
    std::lock_guard lock(mutex_);
    auto seat = find_seat(token);
    if (!seat) return {ErrorMessage{"unknown token"}};
    Seat& s = seats_[*seat];
    s.joined = true;
    s.sink = nullptr;
    std::vector<Message> out;
    out.push_back(Welcome{id_, *seat, to_string(spec_.config.scheme), spec_.config.n_participants,
                          spec_.config.n_rounds, spec_.config.n_test_rounds, spec_.config.fee.t_dec,
                          to_string(phase_)});
    if (phase_ == SessionPhase::Lobby) {
      bool all = true;
      for (const auto& x : seats_) all = all && (!x.human || x.joined);
      if (all) start_locked();
    }
    // Anything queued so far is superseded by the snapshot returned here.
    s.outbox.clear();
    s.sink = std::move(sink);
    if (decision_open_ && !s.bid) out.push_back(round_start_for(*seat));
    if (phase_ == SessionPhase::Finished) out.push_back(game_end_for(*seat));
    return out;
  }

  void detach(const std::string& token) {
    std::lock_guard lock(mutex_);
    if (auto seat = find_seat(token)) seats_[*seat].sink = nullptr;
  }

  // Leaves the lobby regardless of who has joined.
  void start() {
    std::lock_guard lock(mutex_);
    if (phase_ == SessionPhase::Lobby) start_locked();
  }

  // The first valid bid per seat and round is binding. The ack is delivered
  // to the seat before any round resolution it triggers.
  BidAck submit_bid(const std::string& token, int round, int bid) {
    std::lock_guard lock(mutex_);
    BidAck ack;
    ack.round = round;
    ack.bid = bid;
    auto seat = find_seat(token);
    if (!seat) {
      ack.reason = "unknown token";
      return ack;
    }
    Seat& s = seats_[*seat];
    if (!decision_open_) {
      ack.reason = "no decision window open";
    } else if (round < global_round_) {
      ack.reason = "late: round " + std::to_string(round) + " already resolved";
    } else if (round > global_round_) {
      ack.reason = "round " + std::to_string(round) + " has not started";
    } else if (s.dropped) {
      ack.reason = "seat dropped for inactivity";
    } else if (s.bid) {
      ack.reason = "duplicate submission";
    } else if (!is_allowed(spec_.config.scheme, game_.players[*seat].karma, bid)) {
      ack.reason = "bid not allowed";
      ack.allowed_bids = allowed_bids(spec_.config.scheme, game_.players[*seat].karma);
    } else {
      ack.accepted = true;
      s.bid = bid;
    }
    deliver(*seat, ack);
    if (ack.accepted) advance_locked();
    return ack;
  }

  // Applies the lobby timeout and the decision deadline. Returns true when
  // something changed.
  bool tick() {
    std::lock_guard lock(mutex_);
    const std::int64_t now = clock_();
    if (phase_ == SessionPhase::Lobby && now >= created_ms_ + spec_.lobby_timeout_ms) {
      // Seats nobody claimed become zero bidders.
      for (auto& s : seats_)
        if (s.human && !s.joined) {
          s.human = false;
          s.bot = std::make_unique<ZeroBidder>();
          s.kind = "zero";
        }
      start_locked();
      return true;
    }
    if (decision_open_ && now >= deadline_ms_) {
      resolve_locked();
      advance_locked();
      return true;
    }
    return false;
  }

  std::vector<Message> drain(const std::string& token) {
    std::lock_guard lock(mutex_);
    auto seat = find_seat(token);
    if (!seat) return {};
    std::vector<Message> out(seats_[*seat].outbox.begin(), seats_[*seat].outbox.end());
    seats_[*seat].outbox.clear();
    return out;
  }

  std::vector<RoundRecord> trace() const {
    std::lock_guard lock(mutex_);
    return game_.trace;
  }

  Payoff payoff(int seat) const {
    std::lock_guard lock(mutex_);
    return compute_bonus(game_.players.at(seat).score, spec_.config.fee, seats_.at(seat).dropped);
  }

  GameResult result() const {
    std::lock_guard lock(mutex_);
    if (phase_ != SessionPhase::Finished) throw StateError("session " + id_ + " is not finished");
    GameResult r;
    r.config = spec_.config;
    for (int i = 0; i < spec_.config.n_participants; ++i) {
      auto p = karma::detail::summarize_participant(spec_.config, i, seats_[i].kind, game_.trace);
      p.dropped = seats_[i].dropped;
      r.participants.push_back(std::move(p));
    }
    r.trace = game_.trace;
    return r;
  }

  // Same rows as the simulator produces for a game.
  Dataset export_dataset(int game_index = 0) const { return rows_of(result(), game_index); }

  nlohmann::json summary() const {
    std::lock_guard lock(mutex_);
    int humans = 0, joined = 0;
    for (const auto& s : seats_) {
      humans += s.human;
      joined += s.human && s.joined;
    }
    return {{"id", id_},
            {"phase", to_string(phase_)},
            {"round", global_round_},
            {"seats", spec_.config.n_participants},
            {"humans", humans},
            {"joined", joined},
            {"scheme", to_string(spec_.config.scheme)},
            {"seed", spec_.config.seed}};
  }

 private:
  struct Seat {
    bool human = false;
    bool joined = false;
    std::string token;
    std::string kind;
    std::unique_ptr<Agent> bot;
    std::vector<Outcome> history;
    std::optional<int> bid;  // this round
    int inactive = 0;        // consecutive scored rounds without a bid
    bool dropped = false;
    Sink sink;
    std::deque<Message> outbox;
  };

  std::optional<int> find_seat(const std::string& token) const {
    for (int i = 0; i < static_cast<int>(seats_.size()); ++i)
      if (seats_[i].human && seats_[i].token == token) return i;
    return std::nullopt;
  }

  void deliver(int seat, const Message& m) {
    Seat& s = seats_[seat];
    if (!s.human) return;
    if (s.sink)
      s.sink(m);
    else
      s.outbox.push_back(m);
  }

  RoundStart round_start_for(int seat) const {
    RoundStart m;
    m.round = global_round_;
    m.phase = to_string(game_.phase);
    m.round_in_phase = game_.round;
    m.urgency = game_.urgencies[seat];
    m.high_urgency = m.urgency == spec_.config.urgency_high;
    m.karma = game_.players[seat].karma;
    m.allowed_bids = allowed_bids(spec_.config.scheme, m.karma);
    m.deadline_ms = deadline_ms_;
    m.server_time_ms = clock_();
    return m;
  }

  GameEnd game_end_for(int seat) const {
    Payoff pay = compute_bonus(game_.players[seat].score, spec_.config.fee, seats_[seat].dropped);
    return GameEnd{game_.players[seat].score, pay.bonus, pay.fixed, seats_[seat].dropped};
  }

  void start_locked() {
    phase_ = game_.phase == Phase::Test ? SessionPhase::TestRounds : SessionPhase::Main;
    open_round_locked();
    advance_locked();
  }

  void open_round_locked() {
    begin_round(game_);
    ++global_round_;
    decision_open_ = true;
    deadline_ms_ = clock_() + static_cast<std::int64_t>(spec_.config.fee.t_dec * 1000.0);
    for (int i = 0; i < static_cast<int>(seats_.size()); ++i) {
      Seat& s = seats_[i];
      s.bid.reset();
      if (s.bot) {
        s.bid = s.bot->decide(observe(game_, i, s.history));
      } else if (s.dropped) {
        s.bid = 0;
      }
    }
    for (int i = 0; i < static_cast<int>(seats_.size()); ++i)
      if (seats_[i].human && !seats_[i].dropped) deliver(i, round_start_for(i));
  }

  bool all_bid() const {
    for (const auto& s : seats_)
      if (!s.bid) return false;
    return true;
  }

  // Resolves rounds early while every seat has bid.
  void advance_locked() {
    while (decision_open_ && all_bid()) resolve_locked();
  }

  void resolve_locked() {
    const int n = static_cast<int>(seats_.size());
    const bool scored = game_.phase == Phase::Main;
    std::vector<int> bids(n);
    std::vector<bool> timed_out(n, false);
    for (int i = 0; i < n; ++i) {
      Seat& s = seats_[i];
      timed_out[i] = s.human && !s.dropped && !s.bid;
      bids[i] = s.bid.value_or(0);
      if (!s.human || s.dropped) continue;
      if (timed_out[i]) {
        if (scored) ++s.inactive;
      } else {
        s.inactive = 0;
      }
      if (s.inactive > spec_.config.fee.t_inactive) s.dropped = true;
    }
    decision_open_ = false;
    const RoundRecord& rec = step_round(game_, bids);
    auto fb = outcomes(rec);
    for (int i = 0; i < n; ++i) {
      seats_[i].history.push_back(fb[i]);
      RoundResult m;
      m.round = global_round_;
      m.phase = rec.test_round ? "test" : "main";
      m.won = fb[i].won;
      m.own_bid = bids[i];
      m.opponent_bid = fb[i].opponent_bid;
      m.payment = fb[i].payment;
      m.redistribution = fb[i].redistribution;
      m.karma_after = rec.karma_after[i];
      m.score_after = rec.score_after[i];
      m.timed_out = timed_out[i];
      m.inactive_rounds = seats_[i].inactive;
      m.dropped = seats_[i].dropped;
      deliver(i, m);
    }
    if (game_.phase == Phase::Finished) {
      phase_ = SessionPhase::Finished;
      for (int i = 0; i < n; ++i) deliver(i, game_end_for(i));
      return;
    }
    if (game_.phase == Phase::Main && phase_ == SessionPhase::TestRounds) {
      phase_ = SessionPhase::Main;
      for (auto& s : seats_) s.inactive = 0;
    }
    open_round_locked();
  }

  std::string id_;
  SessionSpec spec_;
  Clock clock_;
  mutable std::mutex mutex_;
  GameState game_;
  std::vector<Seat> seats_;
  SessionPhase phase_ = SessionPhase::Lobby;
  bool decision_open_ = false;
  int global_round_ = 0;
  std::int64_t deadline_ms_ = 0;
  std::int64_t created_ms_ = 0;
};

// Owns sessions, maps tokens to sessions, drives timers.
class SessionManager {
 public:
  explicit SessionManager(Clock clock = system_now_ms) : clock_(std::move(clock)) {}

  std::shared_ptr<Session> create(SessionSpec spec, std::uint64_t seed) {
    std::string id;
    {
      std::lock_guard lock(mutex_);
      id = "s" + std::to_string(++next_id_);
    }
    auto session = std::make_shared<Session>(id, std::move(spec), seed, clock_);
    std::lock_guard lock(mutex_);
    sessions_[id] = session;
    for (const auto& t : session->tokens()) by_token_[t] = session;
    return session;
  }

  std::shared_ptr<Session> get(const std::string& id) const {
    std::lock_guard lock(mutex_);
    auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
  }

  std::shared_ptr<Session> by_token(const std::string& token) const {
    std::lock_guard lock(mutex_);
    auto it = by_token_.find(token);
    return it == by_token_.end() ? nullptr : it->second;
  }

  std::vector<std::shared_ptr<Session>> all() const {
    std::lock_guard lock(mutex_);
    std::vector<std::shared_ptr<Session>> out;
    for (const auto& [id, s] : sessions_) out.push_back(s);
    return out;
  }

  void tick_all() {
    for (auto& s : all()) s->tick();
  }

 private:
  Clock clock_;
  mutable std::mutex mutex_;
  int next_id_ = 0;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::map<std::string, std::shared_ptr<Session>> by_token_;
};

}  // namespace karma::server
