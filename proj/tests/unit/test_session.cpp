#include <gtest/gtest.h>

#include <set>

#include "karma/server/session.hpp"
#include "karma/simulator.hpp"

using namespace karma;
using namespace karma::server;

namespace {

struct ManualClock {
  std::shared_ptr<std::int64_t> now = std::make_shared<std::int64_t>(1'000'000);
  Clock fn() const {
    auto p = now;
    return [p] { return *p; };
  }
  void advance(std::int64_t ms) { *now += ms; }
};

SessionSpec spec_for(const std::string& preset_name, int humans, const std::string& bots) {
  SessionSpec s;
  s.config = preset(preset_name);
  s.humans = humans;
  s.bots = parse_population(bots);
  return s;
}

template <typename T>
std::vector<T> only(const std::vector<Message>& msgs) {
  std::vector<T> out;
  for (const auto& m : msgs)
    if (auto* v = std::get_if<T>(&m)) out.push_back(*v);
  return out;
}

// Deterministic human strategy: everything when urgent, nothing otherwise.
int threshold_bid(const RoundStart& r) { return r.high_urgency ? r.allowed_bids.back() : 0; }

}  // namespace

TEST(Session, HeadlessSessionReproducesSimulator) {
  for (const auto& name : preset_names()) {
    auto pop = parse_population("policy:8,random:6,threshold:4,zero:2");
    attach_policies(pop, preset(name), 0.98);
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
      SessionSpec spec;
      spec.config = preset(name);
      spec.humans = 0;
      spec.bots = pop;
      Session s("h", spec, seed);
      s.start();
      ASSERT_TRUE(s.finished());
      auto sim = run_game(preset(name), pop, seed);
      ASSERT_EQ(s.trace(), sim.trace) << name << " seed " << seed;
      ASSERT_EQ(s.export_dataset(), rows_of(sim, 0));
    }
  }
}

TEST(Session, HumanSeatReproducesEquivalentAgent) {
  ManualClock clock;
  auto spec = spec_for("low-full", 1, "threshold:10,zero:9");
  Session s("x", spec, 44, clock.fn());
  auto token = s.tokens().at(0);
  auto msgs = s.attach(token);
  while (!s.finished()) {
    auto starts = only<RoundStart>(msgs);
    ASSERT_FALSE(starts.empty());
    auto ack = s.submit_bid(token, starts.back().round, threshold_bid(starts.back()));
    ASSERT_TRUE(ack.accepted) << ack.reason;
    msgs = s.drain(token);
  }
  auto sim = run_game(preset("low-full"), parse_population("threshold:11,zero:9"), 44);
  EXPECT_EQ(s.trace(), sim.trace);
}

TEST(Session, AttachStartsTheGameAndSendsRoundStart) {
  ManualClock clock;
  Session s("x", spec_for("low-binary", 1, "zero:19"), 1, clock.fn());
  EXPECT_EQ(s.phase(), SessionPhase::Lobby);
  EXPECT_EQ(s.attach("wrong").size(), 1u);
  auto msgs = s.attach(s.tokens()[0]);
  ASSERT_EQ(only<Welcome>(msgs).size(), 1u);
  auto starts = only<RoundStart>(msgs);
  ASSERT_EQ(starts.size(), 1u);
  EXPECT_EQ(s.phase(), SessionPhase::TestRounds);
  EXPECT_EQ(starts[0].round, 1);
  EXPECT_EQ(starts[0].phase, "test");
  EXPECT_EQ(starts[0].karma, 9);
  EXPECT_EQ(starts[0].allowed_bids, (std::vector<int>{0, 4}));
  EXPECT_EQ(starts[0].deadline_ms, *clock.now + 10'000);
}

TEST(Session, BidValidation) {
  ManualClock clock;
  Session s("x", spec_for("low-binary", 1, "zero:19"), 1, clock.fn());
  auto t = s.tokens()[0];
  s.attach(t);
  EXPECT_FALSE(s.submit_bid("nobody", 1, 0).accepted);
  EXPECT_FALSE(s.submit_bid(t, 2, 0).accepted);
  auto bad = s.submit_bid(t, 1, 3);
  EXPECT_FALSE(bad.accepted);
  EXPECT_EQ(bad.allowed_bids, (std::vector<int>{0, 4}));
  EXPECT_TRUE(s.submit_bid(t, 1, 4).accepted);
  // All bots had bid, so round 1 resolved and round 2 is open.
  EXPECT_EQ(s.current_round(), 2);
  EXPECT_FALSE(s.submit_bid(t, 1, 0).accepted);
  auto msgs = s.drain(t);
  auto acks = only<BidAck>(msgs);
  auto results = only<RoundResult>(msgs);
  ASSERT_EQ(results.size(), 1u);
  EXPECT_TRUE(results[0].won);
  EXPECT_EQ(results[0].payment, 4);
  // The accepted ack precedes the result it triggered.
  std::size_t ack_pos = 0, res_pos = 0;
  for (std::size_t i = 0; i < msgs.size(); ++i) {
    if (auto* a = std::get_if<BidAck>(&msgs[i]); a && a->accepted) ack_pos = i;
    if (std::holds_alternative<RoundResult>(msgs[i])) res_pos = i;
  }
  EXPECT_LT(ack_pos, res_pos);
  EXPECT_GE(acks.size(), 4u);
}

TEST(Session, DuplicateBidIsRejected) {
  ManualClock clock;
  Session s("x", spec_for("low-full", 2, "zero:18"), 1, clock.fn());
  auto t = s.tokens();
  s.attach(t[0]);
  s.attach(t[1]);
  EXPECT_TRUE(s.submit_bid(t[0], 1, 2).accepted);
  auto dup = s.submit_bid(t[0], 1, 3);
  EXPECT_FALSE(dup.accepted);
  EXPECT_EQ(dup.reason, "duplicate submission");
}

TEST(Session, DeadlineResolvesWithZeroBid) {
  ManualClock clock;
  Session s("x", spec_for("low-full", 1, "threshold:19"), 3, clock.fn());
  auto t = s.tokens()[0];
  s.attach(t);
  clock.advance(9'999);
  EXPECT_FALSE(s.tick());
  EXPECT_EQ(s.current_round(), 1);
  clock.advance(1);
  EXPECT_TRUE(s.tick());
  EXPECT_EQ(s.current_round(), 2);
  auto results = only<RoundResult>(s.drain(t));
  ASSERT_EQ(results.size(), 1u);
  EXPECT_TRUE(results[0].timed_out);
  EXPECT_EQ(results[0].own_bid, 0);
  EXPECT_EQ(s.trace().at(0).bids.at(0), 0);
}

TEST(Session, SilentSeatIsDroppedAfterSevenScoredTimeouts) {
  ManualClock clock;
  auto spec = spec_for("high-binary", 1, "policy:19");
  Session s("x", spec, 5, clock.fn());
  auto t = s.tokens()[0];
  s.attach(t);
  std::vector<RoundResult> results;
  while (!s.finished()) {
    clock.advance(10'000);
    s.tick();
    for (auto& r : only<RoundResult>(s.drain(t))) results.push_back(r);
  }
  // Five practice rounds do not count; the seventh scored timeout drops.
  ASSERT_GE(results.size(), 12u);
  for (int i = 0; i < 5; ++i) {
    EXPECT_EQ(results[i].inactive_rounds, 0);
    EXPECT_FALSE(results[i].dropped);
  }
  for (int i = 5; i < 11; ++i) EXPECT_FALSE(results[i].dropped) << i;
  EXPECT_TRUE(results[11].dropped);
  EXPECT_EQ(results[11].inactive_rounds, 7);
  auto end = s.payoff(0);
  EXPECT_DOUBLE_EQ(end.total(), 0.0);
  EXPECT_TRUE(s.export_dataset()[0].dropped);
  // Dropped seats keep bidding zero.
  for (const auto& r : s.trace()) EXPECT_EQ(r.bids[0], 0);
}

TEST(Session, ActivityResetsTheCounter) {
  ManualClock clock;
  Session s("x", spec_for("low-binary", 1, "zero:19"), 6, clock.fn());
  auto t = s.tokens()[0];
  auto msgs = s.attach(t);
  int round = 0;
  bool dropped = false;
  while (!s.finished()) {
    ++round;
    auto starts = only<RoundStart>(msgs);
    if (round % 6 == 0 && !starts.empty()) {
      s.submit_bid(t, starts.back().round, 0);
    } else {
      clock.advance(10'000);
      s.tick();
    }
    msgs = s.drain(t);
    for (auto& r : only<RoundResult>(msgs)) dropped = dropped || r.dropped;
  }
  EXPECT_FALSE(dropped);
}

TEST(Session, MessagesNeverRevealOtherSeats) {
  ManualClock clock;
  Session s("x", spec_for("high-full", 1, "policy:19"), 8, clock.fn());
  auto t = s.tokens()[0];
  auto msgs = s.attach(t);
  const std::set<std::string> allowed_keys = {
      "type",        "protocol_version", "session",      "seat",           "scheme",
      "n_participants", "n_rounds",     "n_test_rounds", "t_dec",          "phase",
      "round",       "round_in_phase",   "urgency",      "high_urgency",   "karma",
      "allowed_bids", "deadline_ms",     "server_time_ms", "accepted",     "bid",
      "reason",      "won",              "own_bid",      "opponent_bid",   "payment",
      "redistribution", "karma_after",   "score_after",  "timed_out",      "inactive_rounds",
      "dropped",     "final_score",      "bonus_fee",    "fixed_fee",      "message"};
  std::vector<Message> all;
  while (!s.finished()) {
    all.insert(all.end(), msgs.begin(), msgs.end());
    auto starts = only<RoundStart>(msgs);
    if (!starts.empty()) s.submit_bid(t, starts.back().round, threshold_bid(starts.back()));
    msgs = s.drain(t);
  }
  all.insert(all.end(), msgs.begin(), msgs.end());
  ASSERT_FALSE(all.empty());
  for (const auto& m : all) {
    auto j = to_json(m);
    for (auto it = j.begin(); it != j.end(); ++it) {
      EXPECT_TRUE(allowed_keys.count(it.key())) << it.key();
      if (it.key() == "urgency" || it.key() == "karma" || it.key() == "karma_after") {
        EXPECT_TRUE(it->is_number_integer());  // scalars about this seat only
      }
    }
  }
  // Urgency and karma in round starts are always this seat's.
  auto trace = s.trace();
  int checked = 0;
  for (const auto& m : all)
    if (auto* r = std::get_if<RoundStart>(&m)) {
      EXPECT_EQ(r->urgency, trace.at(r->round - 1).urgencies[0]);
      ++checked;
    }
  EXPECT_EQ(checked, 55);
}

TEST(Session, HumanBeatsZeroBiddersWheneverBidding) {
  ManualClock clock;
  Session s("x", spec_for("high-binary", 1, "zero:19"), 9, clock.fn());
  auto t = s.tokens()[0];
  auto msgs = s.attach(t);
  int contested = 0;
  while (!s.finished()) {
    auto starts = only<RoundStart>(msgs);
    ASSERT_FALSE(starts.empty());
    s.submit_bid(t, starts.back().round, starts.back().allowed_bids.back());
    msgs = s.drain(t);
    for (const auto& r : only<RoundResult>(msgs))
      if (r.own_bid > 0) {
        ++contested;
        EXPECT_TRUE(r.won) << "round " << r.round;
      }
  }
  EXPECT_GT(contested, 5);
  auto end = only<GameEnd>(msgs);
  ASSERT_EQ(end.size(), 1u);
}

TEST(Session, LobbyTimeoutFillsUnclaimedSeatsWithZeroBidders) {
  ManualClock clock;
  auto spec = spec_for("low-binary", 2, "policy:18");
  spec.lobby_timeout_ms = 5'000;
  Session s("x", spec, 2, clock.fn());
  auto tokens = s.tokens();
  s.attach(tokens[0]);
  EXPECT_EQ(s.phase(), SessionPhase::Lobby);
  clock.advance(5'000);
  EXPECT_TRUE(s.tick());
  EXPECT_EQ(s.phase(), SessionPhase::TestRounds);
  EXPECT_FALSE(s.seat_of(tokens[1]).has_value());
  EXPECT_EQ(s.seat_of(tokens[0]), 0);
}

TEST(Session, SpecMustFillEverySeat) {
  EXPECT_THROW(Session("x", spec_for("low-binary", 1, "zero:18"), 1), ConfigError);
  EXPECT_THROW(Session("x", spec_for("low-binary", 21, "zero:0"), 1), ConfigError);
}

TEST(Session, ManagerIndexesByIdAndToken) {
  SessionManager m;
  auto a = m.create(spec_for("low-binary", 1, "zero:19"), 1);
  auto b = m.create(spec_for("low-full", 2, "zero:18"), 2);
  EXPECT_EQ(m.all().size(), 2u);
  EXPECT_EQ(m.get(a->id()), a);
  EXPECT_EQ(m.by_token(b->tokens()[1]), b);
  EXPECT_EQ(m.get("nope"), nullptr);
  EXPECT_NE(a->id(), b->id());
  EXPECT_EQ(a->summary()["phase"], "lobby");
}

TEST(Session, ResultBeforeFinishThrows) {
  Session s("x", spec_for("low-binary", 1, "zero:19"), 1);
  EXPECT_THROW(s.result(), StateError);
}
