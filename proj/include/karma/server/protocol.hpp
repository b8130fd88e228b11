#pragma once

// Wire format between the session server and its clients.
//
// Each message is a JSON object with a "type" tag and "protocol_version",
// sent as a frame: 4-byte big-endian payload length, then UTF-8 JSON.
// Timestamps are milliseconds since the Unix epoch, UTC.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"
#include "karma/error.hpp"

namespace karma::server {

inline constexpr int kProtocolVersion = 1;
inline constexpr std::size_t kMaxFrameBytes = 1 << 20;

// client -> server
struct Join {
  std::string token;
};

struct BidSubmit {
  int round = 0;
  int bid = 0;
};

// server -> client
struct Welcome {
  std::string session;
  int seat = 0;
  std::string scheme;
  int n_participants = 0;
  int n_rounds = 0;
  int n_test_rounds = 0;
  double t_dec = 0.0;
  std::string phase;
};

struct RoundStart {
  int round = 0;           // 1..T_test+T across the whole session
  std::string phase;       // "test" or "main"
  int round_in_phase = 0;
  int urgency = 0;
  bool high_urgency = false;
  int karma = 0;
  std::vector<int> allowed_bids;
  std::int64_t deadline_ms = 0;
  std::int64_t server_time_ms = 0;
};

struct BidAck {
  int round = 0;
  bool accepted = false;
  int bid = 0;
  std::string reason;
  std::vector<int> allowed_bids;  // filled on rejection
};

// Own outcome plus the opposing bid; never the opponent's urgency or karma.
struct RoundResult {
  int round = 0;
  std::string phase;
  bool won = false;
  int own_bid = 0;
  int opponent_bid = 0;
  int payment = 0;
  int redistribution = 0;
  int karma_after = 0;
  int score_after = 0;
  bool timed_out = false;  // bid defaulted to zero
  int inactive_rounds = 0;
  bool dropped = false;
};

struct GameEnd {
  int final_score = 0;
  double bonus_fee = 0.0;
  double fixed_fee = 0.0;
  bool dropped = false;
};

struct ErrorMessage {
  std::string message;
};

using Message =
    std::variant<Join, BidSubmit, Welcome, RoundStart, BidAck, RoundResult, GameEnd, ErrorMessage>;

inline nlohmann::json to_json(const Message& m) {
  using nlohmann::json;
  json j = std::visit(
      [](const auto& v) -> json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Join>) {
          return {{"type", "join"}, {"token", v.token}};
        } else if constexpr (std::is_same_v<T, BidSubmit>) {
          return {{"type", "bid_submit"}, {"round", v.round}, {"bid", v.bid}};
        } else if constexpr (std::is_same_v<T, Welcome>) {
          return {{"type", "welcome"},       {"session", v.session},
                  {"seat", v.seat},          {"scheme", v.scheme},
                  {"n_participants", v.n_participants}, {"n_rounds", v.n_rounds},
                  {"n_test_rounds", v.n_test_rounds},   {"t_dec", v.t_dec},
                  {"phase", v.phase}};
        } else if constexpr (std::is_same_v<T, RoundStart>) {
          return {{"type", "round_start"},       {"round", v.round},
                  {"phase", v.phase},            {"round_in_phase", v.round_in_phase},
                  {"urgency", v.urgency},        {"high_urgency", v.high_urgency},
                  {"karma", v.karma},            {"allowed_bids", v.allowed_bids},
                  {"deadline_ms", v.deadline_ms}, {"server_time_ms", v.server_time_ms}};
        } else if constexpr (std::is_same_v<T, BidAck>) {
          return {{"type", "bid_ack"}, {"round", v.round},   {"accepted", v.accepted},
                  {"bid", v.bid},      {"reason", v.reason}, {"allowed_bids", v.allowed_bids}};
        } else if constexpr (std::is_same_v<T, RoundResult>) {
          return {{"type", "round_result"},
                  {"round", v.round},
                  {"phase", v.phase},
                  {"won", v.won},
                  {"own_bid", v.own_bid},
                  {"opponent_bid", v.opponent_bid},
                  {"payment", v.payment},
                  {"redistribution", v.redistribution},
                  {"karma_after", v.karma_after},
                  {"score_after", v.score_after},
                  {"timed_out", v.timed_out},
                  {"inactive_rounds", v.inactive_rounds},
                  {"dropped", v.dropped}};
        } else if constexpr (std::is_same_v<T, GameEnd>) {
          return {{"type", "game_end"},        {"final_score", v.final_score},
                  {"bonus_fee", v.bonus_fee},  {"fixed_fee", v.fixed_fee},
                  {"dropped", v.dropped}};
        } else {
          return {{"type", "error"}, {"message", v.message}};
        }
      },
      m);
  j["protocol_version"] = kProtocolVersion;
  return j;
}

inline Message from_json(const nlohmann::json& j) {
  try {
    if (j.value("protocol_version", 0) != kProtocolVersion)
      throw StateError("unsupported protocol_version");
    const std::string type = j.at("type").get<std::string>();
    if (type == "join") return Join{j.at("token").get<std::string>()};
    if (type == "bid_submit") return BidSubmit{j.at("round").get<int>(), j.at("bid").get<int>()};
    if (type == "welcome")
      return Welcome{j.at("session"),        j.at("seat"),     j.at("scheme"),
                     j.at("n_participants"), j.at("n_rounds"), j.at("n_test_rounds"),
                     j.at("t_dec"),          j.at("phase")};
    if (type == "round_start")
      return RoundStart{j.at("round"),        j.at("phase"),        j.at("round_in_phase"),
                        j.at("urgency"),      j.at("high_urgency"), j.at("karma"),
                        j.at("allowed_bids"), j.at("deadline_ms"),  j.at("server_time_ms")};
    if (type == "bid_ack")
      return BidAck{j.at("round"), j.at("accepted"), j.at("bid"), j.at("reason"), j.at("allowed_bids")};
    if (type == "round_result")
      return RoundResult{j.at("round"),          j.at("phase"),          j.at("won"),
                         j.at("own_bid"),        j.at("opponent_bid"),   j.at("payment"),
                         j.at("redistribution"), j.at("karma_after"),    j.at("score_after"),
                         j.at("timed_out"),      j.at("inactive_rounds"), j.at("dropped")};
    if (type == "game_end")
      return GameEnd{j.at("final_score"), j.at("bonus_fee"), j.at("fixed_fee"), j.at("dropped")};
    if (type == "error") return ErrorMessage{j.at("message").get<std::string>()};
    throw StateError("unknown message type '" + type + "'");
  } catch (const nlohmann::json::exception& e) {
    throw StateError(std::string("malformed message: ") + e.what());
  }
}

inline std::string encode_frame(const Message& m) {
  const std::string body = to_json(m).dump();
  const auto n = static_cast<std::uint32_t>(body.size());
  std::string out;
  out.reserve(4 + body.size());
  out.push_back(static_cast<char>((n >> 24) & 0xff));
  out.push_back(static_cast<char>((n >> 16) & 0xff));
  out.push_back(static_cast<char>((n >> 8) & 0xff));
  out.push_back(static_cast<char>(n & 0xff));
  out += body;
  return out;
}

// Incremental frame parser for a byte stream.
class FrameDecoder {
 public:
  void feed(std::string_view bytes) { buffer_.append(bytes); }

  // Next complete message, if any. Throws StateError on an oversized frame
  // or a payload that is not a valid message.
  std::optional<Message> next() {
    if (buffer_.size() < 4) return std::nullopt;
    std::uint32_t n = 0;
    for (int i = 0; i < 4; ++i) n = (n << 8) | static_cast<unsigned char>(buffer_[i]);
    if (n > kMaxFrameBytes) throw StateError("frame too large");
    if (buffer_.size() < 4 + static_cast<std::size_t>(n)) return std::nullopt;
    std::string body = buffer_.substr(4, n);
    buffer_.erase(0, 4 + static_cast<std::size_t>(n));
    nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
    if (j.is_discarded()) throw StateError("frame is not JSON");
    return from_json(j);
  }

 private:
  std::string buffer_;
};

}  // namespace karma::server
