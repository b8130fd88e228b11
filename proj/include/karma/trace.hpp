#pragma once

#include <ostream>
#include <span>
#include <string>

#include "json.hpp"
#include "karma/config.hpp"
#include "karma/engine.hpp"

namespace karma {

inline void to_json(nlohmann::json& j, const RoundRecord& r) {
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& [a, b] : r.pairing) pairs.push_back({a, b});
  j = nlohmann::json{{"type", "round"},
                     {"round_index", r.round_index},
                     {"test_round", r.test_round},
                     {"urgencies", r.urgencies},
                     {"pairing", pairs},
                     {"bids", r.bids},
                     {"winners", r.winners},
                     {"tied", r.tied},
                     {"payments_total", r.payments_total},
                     {"redistribution", r.redistribution},
                     {"karma_after", r.karma_after},
                     {"score_after", r.score_after}};
}

inline void from_json(const nlohmann::json& j, RoundRecord& r) {
  r.round_index = j.at("round_index").get<int>();
  r.test_round = j.at("test_round").get<bool>();
  r.urgencies = j.at("urgencies").get<std::vector<int>>();
  r.pairing.clear();
  for (const auto& p : j.at("pairing")) r.pairing.emplace_back(p.at(0).get<int>(), p.at(1).get<int>());
  r.bids = j.at("bids").get<std::vector<int>>();
  r.winners = j.at("winners").get<std::vector<int>>();
  r.tied = j.at("tied").get<std::vector<bool>>();
  r.payments_total = j.at("payments_total").get<int>();
  r.redistribution = j.at("redistribution").get<std::vector<int>>();
  r.karma_after = j.at("karma_after").get<std::vector<int>>();
  r.score_after = j.at("score_after").get<std::vector<int>>();
}

// JSON lines: one header record carrying the config, then one per round.
inline void write_trace(std::ostream& out, const GameConfig& config,
                        std::span<const RoundRecord> trace, const std::string& game_id = "") {
  nlohmann::json header{{"type", "header"}, {"config", config}};
  if (!game_id.empty()) header["game"] = game_id;
  out << header.dump() << '\n';
  for (const auto& r : trace) out << nlohmann::json(r).dump() << '\n';
}

}  // namespace karma
