#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "karma/error.hpp"

namespace karma {

enum class Scheme { Binary, FullRange };

inline std::string to_string(Scheme s) {
  return s == Scheme::Binary ? "binary" : "full";
}

inline Scheme scheme_from_string(std::string_view s) {
  if (s == "binary") return Scheme::Binary;
  if (s == "full" || s == "full-range" || s == "fullrange") return Scheme::FullRange;
  throw ConfigError("unknown bid scheme '" + std::string(s) + "'");
}

// Bonus-fee and timing parameters of a live session.
struct FeeParams {
  double s_targ = 90.0;     // target score
  double s_rand = 37.5;     // random score
  double phi_targ = 10.0;   // bonus at s_targ
  double phi_rand = 1.0;    // bonus at s_rand
  double phi_fix = 1.5;     // fixed fee
  int t_inactive = 6;       // consecutive silent rounds tolerated
  double t_dec = 10.0;      // decision window, seconds

  bool operator==(const FeeParams&) const = default;
};

struct GameConfig {
  int n_participants = 20;
  int n_rounds = 50;
  int n_test_rounds = 5;
  int karma_init = 9;
  int karma_max = 18;
  int urgency_low = 1;
  int urgency_high = 5;
  double p_high = 0.5;
  Scheme scheme = Scheme::Binary;
  FeeParams fee;
  std::uint64_t seed = 0;

  bool operator==(const GameConfig&) const = default;

  int total_karma() const { return n_participants * karma_init; }
  int n_karma_levels() const { return karma_max + 1; }
  double mean_urgency() const {
    return (1.0 - p_high) * urgency_low + p_high * urgency_high;
  }
};

// Throws ConfigError describing the first violated constraint.
inline void validate(const GameConfig& c) {
  auto fail = [](const std::string& msg) { throw ConfigError("invalid config: " + msg); };
  if (c.n_participants <= 0 || c.n_participants % 2 != 0)
    fail("n_participants must be a positive even integer, got " + std::to_string(c.n_participants));
  if (c.n_rounds <= 0) fail("n_rounds must be positive");
  if (c.n_test_rounds < 0) fail("n_test_rounds must be nonnegative");
  if (c.karma_max <= 0) fail("karma_max must be positive");
  if (c.karma_init < 0) fail("karma_init must be nonnegative");
  if (c.karma_init > c.karma_max)
    fail("karma_init (" + std::to_string(c.karma_init) + ") exceeds karma_max (" +
         std::to_string(c.karma_max) + ")");
  if (c.urgency_low <= 0) fail("urgency_low must be positive");
  if (c.urgency_high <= c.urgency_low) fail("urgency_high must exceed urgency_low");
  if (!(c.p_high >= 0.0 && c.p_high <= 1.0)) fail("p_high must lie in [0,1]");
  const FeeParams& f = c.fee;
  if (!(f.s_targ > f.s_rand)) fail("fee.s_targ must exceed fee.s_rand");
  if (!(f.phi_targ > f.phi_rand && f.phi_rand >= 0.0))
    fail("fee requires phi_targ > phi_rand >= 0");
  if (f.t_inactive < 0) fail("fee.t_inactive must be nonnegative");
  if (!(f.t_dec > 0.0)) fail("fee.t_dec must be positive");
}

// ---------------------------------------------------------------------------
// Treatment presets (2x2 design: stake x scheme).

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {"low-binary", "low-full", "high-binary",
                                                 "high-full"};
  return names;
}

inline GameConfig preset(std::string_view name) {
  GameConfig c;
  if (name == "low-binary" || name == "low-full") {
    c.urgency_high = 5;
    c.p_high = 0.5;
    c.fee.s_targ = 90.0;
  } else if (name == "high-binary" || name == "high-full") {
    c.urgency_high = 9;
    c.p_high = 0.25;
    c.fee.s_targ = 101.25;
  } else {
    throw ConfigError("unknown preset '" + std::string(name) + "'");
  }
  c.scheme = name.ends_with("binary") ? Scheme::Binary : Scheme::FullRange;
  return c;
}

inline bool is_preset(std::string_view name) {
  for (const auto& n : preset_names())
    if (n == name) return true;
  return false;
}

// ---------------------------------------------------------------------------
// JSON

inline void to_json(nlohmann::json& j, const FeeParams& f) {
  j = nlohmann::json{{"s_targ", f.s_targ},     {"s_rand", f.s_rand},
                     {"phi_targ", f.phi_targ}, {"phi_rand", f.phi_rand},
                     {"phi_fix", f.phi_fix},   {"t_inactive", f.t_inactive},
                     {"t_dec", f.t_dec}};
}

inline void from_json(const nlohmann::json& j, FeeParams& f) {
  FeeParams d;
  f.s_targ = j.value("s_targ", d.s_targ);
  f.s_rand = j.value("s_rand", d.s_rand);
  f.phi_targ = j.value("phi_targ", d.phi_targ);
  f.phi_rand = j.value("phi_rand", d.phi_rand);
  f.phi_fix = j.value("phi_fix", d.phi_fix);
  f.t_inactive = j.value("t_inactive", d.t_inactive);
  f.t_dec = j.value("t_dec", d.t_dec);
}

inline void to_json(nlohmann::json& j, const GameConfig& c) {
  j = nlohmann::json{{"n_participants", c.n_participants},
                     {"n_rounds", c.n_rounds},
                     {"n_test_rounds", c.n_test_rounds},
                     {"karma_init", c.karma_init},
                     {"karma_max", c.karma_max},
                     {"urgency_low", c.urgency_low},
                     {"urgency_high", c.urgency_high},
                     {"p_high", c.p_high},
                     {"scheme", to_string(c.scheme)},
                     {"fee", c.fee},
                     {"seed", c.seed}};
}

// Missing keys fall back to the low-binary defaults; a "preset" key selects
// the base values that the remaining keys override.
inline void from_json(const nlohmann::json& j, GameConfig& c) {
  GameConfig d = j.contains("preset") ? preset(j.at("preset").get<std::string>()) : GameConfig{};
  try {
    c.n_participants = j.value("n_participants", d.n_participants);
    c.n_rounds = j.value("n_rounds", d.n_rounds);
    c.n_test_rounds = j.value("n_test_rounds", d.n_test_rounds);
    c.karma_init = j.value("karma_init", d.karma_init);
    c.karma_max = j.value("karma_max", d.karma_max);
    c.urgency_low = j.value("urgency_low", d.urgency_low);
    c.urgency_high = j.value("urgency_high", d.urgency_high);
    c.p_high = j.value("p_high", d.p_high);
    c.scheme = j.contains("scheme") ? scheme_from_string(j.at("scheme").get<std::string>())
                                    : d.scheme;
    c.fee = d.fee;
    if (j.contains("fee")) {
      nlohmann::json merged = d.fee;
      merged.update(j.at("fee"));
      c.fee = merged.get<FeeParams>();
    }
    c.seed = j.value("seed", d.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
}

// A preset name or a path to a JSON config file.
inline GameConfig load_config(const std::string& name_or_path) {
  if (is_preset(name_or_path)) return preset(name_or_path);
  std::ifstream in(name_or_path);
  if (!in) throw ConfigError("unknown preset or unreadable config file '" + name_or_path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("cannot parse " + name_or_path + ": " + e.what());
  }
  GameConfig c = j.get<GameConfig>();
  validate(c);
  return c;
}

}  // namespace karma
