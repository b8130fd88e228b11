#pragma once

// Bidding strategies. An agent sees only its own state and outcomes, the
// same information a participant gets on the decision and results pages.

#include <cstdint>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "karma/config.hpp"
#include "karma/engine.hpp"
#include "karma/equilibrium.hpp"
#include "karma/rng.hpp"

namespace karma {

struct Outcome {
  bool won = false;
  int opponent_bid = 0;
  int payment = 0;
  int redistribution = 0;
};

struct Observation {
  int urgency = 0;
  bool high_urgency = false;
  int karma = 0;
  int round = 1;
  bool test_round = false;
  Scheme scheme = Scheme::Binary;
  std::vector<Outcome> history;  // own past rounds, oldest first
};

enum class AgentKind { Zero, UniformRandom, UrgencyThreshold, Policy, Scripted };

inline std::string to_string(AgentKind k) {
  switch (k) {
    case AgentKind::Zero: return "zero";
    case AgentKind::UniformRandom: return "random";
    case AgentKind::UrgencyThreshold: return "threshold";
    case AgentKind::Policy: return "policy";
    case AgentKind::Scripted: return "scripted";
  }
  return "?";
}

inline AgentKind agent_kind_from_string(std::string_view s) {
  if (s == "zero") return AgentKind::Zero;
  if (s == "random" || s == "uniform") return AgentKind::UniformRandom;
  if (s == "threshold") return AgentKind::UrgencyThreshold;
  if (s == "policy") return AgentKind::Policy;
  if (s == "scripted") return AgentKind::Scripted;
  throw ConfigError("unknown agent kind '" + std::string(s) + "'");
}

class Agent {
 public:
  virtual ~Agent() = default;
  // Always returns a member of allowed_bids(obs.scheme, obs.karma).
  virtual int decide(const Observation& obs) = 0;
  virtual AgentKind kind() const = 0;
};

// Never bids; the non-adopter archetype.
class ZeroBidder final : public Agent {
 public:
  int decide(const Observation&) override { return 0; }
  AgentKind kind() const override { return AgentKind::Zero; }
};

class UniformRandomAgent final : public Agent {
 public:
  explicit UniformRandomAgent(std::uint64_t seed) : rng_(seed) {}
  int decide(const Observation& obs) override {
    auto bids = allowed_bids(obs.scheme, obs.karma);
    return bids[uniform_below(rng_, bids.size())];
  }
  AgentKind kind() const override { return AgentKind::UniformRandom; }

 private:
  Rng rng_;
};

// Largest allowed bid when urgent, nothing otherwise.
class UrgencyThresholdAgent final : public Agent {
 public:
  int decide(const Observation& obs) override {
    return obs.high_urgency ? max_allowed_bid(obs.scheme, obs.karma) : 0;
  }
  AgentKind kind() const override { return AgentKind::UrgencyThreshold; }
};

// Samples its bid from a stationary policy table.
class PolicyAgent final : public Agent {
 public:
  PolicyAgent(std::shared_ptr<const Policy> policy, std::uint64_t seed)
      : policy_(std::move(policy)), rng_(seed) {}
  int decide(const Observation& obs) override {
    auto probs = policy_->probs(obs.high_urgency ? 1 : 0, obs.karma);
    double x = uniform_unit(rng_);
    int last = 0;
    for (int b = 0; b < static_cast<int>(probs.size()); ++b) {
      if (probs[b] <= 0.0) continue;
      last = b;
      x -= probs[b];
      if (x < 0.0) return b;
    }
    return last;
  }
  AgentKind kind() const override { return AgentKind::Policy; }

 private:
  std::shared_ptr<const Policy> policy_;
  Rng rng_;
};

// Replays a fixed list of bids; infeasible entries and rounds past the end
// of the list bid 0.
class ScriptedAgent final : public Agent {
 public:
  explicit ScriptedAgent(std::vector<int> bids) : bids_(std::move(bids)) {}
  int decide(const Observation& obs) override {
    int b = next_ < bids_.size() ? bids_[next_] : 0;
    ++next_;
    return is_allowed(obs.scheme, obs.karma, b) ? b : 0;
  }
  AgentKind kind() const override { return AgentKind::Scripted; }

 private:
  std::vector<int> bids_;
  std::size_t next_ = 0;
};

// ---------------------------------------------------------------------------
// Populations

struct AgentSpec {
  AgentKind kind = AgentKind::Zero;
  int count = 0;
  double alpha = -1.0;  // PolicyAgent discount; < 0 means "use the default"
  std::shared_ptr<const Policy> policy;
  std::vector<int> script;
};

using Population = std::vector<AgentSpec>;

inline int population_size(const Population& pop) {
  int n = 0;
  for (const auto& s : pop) n += s.count;
  return n;
}

// "policy:18,zero:2" or "policy@0.5:18,threshold:2".
inline Population parse_population(std::string_view text) {
  Population pop;
  std::string item;
  std::stringstream ss{std::string(text)};
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    auto colon = item.rfind(':');
    if (colon == std::string::npos) throw ConfigError("population entry '" + item + "' lacks ':count'");
    std::string head = item.substr(0, colon);
    AgentSpec spec;
    try {
      spec.count = std::stoi(item.substr(colon + 1));
      auto at = head.find('@');
      if (at != std::string::npos) {
        spec.alpha = std::stod(head.substr(at + 1));
        head = head.substr(0, at);
      }
    } catch (const std::logic_error&) {
      throw ConfigError("malformed population entry '" + item + "'");
    }
    spec.kind = agent_kind_from_string(head);
    if (spec.count < 0) throw ConfigError("negative agent count in '" + item + "'");
    pop.push_back(std::move(spec));
  }
  if (pop.empty()) throw ConfigError("empty population spec");
  return pop;
}

inline Population population_from_json(const nlohmann::json& j) {
  Population pop;
  for (const auto& e : j) {
    AgentSpec s;
    s.kind = agent_kind_from_string(e.at("kind").get<std::string>());
    s.count = e.at("count").get<int>();
    s.alpha = e.value("alpha", -1.0);
    if (e.contains("script")) s.script = e.at("script").get<std::vector<int>>();
    pop.push_back(std::move(s));
  }
  return pop;
}

inline std::string describe(const Population& pop) {
  std::string out;
  for (const auto& s : pop) {
    if (!out.empty()) out += ",";
    out += to_string(s.kind);
    if (s.kind == AgentKind::Policy && s.alpha >= 0.0) {
      std::ostringstream a;
      a << s.alpha;
      out += "@" + a.str();
    }
    out += ":" + std::to_string(s.count);
  }
  return out;
}

// Solves (once per distinct discount) and attaches equilibrium policies to
// every PolicyAgent entry that does not carry one yet.
inline void attach_policies(Population& pop, const GameConfig& config, double default_alpha,
                            SolverOptions options = {}) {
  std::map<double, std::shared_ptr<const Policy>> solved;
  for (auto& s : pop) {
    if (s.kind != AgentKind::Policy || s.policy) continue;
    double alpha = s.alpha >= 0.0 ? s.alpha : default_alpha;
    auto it = solved.find(alpha);
    if (it == solved.end()) {
      options.discount = alpha;
      auto eq = solve_equilibrium(config, options);
      it = solved.emplace(alpha, std::make_shared<const Policy>(std::move(eq.policy))).first;
    }
    s.alpha = alpha;
    s.policy = it->second;
  }
}

// One agent per seat, in population order. Agent randomness is seeded from
// `seed` on streams separate from the game's own.
inline std::vector<std::unique_ptr<Agent>> make_agents(const Population& pop, std::uint64_t seed) {
  std::vector<std::unique_ptr<Agent>> agents;
  for (const auto& s : pop) {
    for (int c = 0; c < s.count; ++c) {
      std::uint64_t agent_seed = derive_seed(seed, 1000 + agents.size());
      switch (s.kind) {
        case AgentKind::Zero: agents.push_back(std::make_unique<ZeroBidder>()); break;
        case AgentKind::UniformRandom:
          agents.push_back(std::make_unique<UniformRandomAgent>(agent_seed));
          break;
        case AgentKind::UrgencyThreshold:
          agents.push_back(std::make_unique<UrgencyThresholdAgent>());
          break;
        case AgentKind::Policy:
          if (!s.policy) throw ConfigError("policy agent without a policy (call attach_policies)");
          agents.push_back(std::make_unique<PolicyAgent>(s.policy, agent_seed));
          break;
        case AgentKind::Scripted: agents.push_back(std::make_unique<ScriptedAgent>(s.script)); break;
      }
    }
  }
  return agents;
}

}  // namespace karma
