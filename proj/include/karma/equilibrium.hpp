#pragma once

// Stationary mean-field bidding policies for the karma game.
//
// A participant's state is (urgency, karma). It meets a random opponent drawn
// from the stationary population, so all it needs to know about the others
// is the population bid distribution. Redistribution is modelled as an
// integer lottery R in {floor(r), floor(r)+1} with mean r, where r is the
// per-capita payment plus whatever the karma cap pushes back into the pool.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "karma/config.hpp"
#include "karma/engine.hpp"
#include "karma/error.hpp"

namespace karma {

// Urgency index: 0 = low, 1 = high.
inline constexpr int kUrgencyLevels = 2;

class Policy {
 public:
  Policy() = default;
  Policy(Scheme scheme, int karma_max) : scheme_(scheme), karma_max_(karma_max) {
    table_.resize(kUrgencyLevels * (karma_max + 1));
    for (int u = 0; u < kUrgencyLevels; ++u)
      for (int k = 0; k <= karma_max; ++k) {
        auto& row = table_[index(u, k)];
        row.assign(k + 1, 0.0);
        row[0] = 1.0;
      }
  }

  // Deterministic policy from a bid rule (urgency index, karma) -> bid.
  template <typename Rule>
  static Policy pure(Scheme scheme, int karma_max, Rule rule) {
    Policy p(scheme, karma_max);
    for (int u = 0; u < kUrgencyLevels; ++u)
      for (int k = 0; k <= karma_max; ++k) p.set_pure(u, k, rule(u, k));
    return p;
  }

  Scheme scheme() const { return scheme_; }
  int karma_max() const { return karma_max_; }

  // Distribution over bids 0..k (index = bid).
  std::span<const double> probs(int urgency_index, int karma) const {
    return table_.at(index(urgency_index, karma));
  }
  std::span<double> probs(int urgency_index, int karma) { return table_.at(index(urgency_index, karma)); }

  void set_pure(int urgency_index, int karma, int bid) {
    auto& row = table_.at(index(urgency_index, karma));
    std::fill(row.begin(), row.end(), 0.0);
    row.at(bid) = 1.0;
  }

  // Most likely bid; lowest on ties.
  int mode(int urgency_index, int karma) const {
    auto row = probs(urgency_index, karma);
    return static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }

  // (1 - weight) * this + weight * other
  void mix(const Policy& other, double weight) {
    for (std::size_t i = 0; i < table_.size(); ++i)
      for (std::size_t b = 0; b < table_[i].size(); ++b)
        table_[i][b] = (1.0 - weight) * table_[i][b] + weight * other.table_[i][b];
  }

  double max_abs_diff(const Policy& other) const {
    double d = 0.0;
    for (std::size_t i = 0; i < table_.size(); ++i)
      for (std::size_t b = 0; b < table_[i].size(); ++b)
        d = std::max(d, std::abs(table_[i][b] - other.table_[i][b]));
    return d;
  }

  // Rows sum to one and put no mass outside allowed_bids.
  bool valid(double tol = 1e-9) const {
    for (int u = 0; u < kUrgencyLevels; ++u)
      for (int k = 0; k <= karma_max_; ++k) {
        auto row = probs(u, k);
        double sum = 0.0;
        for (int b = 0; b <= k; ++b) {
          if (row[b] < -tol) return false;
          if (row[b] > tol && !is_allowed(scheme_, k, b)) return false;
          sum += row[b];
        }
        if (std::abs(sum - 1.0) > tol) return false;
      }
    return true;
  }

  bool operator==(const Policy&) const = default;

 private:
  int index(int u, int k) const { return u * (karma_max_ + 1) + k; }

  Scheme scheme_ = Scheme::Binary;
  int karma_max_ = 0;
  std::vector<std::vector<double>> table_;
};

struct MeanField {
  std::vector<double> karma_dist;  // over 0..karma_max
  std::vector<double> state_dist;  // [urgency_index * (karma_max+1) + k]
  std::vector<double> bid_dist;    // over 0..karma_max
  double mean_payment = 0.0;       // expected winning payment per capita
  double mean_redistribution = 0.0;  // r: mean grant including cap reissue

  double mean_karma() const {
    double m = 0.0;
    for (std::size_t k = 0; k < karma_dist.size(); ++k) m += k * karma_dist[k];
    return m;
  }
};

struct SolverOptions {
  double discount = 0.98;  // alpha in [0, 1)
  double damping = 0.5;    // eta in (0, 1]
  double tol = 1e-6;
  int max_iters = 1000;             // outer best-response / population iterations
  int max_inner_iters = 1'000'000;  // value iteration and forward iteration caps
};

inline void validate(const SolverOptions& o) {
  if (!(o.discount >= 0.0 && o.discount < 1.0))
    throw ConfigError("discount must lie in [0, 1), got " + std::to_string(o.discount));
  if (!(o.damping > 0.0 && o.damping <= 1.0)) throw ConfigError("damping must lie in (0, 1]");
  if (!(o.tol > 0.0)) throw ConfigError("tol must be positive");
  if (o.max_iters <= 0 || o.max_inner_iters <= 0) throw ConfigError("iteration caps must be positive");
}

inline double urgency_prob(const GameConfig& c, int urgency_index) {
  return urgency_index == 1 ? c.p_high : 1.0 - c.p_high;
}

inline int urgency_value(const GameConfig& c, int urgency_index) {
  return urgency_index == 1 ? c.urgency_high : c.urgency_low;
}

// P(opponent bid < bid) + 1/2 P(opponent bid == bid).
inline double win_probability(int bid, std::span<const double> bid_dist) {
  if (bid < 0) throw BidError("win_probability: negative bid");
  double below = 0.0;
  const int top = std::min<int>(bid, static_cast<int>(bid_dist.size()));
  for (int b = 0; b < top; ++b) below += bid_dist[b];
  double tie = bid < static_cast<int>(bid_dist.size()) ? bid_dist[bid] : 0.0;
  return below + 0.5 * tie;
}

inline double win_probability(int bid, const MeanField& mf) {
  return win_probability(bid, mf.bid_dist);
}

namespace detail {

// Integer lottery with mean r: floor(r) w.p. 1-frac, floor(r)+1 w.p. frac.
struct GrantLottery {
  int low = 0;
  double p_up = 0.0;
  explicit GrantLottery(double r) : low(static_cast<int>(std::floor(r))), p_up(r - std::floor(r)) {}
};

inline int clip(int k, int kmax) { return std::min(k, kmax); }

// Mean of min(kmax, j + R) under a post-payment karma distribution.
inline double mean_after_grant(std::span<const double> post_payment, int kmax, double r) {
  GrantLottery g(r);
  double m = 0.0;
  for (int j = 0; j <= kmax; ++j) {
    if (post_payment[j] == 0.0) continue;
    m += post_payment[j] * ((1.0 - g.p_up) * clip(j + g.low, kmax) + g.p_up * clip(j + g.low + 1, kmax));
  }
  return m;
}

// Smallest r >= mean_payment that puts the clipped karma back into
// circulation, so the population mean is conserved.
inline double conserving_redistribution(std::span<const double> post_payment, int kmax,
                                        double mean_payment, double target_mean) {
  double lo = mean_payment, hi = static_cast<double>(kmax);
  if (mean_after_grant(post_payment, kmax, lo) >= target_mean - 1e-15) return lo;
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    double mid = 0.5 * (lo + hi);
    if (mean_after_grant(post_payment, kmax, mid) < target_mean)
      lo = mid;
    else
      hi = mid;
  }
  return hi;
}

}  // namespace detail

// Population quantities induced by a karma distribution and a policy.
// `post_payment`, when given, receives the karma distribution after
// payments and before the grant.
inline MeanField close_mean_field(std::span<const double> karma_dist, const Policy& policy,
                                  const GameConfig& c, double target_mean,
                                  std::vector<double>* post_payment = nullptr) {
  const int kmax = c.karma_max;
  MeanField mf;
  mf.karma_dist.assign(karma_dist.begin(), karma_dist.end());
  mf.state_dist.assign(kUrgencyLevels * (kmax + 1), 0.0);
  mf.bid_dist.assign(kmax + 1, 0.0);
  for (int u = 0; u < kUrgencyLevels; ++u)
    for (int k = 0; k <= kmax; ++k) {
      double mass = urgency_prob(c, u) * karma_dist[k];
      mf.state_dist[u * (kmax + 1) + k] = mass;
      if (mass == 0.0) continue;
      auto row = policy.probs(u, k);
      for (int b = 0; b <= k; ++b) mf.bid_dist[b] += mass * row[b];
    }

  std::vector<double> win(kmax + 1);
  for (int b = 0; b <= kmax; ++b) win[b] = win_probability(b, mf.bid_dist);

  std::vector<double> post(kmax + 1, 0.0);
  for (int u = 0; u < kUrgencyLevels; ++u)
    for (int k = 0; k <= kmax; ++k) {
      double mass = mf.state_dist[u * (kmax + 1) + k];
      if (mass == 0.0) continue;
      auto row = policy.probs(u, k);
      for (int b = 0; b <= k; ++b) {
        double m = mass * row[b];
        if (m == 0.0) continue;
        mf.mean_payment += m * win[b] * b;
        post[k - b] += m * win[b];
        post[k] += m * (1.0 - win[b]);
      }
    }
  mf.mean_redistribution =
      detail::conserving_redistribution(post, kmax, mf.mean_payment, target_mean);
  if (post_payment) *post_payment = std::move(post);
  return mf;
}

struct StationaryResult {
  MeanField mean_field;
  int iterations = 0;
  double l1_change = 0.0;
};

// Forward iteration of the population karma chain under `policy`, starting
// from `initial` (default: everybody at karma_init), until the L1 change
// drops below options.tol.
inline StationaryResult stationary_distribution(const Policy& policy, const GameConfig& c,
                                                const SolverOptions& options,
                                                std::span<const double> initial = {}) {
  validate(c);
  const int kmax = c.karma_max;
  std::vector<double> d(kmax + 1, 0.0);
  if (initial.empty())
    d[c.karma_init] = 1.0;
  else
    d.assign(initial.begin(), initial.end());
  const double target = c.karma_init;

  StationaryResult res;
  std::vector<double> post, next(kmax + 1);
  for (int it = 1; it <= options.max_inner_iters; ++it) {
    MeanField mf = close_mean_field(d, policy, c, target, &post);
    detail::GrantLottery g(mf.mean_redistribution);
    std::fill(next.begin(), next.end(), 0.0);
    for (int j = 0; j <= kmax; ++j) {
      if (post[j] == 0.0) continue;
      next[detail::clip(j + g.low, kmax)] += post[j] * (1.0 - g.p_up);
      next[detail::clip(j + g.low + 1, kmax)] += post[j] * g.p_up;
    }
    double change = 0.0;
    for (int k = 0; k <= kmax; ++k) change += std::abs(next[k] - d[k]);
    d.swap(next);
    res.iterations = it;
    res.l1_change = change;
    if (change < options.tol) {
      res.mean_field = close_mean_field(d, policy, c, target);
      return res;
    }
  }
  throw ConvergenceError("stationary_distribution: no convergence after " +
                             std::to_string(options.max_inner_iters) + " iterations",
                         res.l1_change);
}

struct BestResponse {
  Policy policy;
  std::vector<double> value;  // [urgency_index * (karma_max+1) + k]
  int iterations = 0;
  std::vector<double> residuals;  // sup-norm change per value iteration
};

// Discounted dynamic-programming response to a fixed mean field:
//   V(u,k) = max_b  u w(b) + alpha E[ V(u', min(kmax, k - b 1[win] + R)) ]
// Ties in the argmax go to the lowest bid. `warm_start` seeds V.
inline BestResponse best_response(const MeanField& mf, const GameConfig& c,
                                  const SolverOptions& options,
                                  std::span<const double> warm_start = {}) {
  validate(options);
  const int kmax = c.karma_max;
  const int levels = kmax + 1;
  const double alpha = options.discount;

  std::vector<double> win(levels);
  for (int b = 0; b < levels; ++b) win[b] = win_probability(b, mf);
  detail::GrantLottery g(mf.mean_redistribution);

  BestResponse br;
  br.value.assign(kUrgencyLevels * levels, 0.0);
  if (!warm_start.empty()) br.value.assign(warm_start.begin(), warm_start.end());

  std::vector<double> expected(levels), after_grant(levels), next(br.value.size());
  auto continuation = [&](const std::vector<double>& v) {
    for (int k = 0; k < levels; ++k)
      expected[k] = urgency_prob(c, 0) * v[k] + urgency_prob(c, 1) * v[levels + k];
    for (int j = 0; j < levels; ++j)
      after_grant[j] = (1.0 - g.p_up) * expected[detail::clip(j + g.low, kmax)] +
                       g.p_up * expected[detail::clip(j + g.low + 1, kmax)];
  };
  auto q_value = [&](int u, int k, int b) {
    return urgency_value(c, u) * win[b] +
           alpha * (win[b] * after_grant[k - b] + (1.0 - win[b]) * after_grant[k]);
  };

  bool converged = false;
  double residual = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= options.max_inner_iters; ++it) {
    continuation(br.value);
    residual = 0.0;
    for (int u = 0; u < kUrgencyLevels; ++u)
      for (int k = 0; k < levels; ++k) {
        double best = -std::numeric_limits<double>::infinity();
        for (int b : allowed_bids(c.scheme, k)) best = std::max(best, q_value(u, k, b));
        next[u * levels + k] = best;
        residual = std::max(residual, std::abs(best - br.value[u * levels + k]));
      }
    br.value.swap(next);
    br.iterations = it;
    br.residuals.push_back(residual);
    if (residual < options.tol) {
      converged = true;
      break;
    }
  }
  if (!converged)
    throw ConvergenceError("best_response: value iteration did not converge", residual);

  continuation(br.value);
  br.policy = Policy(c.scheme, kmax);
  for (int u = 0; u < kUrgencyLevels; ++u)
    for (int k = 0; k < levels; ++k) {
      int best_bid = 0;
      double best = q_value(u, k, 0);
      for (int b : allowed_bids(c.scheme, k)) {
        double q = q_value(u, k, b);
        if (q > best + 1e-9 * std::max(1.0, std::abs(best))) {
          best = q;
          best_bid = b;
        }
      }
      br.policy.set_pure(u, k, best_bid);
    }
  return br;
}

// Expected discounted payoff of following `policy` against `mf`, per state.
inline std::vector<double> policy_value(const Policy& policy, const MeanField& mf, const GameConfig& c,
                                        const SolverOptions& options) {
  const int kmax = c.karma_max;
  const int levels = kmax + 1;
  const double alpha = options.discount;
  std::vector<double> win(levels);
  for (int b = 0; b < levels; ++b) win[b] = win_probability(b, mf);
  detail::GrantLottery g(mf.mean_redistribution);
  std::vector<double> v(kUrgencyLevels * levels, 0.0), next(v.size()), expected(levels), after(levels);
  for (int it = 1; it <= options.max_inner_iters; ++it) {
    for (int k = 0; k < levels; ++k)
      expected[k] = urgency_prob(c, 0) * v[k] + urgency_prob(c, 1) * v[levels + k];
    for (int j = 0; j < levels; ++j)
      after[j] = (1.0 - g.p_up) * expected[detail::clip(j + g.low, kmax)] +
                 g.p_up * expected[detail::clip(j + g.low + 1, kmax)];
    double residual = 0.0;
    for (int u = 0; u < kUrgencyLevels; ++u)
      for (int k = 0; k < levels; ++k) {
        auto row = policy.probs(u, k);
        double q = 0.0;
        for (int b = 0; b <= k; ++b)
          if (row[b] > 0.0)
            q += row[b] * (urgency_value(c, u) * win[b] +
                           alpha * (win[b] * after[k - b] + (1.0 - win[b]) * after[k]));
        next[u * levels + k] = q;
        residual = std::max(residual, std::abs(q - v[u * levels + k]));
      }
    v.swap(next);
    if (residual < options.tol) return v;
  }
  throw ConvergenceError("policy_value: evaluation did not converge", options.tol);
}

// Population-average payoff a unilateral best response would add, in
// per-round units: (1 - alpha) * E_d[V*(u,k) - V_policy(u,k)].
inline double exploitability(const Policy& policy, const MeanField& mf, const GameConfig& c,
                             const SolverOptions& options) {
  BestResponse br = best_response(mf, c, options);
  std::vector<double> vp = policy_value(policy, mf, c, options);
  double gap = 0.0;
  for (std::size_t i = 0; i < vp.size(); ++i) gap += mf.state_dist[i] * (br.value[i] - vp[i]);
  return (1.0 - options.discount) * gap;
}

struct Equilibrium {
  Policy policy;
  MeanField mean_field;
  std::vector<double> value;  // optimal values against mean_field
  bool converged = false;
  int iterations = 0;
  double policy_change = 0.0;  // sup-norm, last accepted iteration
  double bid_change = 0.0;     // L1, last accepted iteration
  double exploitability = 0.0;
  std::vector<double> residual_history;  // max(policy_change, bid_change) per iteration
};

// Damped fixed-point iteration: pi <- (1-eta) pi + eta BR(mf(pi)), followed
// by the stationary population of the mixed policy. Starts from the urgency
// threshold rule (bid the most allowed when urgent, else 0).
//
// Pure best responses chatter around mixed equilibria, so after kWarmup
// iterations eta is halved every kHalveEvery iterations; the iterate then
// averages over the chattering responses. If the change never
// drops below tol the iterate with the smallest change is returned with
// converged = false.
inline Equilibrium solve_equilibrium(const GameConfig& c, const SolverOptions& options) {
  constexpr int kWarmup = 50;
  constexpr int kHalveEvery = 25;
  validate(c);
  validate(options);
  Policy policy = Policy::pure(c.scheme, c.karma_max, [&](int u, int k) {
    return u == 1 ? max_allowed_bid(c.scheme, k) : 0;
  });
  MeanField mf = stationary_distribution(policy, c, options).mean_field;
  std::vector<double> value;

  Equilibrium best;
  std::vector<double> history;
  double best_change = std::numeric_limits<double>::infinity();
  double eta = options.damping;
  bool converged = false;
  for (int it = 1; it <= options.max_iters; ++it) {
    BestResponse br = best_response(mf, c, options, value);
    value = br.value;
    Policy next = policy;
    next.mix(br.policy, eta);
    MeanField next_mf = stationary_distribution(next, c, options, mf.karma_dist).mean_field;

    double dpol = next.max_abs_diff(policy);
    double dbid = 0.0;
    for (std::size_t b = 0; b < mf.bid_dist.size(); ++b) dbid += std::abs(next_mf.bid_dist[b] - mf.bid_dist[b]);
    policy = std::move(next);
    mf = std::move(next_mf);

    const double change = std::max(dpol, dbid);
    history.push_back(change);
    if (change < best_change) {
      best_change = change;
      best.policy = policy;
      best.mean_field = mf;
      best.value = value;
      best.iterations = it;
      best.policy_change = dpol;
      best.bid_change = dbid;
    }
    if (it > kWarmup && (it - kWarmup) % kHalveEvery == 0) eta *= 0.5;
    if (dpol < options.tol && dbid < options.tol) {
      converged = true;
      break;
    }
  }
  best.converged = converged;
  best.residual_history = std::move(history);
  best.value = best_response(best.mean_field, c, options, best.value).value;
  best.exploitability = exploitability(best.policy, best.mean_field, c, options);
  return best;
}

// Gain of the urgency-efficient allocation (the more urgent of each pair
// wins) over the ex-ante random benchmark E(u)/2 per capita, enumerating the
// four urgency-pair outcomes.
inline double exante_efficient_gain(int urgency_low, int urgency_high, double p_high) {
  const double p[2] = {1.0 - p_high, p_high};
  const double u[2] = {static_cast<double>(urgency_low), static_cast<double>(urgency_high)};
  double efficient = 0.0;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) efficient += p[a] * p[b] * std::max(u[a], u[b]) / 2.0;
  const double random = (p[0] * u[0] + p[1] * u[1]) / 2.0;
  return (efficient - random) / random;
}

inline double exante_efficient_gain(const GameConfig& c) {
  return exante_efficient_gain(c.urgency_low, c.urgency_high, c.p_high);
}

// ---------------------------------------------------------------------------
// JSON: the policy is a table keyed by (urgency, karma).

inline nlohmann::json policy_to_json(const Policy& p, const GameConfig& c) {
  nlohmann::json rows = nlohmann::json::array();
  for (int u = 0; u < kUrgencyLevels; ++u)
    for (int k = 0; k <= p.karma_max(); ++k) {
      nlohmann::json bids = nlohmann::json::array(), probs = nlohmann::json::array();
      auto row = p.probs(u, k);
      for (int b = 0; b <= k; ++b)
        if (row[b] > 0.0) {
          bids.push_back(b);
          probs.push_back(row[b]);
        }
      rows.push_back({{"urgency", urgency_value(c, u)}, {"karma", k}, {"bids", bids}, {"probs", probs}});
    }
  return {{"scheme", to_string(p.scheme())}, {"karma_max", p.karma_max()}, {"table", rows}};
}

inline Policy policy_from_json(const nlohmann::json& j, const GameConfig& c) {
  Policy p(scheme_from_string(j.at("scheme").get<std::string>()), j.at("karma_max").get<int>());
  if (p.karma_max() != c.karma_max || p.scheme() != c.scheme)
    throw ConfigError("policy does not match config (scheme or karma_max differ)");
  for (const auto& row : j.at("table")) {
    int urgency = row.at("urgency").get<int>();
    int u = urgency == c.urgency_high ? 1 : urgency == c.urgency_low ? 0 : -1;
    if (u < 0) throw ConfigError("policy row with unknown urgency " + std::to_string(urgency));
    int k = row.at("karma").get<int>();
    auto probs = p.probs(u, k);
    std::fill(probs.begin(), probs.end(), 0.0);
    auto bids = row.at("bids").get<std::vector<int>>();
    auto ps = row.at("probs").get<std::vector<double>>();
    if (bids.size() != ps.size()) throw ConfigError("policy row: bids/probs length mismatch");
    for (std::size_t i = 0; i < bids.size(); ++i) probs[bids[i]] = ps[i];
  }
  if (!p.valid(1e-6)) throw ConfigError("policy table is not a valid distribution over allowed bids");
  return p;
}

inline nlohmann::json mean_field_to_json(const MeanField& mf) {
  return {{"karma_dist", mf.karma_dist},
          {"state_dist", mf.state_dist},
          {"bid_dist", mf.bid_dist},
          {"mean_payment", mf.mean_payment},
          {"mean_redistribution", mf.mean_redistribution}};
}

}  // namespace karma
