#pragma once

// Efficiency-gain analysis: medians, half and decile breakdowns,
// Mann-Whitney-Wilcoxon tests, bootstrap intervals, decile comparison
// against random allocation, and discount-factor fitting.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "karma/equilibrium.hpp"
#include "karma/error.hpp"
#include "karma/rng.hpp"
#include "karma/simulator.hpp"

namespace karma {

// Midpoint convention for even sizes.
inline double median(std::vector<double> v) {
  if (v.empty()) throw StateError("median of empty sample");
  const std::size_t n = v.size();
  auto mid = v.begin() + n / 2;
  std::nth_element(v.begin(), mid, v.end());
  if (n % 2 == 1) return *mid;
  double hi = *mid;
  double lo = *std::max_element(v.begin(), mid);
  return 0.5 * (lo + hi);
}

inline double mean(std::span<const double> v) {
  if (v.empty()) throw StateError("mean of empty sample");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Group sizes for splitting n sorted values into 10 groups. When n is not a
// multiple of 10 the extra values go to the extreme groups first
// (1st, 10th, 2nd, 9th, ...).
inline std::array<std::size_t, 10> decile_sizes(std::size_t n) {
  std::array<std::size_t, 10> sizes;
  sizes.fill(n / 10);
  static constexpr std::array<int, 10> order = {0, 9, 1, 8, 2, 7, 3, 6, 4, 5};
  for (std::size_t r = 0; r < n % 10; ++r) ++sizes[order[r]];
  return sizes;
}

// Mean of each decile of the ascending-sorted sample.
inline std::array<double, 10> decile_means(std::vector<double> v) {
  if (v.size() < 10) throw StateError("decile_means: need at least 10 values");
  std::sort(v.begin(), v.end());
  auto sizes = decile_sizes(v.size());
  std::array<double, 10> out{};
  std::size_t pos = 0;
  for (int d = 0; d < 10; ++d) {
    double s = 0.0;
    for (std::size_t i = 0; i < sizes[d]; ++i) s += v[pos + i];
    out[d] = s / static_cast<double>(sizes[d]);
    pos += sizes[d];
  }
  return out;
}

struct EfficiencyReport {
  std::string treatment;
  std::size_t n = 0;
  std::vector<double> gains;
  double median = 0.0;
  double mean = 0.0;
  double lower_half_median = 0.0;
  double upper_half_median = 0.0;
  std::optional<std::array<double, 10>> deciles;  // absent when n < 10
  int non_adopters = 0;
};

// Halves are the lower and upper floor(n/2) values of the sorted sample;
// with odd n the middle value belongs to neither.
inline EfficiencyReport summarize(std::vector<double> gains, std::string treatment) {
  if (gains.empty()) throw StateError("summarize: empty sample");
  EfficiencyReport r;
  r.treatment = std::move(treatment);
  r.n = gains.size();
  std::sort(gains.begin(), gains.end());
  r.median = karma::median(gains);
  r.mean = karma::mean(gains);
  const std::size_t h = gains.size() / 2;
  if (h > 0) {
    r.lower_half_median = karma::median({gains.begin(), gains.begin() + h});
    r.upper_half_median = karma::median({gains.end() - h, gains.end()});
  } else {
    r.lower_half_median = r.upper_half_median = gains[0];
  }
  if (gains.size() >= 10) r.deciles = decile_means(gains);
  r.gains = std::move(gains);
  return r;
}

// A participant is a non-adopter when at least `threshold` of its scored
// bids were zero.
inline bool is_non_adopter(const DatasetRow& row, double threshold = 0.9) {
  return row.zero_bid_frac >= threshold;
}

inline EfficiencyReport summarize(const Dataset& rows, std::string treatment) {
  EfficiencyReport r = summarize(gains_of(rows), std::move(treatment));
  for (const auto& row : rows)
    if (is_non_adopter(row)) ++r.non_adopters;
  return r;
}

// ---------------------------------------------------------------------------
// Mann-Whitney-Wilcoxon

struct TestResult {
  double U = 0.0;
  double p_value = 1.0;  // two-sided
  std::size_t n_x = 0;
  std::size_t n_y = 0;
  bool exact = false;
};

// U = #{x_i > y_j} + 1/2 #{x_i == y_j}.
inline double mww_u(std::span<const double> x, std::span<const double> y) {
  std::vector<double> ys(y.begin(), y.end());
  std::sort(ys.begin(), ys.end());
  double twice = 0.0;
  for (double xi : x) {
    auto lo = std::lower_bound(ys.begin(), ys.end(), xi);
    auto hi = std::upper_bound(lo, ys.end(), xi);
    twice += 2.0 * static_cast<double>(lo - ys.begin()) + static_cast<double>(hi - lo);
  }
  return 0.5 * twice;
}

namespace detail {

// Null distribution of 2U over all C(nx+ny, nx) equally likely ways of
// labelling the pooled sample, ties kept in place. Entry s holds the number
// of labellings with 2U == s.
//
// Tie groups are taken in ascending order. Choosing c of a group of size t
// at position pos, with j x-labels already placed, adds
// 2c(pos - j) + c(t - c) to 2U.
inline std::vector<double> mww_null_counts(std::span<const double> x, std::span<const double> y) {
  const int nx = static_cast<int>(x.size()), ny = static_cast<int>(y.size());
  std::vector<double> pooled(x.begin(), x.end());
  pooled.insert(pooled.end(), y.begin(), y.end());
  std::sort(pooled.begin(), pooled.end());
  std::vector<int> groups;
  for (std::size_t i = 0; i < pooled.size();) {
    std::size_t j = i;
    while (j < pooled.size() && pooled[j] == pooled[i]) ++j;
    groups.push_back(static_cast<int>(j - i));
    i = j;
  }
  const int width = 2 * nx * ny + 1;
  // dp[j][s]: labellings of the processed prefix with j x-labels and 2U == s.
  std::vector<std::vector<double>> dp(nx + 1, std::vector<double>(width, 0.0));
  dp[0][0] = 1.0;
  int pos = 0;
  for (int t : groups) {
    std::vector<double> binom(t + 1, 1.0);
    for (int c = 1; c <= t; ++c) binom[c] = binom[c - 1] * (t - c + 1) / c;
    std::vector<std::vector<double>> next(nx + 1, std::vector<double>(width, 0.0));
    for (int j = 0; j <= std::min(nx, pos); ++j) {
      const int y_seen = pos - j;
      if (y_seen > ny) continue;
      const int smax = std::min(width - 1, 2 * j * y_seen);
      for (int c = 0; c <= t && j + c <= nx; ++c) {
        if (t - c > ny - y_seen) continue;  // not enough y labels left
        const int add = 2 * c * (pos - j) + c * (t - c);
        const double w = binom[c];
        auto& dst = next[j + c];
        const auto& src = dp[j];
        for (int s = 0; s <= smax && s + add < width; ++s)
          if (src[s] != 0.0) dst[s + add] += w * src[s];
      }
    }
    dp.swap(next);
    pos += t;
  }
  return dp[nx];
}

inline double normal_two_sided(double z) { return std::erfc(z / std::sqrt(2.0)); }

}  // namespace detail

inline constexpr double kExactCutoff = 1e4;

// Two-sided test. Exact null distribution (ties kept) when nx*ny <= 1e4,
// otherwise the normal approximation with tie-corrected variance and
// continuity correction.
inline TestResult mww_test(std::span<const double> x, std::span<const double> y) {
  if (x.empty() || y.empty()) throw StateError("mww_test: empty sample");
  TestResult r;
  r.n_x = x.size();
  r.n_y = y.size();
  r.U = mww_u(x, y);
  const double nx = static_cast<double>(x.size()), ny = static_cast<double>(y.size());
  if (nx * ny <= kExactCutoff) {
    r.exact = true;
    auto counts = detail::mww_null_counts(x, y);
    const long u2 = std::lround(2.0 * r.U);
    double total = 0.0, le = 0.0, ge = 0.0;
    for (long s = 0; s < static_cast<long>(counts.size()); ++s) {
      total += counts[s];
      if (s <= u2) le += counts[s];
      if (s >= u2) ge += counts[s];
    }
    r.p_value = std::min(1.0, 2.0 * std::min(le, ge) / total);
    return r;
  }
  const double n = nx + ny;
  std::vector<double> pooled(x.begin(), x.end());
  pooled.insert(pooled.end(), y.begin(), y.end());
  std::sort(pooled.begin(), pooled.end());
  double tie_term = 0.0;
  for (std::size_t i = 0; i < pooled.size();) {
    std::size_t j = i;
    while (j < pooled.size() && pooled[j] == pooled[i]) ++j;
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }
  const double mu = nx * ny / 2.0;
  const double var = nx * ny / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
  const double dev = std::abs(r.U - mu) - 0.5;
  if (var <= 0.0 || dev <= 0.0) {
    r.p_value = 1.0;
  } else {
    r.p_value = std::min(1.0, detail::normal_two_sided(dev / std::sqrt(var)));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Bootstrap

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double v) const { return lo <= v && v <= hi; }
  double width() const { return hi - lo; }
};

// Percentile interval of `statistic` over n_boot resamples with replacement.
// Endpoints are order statistics of the sorted resampled statistics.
template <typename Statistic>
Interval bootstrap_ci(std::span<const double> values, Statistic statistic, int n_boot, double level,
                      std::uint64_t seed) {
  if (values.empty()) throw StateError("bootstrap_ci: empty sample");
  if (n_boot < 100) throw ConfigError("bootstrap_ci: n_boot must be at least 100");
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("bootstrap_ci: level must lie in (0,1)");
  Rng rng(seed);
  std::vector<double> stats(n_boot), sample(values.size());
  for (int b = 0; b < n_boot; ++b) {
    for (auto& s : sample) s = values[uniform_below(rng, values.size())];
    stats[b] = statistic(sample);
  }
  std::sort(stats.begin(), stats.end());
  const double tail = (1.0 - level) / 2.0;
  auto lo_idx = static_cast<std::size_t>(std::floor(tail * n_boot));
  auto hi_idx = static_cast<std::size_t>(std::ceil((1.0 - tail) * n_boot)) - 1;
  lo_idx = std::min(lo_idx, stats.size() - 1);
  hi_idx = std::min(std::max(hi_idx, lo_idx), stats.size() - 1);
  return {stats[lo_idx], stats[hi_idx]};
}

inline Interval bootstrap_median_ci(std::span<const double> values, int n_boot = 1000, double level = 0.95,
                                    std::uint64_t seed = 0) {
  return bootstrap_ci(values, [](const std::vector<double>& s) { return median(s); }, n_boot, level, seed);
}

// ---------------------------------------------------------------------------
// Decile comparison against random allocation

struct DecileComparison {
  std::array<double, 10> karma{};
  std::array<double, 10> random{};     // ex-post decile means of the random dataset
  std::array<double, 10> random_lo{};  // per-decile interval over experiment-sized resamples
  std::array<double, 10> random_hi{};
  std::array<double, 10> gap{};        // karma - random
  int above_random_mean = 0;   // deciles with karma >= random mean
  int above_random_upper = 0;  // deciles with karma >= random interval upper end
};

// Checks the urgency process and game size agree (the bid scheme does not
// matter to random allocation).
inline void check_comparable(const GameConfig& a, const GameConfig& b) {
  if (a.n_participants != b.n_participants || a.n_rounds != b.n_rounds ||
      a.urgency_low != b.urgency_low || a.urgency_high != b.urgency_high || a.p_high != b.p_high)
    throw ConfigError("decile_comparison: datasets come from different configurations");
}

// The random interval for each decile is the percentile interval of decile
// means over `n_sims` resamples of the random dataset, each the size of the
// karma dataset.
inline DecileComparison decile_comparison(const Dataset& karma_rows, const Dataset& random_rows,
                                          int n_sims = 1000, double level = 0.95, std::uint64_t seed = 0) {
  if (karma_rows.size() < 10 || random_rows.size() < 10)
    throw StateError("decile_comparison: need at least 10 rows per dataset");
  DecileComparison out;
  auto kg = gains_of(karma_rows);
  auto rg = gains_of(random_rows);
  out.karma = decile_means(kg);
  out.random = decile_means(rg);

  Rng rng(seed);
  std::array<std::vector<double>, 10> sims;
  std::vector<double> sample(kg.size());
  for (int s = 0; s < n_sims; ++s) {
    for (auto& v : sample) v = rg[uniform_below(rng, rg.size())];
    auto d = decile_means(sample);
    for (int i = 0; i < 10; ++i) sims[i].push_back(d[i]);
  }
  const double tail = (1.0 - level) / 2.0;
  for (int i = 0; i < 10; ++i) {
    std::sort(sims[i].begin(), sims[i].end());
    auto lo = static_cast<std::size_t>(std::floor(tail * n_sims));
    auto hi = static_cast<std::size_t>(std::ceil((1.0 - tail) * n_sims)) - 1;
    out.random_lo[i] = sims[i][std::min(lo, sims[i].size() - 1)];
    out.random_hi[i] = sims[i][std::min(hi, sims[i].size() - 1)];
    out.gap[i] = out.karma[i] - out.random[i];
    if (out.karma[i] >= out.random[i]) ++out.above_random_mean;
    if (out.karma[i] >= out.random_hi[i]) ++out.above_random_upper;
  }
  return out;
}

inline DecileComparison decile_comparison(const Dataset& karma_rows, const GameConfig& karma_config,
                                          const Dataset& random_rows, const GameConfig& random_config,
                                          int n_sims = 1000, double level = 0.95, std::uint64_t seed = 0) {
  check_comparable(karma_config, random_config);
  return decile_comparison(karma_rows, random_rows, n_sims, level, seed);
}

// First-half versus second-half gains of the same participants.
inline TestResult first_vs_second_half(const Dataset& rows) {
  std::vector<double> a, b;
  for (const auto& r : rows) {
    a.push_back(efficiency_gain(r.S_h1, r.S_rand_h1));
    b.push_back(efficiency_gain(r.S_h2, r.S_rand_h2));
  }
  return mww_test(a, b);
}

// ---------------------------------------------------------------------------
// Discount fitting

struct DiscountFit {
  std::vector<double> alphas;
  std::vector<double> medians;  // simulated pooled median gain per alpha
  std::vector<double> matched;  // alphas within tolerance of the observation
  bool empty() const { return matched.empty(); }
  double lo() const { return matched.empty() ? NAN : matched.front(); }
  double hi() const { return matched.empty() ? NAN : matched.back(); }
};

struct FitOptions {
  int n_games = 500;        // per config and alpha
  std::uint64_t seed = 1;
  double tolerance = 0.02;  // absolute, in gain units
  SolverOptions solver;
};

// Pooled median gain of all-PolicyAgent populations playing the equilibrium
// for discount `alpha`, over every config in `configs`.
inline double simulated_median_gain(std::span<const GameConfig> configs, double alpha,
                                    const FitOptions& options) {
  std::vector<double> pooled;
  for (const auto& c : configs) {
    SolverOptions so = options.solver;
    so.discount = alpha;
    auto eq = solve_equilibrium(c, so);
    BatchSpec spec;
    spec.config = c;
    spec.population = {AgentSpec{AgentKind::Policy, c.n_participants, alpha,
                                 std::make_shared<const Policy>(std::move(eq.policy)), {}}};
    spec.n_games = options.n_games;
    spec.base_seed = options.seed;
    auto g = gains_of(run_batch(spec).rows);
    pooled.insert(pooled.end(), g.begin(), g.end());
  }
  return median(pooled);
}

// Every alpha of the (ascending) grid whose simulated median lies within
// the tolerance of `observed_median`.
inline DiscountFit fit_discount(double observed_median, std::span<const GameConfig> configs,
                                std::span<const double> alpha_grid, const FitOptions& options = {}) {
  if (!std::is_sorted(alpha_grid.begin(), alpha_grid.end()))
    throw ConfigError("fit_discount: alpha grid must be sorted ascending");
  DiscountFit fit;
  for (double a : alpha_grid) {
    double m = simulated_median_gain(configs, a, options);
    fit.alphas.push_back(a);
    fit.medians.push_back(m);
    if (std::abs(m - observed_median) <= options.tolerance) fit.matched.push_back(a);
  }
  return fit;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const EfficiencyReport& r) {
  nlohmann::json j{{"treatment", r.treatment},
                   {"n", r.n},
                   {"median", r.median},
                   {"mean", r.mean},
                   {"lower_half_median", r.lower_half_median},
                   {"upper_half_median", r.upper_half_median},
                   {"non_adopters", r.non_adopters}};
  if (r.deciles)
    j["deciles"] = std::vector<double>(r.deciles->begin(), r.deciles->end());
  else
    j["deciles"] = nullptr;
  return j;
}

inline nlohmann::json to_json(const TestResult& t) {
  return {{"U", t.U}, {"p_value", t.p_value}, {"n_x", t.n_x}, {"n_y", t.n_y}, {"exact", t.exact}};
}

}  // namespace karma
