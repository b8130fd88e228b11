#pragma once

#include <algorithm>
#include <cmath>

#include "karma/config.hpp"
#include "karma/error.hpp"

namespace karma {

struct Payoff {
  double bonus = 0.0;
  double fixed = 0.0;
  double total() const { return bonus + fixed; }
};

inline double round_to_cents(double amount) { return std::round(amount * 100.0) / 100.0; }

// Affine in the final score through (s_rand, phi_rand) and (s_targ, phi_targ),
// clamped at zero. A dropped participant gets nothing at all.
inline Payoff compute_bonus(double final_score, const FeeParams& fee, bool dropped) {
  if (!(fee.s_targ > fee.s_rand)) throw ConfigError("compute_bonus: s_targ must exceed s_rand");
  if (dropped) return {};
  const double raw = (fee.phi_targ - fee.phi_rand) * (final_score - fee.s_rand) / (fee.s_targ - fee.s_rand) +
                     fee.phi_rand;
  return {round_to_cents(std::max(raw, 0.0)), round_to_cents(fee.phi_fix)};
}

}  // namespace karma
