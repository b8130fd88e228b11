#include <gtest/gtest.h>

#include "karma/config.hpp"
#include "karma/fees.hpp"

using namespace karma;

TEST(Fees, LowStakeAnchors) {
  auto f = preset("low-binary").fee;
  EXPECT_DOUBLE_EQ(compute_bonus(90, f, false).bonus, 10.0);
  EXPECT_DOUBLE_EQ(compute_bonus(37.5, f, false).bonus, 1.0);
  EXPECT_DOUBLE_EQ(compute_bonus(0, f, false).bonus, 0.0);
  // 9 * 22.5 / 52.5 + 1 = 4.857...
  EXPECT_DOUBLE_EQ(compute_bonus(60, f, false).bonus, 4.86);
  EXPECT_DOUBLE_EQ(compute_bonus(90, f, false).fixed, 1.5);
}

TEST(Fees, HighStakeAnchors) {
  auto f = preset("high-full").fee;
  EXPECT_DOUBLE_EQ(compute_bonus(101.25, f, false).bonus, 10.0);
  EXPECT_DOUBLE_EQ(compute_bonus(37.5, f, false).bonus, 1.0);
  EXPECT_DOUBLE_EQ(compute_bonus(5, f, false).bonus, 0.0);
  // 9 * 22.5 / 63.75 + 1 = 4.176...
  EXPECT_DOUBLE_EQ(compute_bonus(60, f, false).bonus, 4.18);
}

TEST(Fees, AboveTargetKeepsRising) {
  auto f = preset("low-full").fee;
  EXPECT_GT(compute_bonus(120, f, false).bonus, 10.0);
  EXPECT_DOUBLE_EQ(compute_bonus(120, f, false).total(), compute_bonus(120, f, false).bonus + 1.5);
}

TEST(Fees, DroppedParticipantsGetNothing) {
  auto f = preset("low-binary").fee;
  auto p = compute_bonus(150, f, true);
  EXPECT_DOUBLE_EQ(p.bonus, 0.0);
  EXPECT_DOUBLE_EQ(p.fixed, 0.0);
}

TEST(Fees, RoundToCents) {
  EXPECT_DOUBLE_EQ(round_to_cents(1.005 + 1e-9), 1.01);
  EXPECT_DOUBLE_EQ(round_to_cents(2.344), 2.34);
}

TEST(Fees, InvalidFeeParams) {
  FeeParams f;
  f.s_targ = 10;
  f.s_rand = 20;
  EXPECT_THROW(compute_bonus(5, f, false), ConfigError);
}
