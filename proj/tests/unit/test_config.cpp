#include <gtest/gtest.h>

#include <fstream>

#include "karma/config.hpp"

using namespace karma;

namespace {

std::string preset_path(const std::string& name) {
  return std::string(KARMA_SOURCE_DIR) + "/presets/" + name + ".json";
}

}  // namespace

TEST(Config, PresetTable) {
  for (const auto& name : preset_names()) {
    auto c = preset(name);
    EXPECT_EQ(c.n_participants, 20);
    EXPECT_EQ(c.n_rounds, 50);
    EXPECT_EQ(c.n_test_rounds, 5);
    EXPECT_EQ(c.karma_init, 9);
    EXPECT_EQ(c.karma_max, 18);
    EXPECT_EQ(c.urgency_low, 1);
    EXPECT_DOUBLE_EQ(c.fee.s_rand, 37.5);
    EXPECT_DOUBLE_EQ(c.fee.phi_targ, 10.0);
    EXPECT_DOUBLE_EQ(c.fee.phi_rand, 1.0);
    EXPECT_DOUBLE_EQ(c.fee.phi_fix, 1.5);
    EXPECT_EQ(c.fee.t_inactive, 6);
    EXPECT_DOUBLE_EQ(c.fee.t_dec, 10.0);
    EXPECT_DOUBLE_EQ(c.mean_urgency(), 3.0);
  }
  EXPECT_EQ(preset("low-full").urgency_high, 5);
  EXPECT_DOUBLE_EQ(preset("low-full").p_high, 0.5);
  EXPECT_DOUBLE_EQ(preset("low-full").fee.s_targ, 90.0);
  EXPECT_EQ(preset("high-binary").urgency_high, 9);
  EXPECT_DOUBLE_EQ(preset("high-binary").p_high, 0.25);
  EXPECT_DOUBLE_EQ(preset("high-binary").fee.s_targ, 101.25);
  EXPECT_EQ(preset("low-binary").scheme, Scheme::Binary);
  EXPECT_EQ(preset("high-full").scheme, Scheme::FullRange);
  EXPECT_THROW(preset("medium-binary"), ConfigError);
}

TEST(Config, ShippedPresetFilesMatchBuiltIns) {
  for (const auto& name : preset_names()) {
    std::ifstream in(preset_path(name));
    ASSERT_TRUE(in) << preset_path(name);
    auto j = nlohmann::json::parse(in);
    EXPECT_EQ(j.get<GameConfig>(), preset(name)) << name;
    EXPECT_EQ(nlohmann::json(preset(name)), j) << name;
    EXPECT_EQ(load_config(preset_path(name)), preset(name)) << name;
  }
}

TEST(Config, JsonOverridesOnTopOfPreset) {
  auto c = nlohmann::json::parse(R"({"preset":"high-full","n_rounds":10,"fee":{"t_dec":2.5}})")
               .get<GameConfig>();
  EXPECT_EQ(c.urgency_high, 9);
  EXPECT_EQ(c.n_rounds, 10);
  EXPECT_DOUBLE_EQ(c.fee.t_dec, 2.5);
  EXPECT_DOUBLE_EQ(c.fee.s_targ, 101.25);
}

TEST(Config, Validation) {
  GameConfig c;
  EXPECT_NO_THROW(validate(c));
  c.n_participants = 7;
  EXPECT_THROW(validate(c), ConfigError);
  c = GameConfig{};
  c.karma_init = 19;
  EXPECT_THROW(validate(c), ConfigError);
  c = GameConfig{};
  c.urgency_high = 1;
  EXPECT_THROW(validate(c), ConfigError);
  c = GameConfig{};
  c.fee.s_targ = 30;
  EXPECT_THROW(validate(c), ConfigError);
  c = GameConfig{};
  c.p_high = 1.5;
  EXPECT_THROW(validate(c), ConfigError);
}

TEST(Config, LoadErrors) {
  EXPECT_THROW(load_config("no-such-preset"), ConfigError);
  auto path = std::string(::testing::TempDir()) + "/bad_config.json";
  {
    std::ofstream out(path);
    out << "{ not json";
  }
  EXPECT_THROW(load_config(path), ConfigError);
  {
    std::ofstream out(path);
    out << R"({"n_participants": 3})";
  }
  EXPECT_THROW(load_config(path), ConfigError);
  {
    std::ofstream out(path);
    out << R"({"scheme": "sealed"})";
  }
  EXPECT_THROW(load_config(path), ConfigError);
}
