#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "safelabel/config.hpp"

using namespace safelabel;
using namespace safelabel::config;

TEST(Config, DefaultsValidate) { EXPECT_NO_THROW(Settings{}.validate()); }

TEST(Config, DefaultSnapshotCarriesReferenceConstants) {
  const auto j = to_json(Settings{});
  EXPECT_EQ(j.at("risk.threshold"), 0.75);
  EXPECT_EQ(j.at("risk.sigmoid_gain"), 5.0);
  EXPECT_EQ(j.at("risk.sigmoid_center"), 0.6);
  EXPECT_EQ(j.at("risk.memory_length"), 10);
  EXPECT_EQ(j.at("reward.zeta"), 0.02);
  EXPECT_EQ(j.at("reward.epsilon"), 0.5);
  EXPECT_EQ(j.at("reward.eta"), 1.0);
  EXPECT_EQ(j.at("reward.mu"), 0.1);
  EXPECT_EQ(j.at("reward.xi"), 0.5);
  EXPECT_EQ(j.at("attention.pedestrian"), 1.0);
  EXPECT_EQ(j.at("attention.crossing"), 0.75);
  EXPECT_EQ(j.at("attention.vehicle"), 0.5);
  EXPECT_EQ(j.at("pipeline.labeler"), "gen");
}

TEST(Config, OverrideSetsValue) {
  Settings s;
  apply_override(s, "reward.mu = 0.3");
  apply_override(s, "scenario.density=high");
  apply_override(s, "risk.strict_history=true");
  EXPECT_EQ(s.reward.mu, 0.3);
  EXPECT_EQ(s.scenario.density, sim::Density::High);
  EXPECT_TRUE(s.risk.strict_history);
}

TEST(Config, UnknownKeyRejected) {
  Settings s;
  EXPECT_THROW(apply_override(s, "reward.nope=1"), ConfigError);
  EXPECT_THROW(apply_override(s, "reward.mu"), ConfigError);
  EXPECT_THROW(apply_override(s, "reward.mu=abc"), ConfigError);
  EXPECT_THROW(apply_override(s, "scenario.density=extreme"), ConfigError);
}

TEST(Config, TextFormatWithComments) {
  Settings s;
  apply_text(s, "# header\nreward.xi = 0.25  # trailing\n\n  seed = 42\n");
  EXPECT_EQ(s.reward.xi, 0.25);
  EXPECT_EQ(s.scenario.seed, 42u);
}

TEST(Config, ErrorNamesLine) {
  Settings s;
  try {
    apply_text(s, "seed = 1\nbogus = 2\n", "cfg.txt");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("cfg.txt:2"), std::string::npos);
  }
}

TEST(Config, TextRoundTrip) {
  Settings s;
  apply_override(s, "train.gamma=0.99");
  apply_override(s, "scenario.occluder=partial");
  apply_override(s, "pipeline.distance_source=ground_truth");
  Settings back;
  apply_text(back, to_text(s));
  EXPECT_EQ(to_json(back), to_json(s));
}

TEST(Config, FileLoading) {
  const auto path = std::filesystem::temp_directory_path() / "safelabel_cfg.txt";
  std::ofstream(path) << "train.sweeps = 17\n";
  Settings s;
  apply_file(s, path.string());
  EXPECT_EQ(s.train.sweeps, 17u);
  std::filesystem::remove(path);
  EXPECT_THROW(apply_file(s, path.string()), ConfigError);
}

TEST(Config, KeyNamesUnique) {
  auto names = key_names();
  std::sort(names.begin(), names.end());
  EXPECT_EQ(std::adjacent_find(names.begin(), names.end()), names.end());
  EXPECT_EQ(names.size(), to_json(Settings{}).size());
}

TEST(Config, ValidationCatchesBadValues) {
  Settings s;
  apply_override(s, "train.gamma=1");
  EXPECT_THROW(s.validate(), ConfigError);
}
