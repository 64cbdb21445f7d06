#include <gtest/gtest.h>

#include "misinfo/config.hpp"

using namespace misinfo;

TEST(Config, DefaultsAreFivePhaseOneArms) {
  ExperimentConfig c;
  EXPECT_EQ(c.arms.size(), 5u);
  EXPECT_FALSE(c.has_arm(InterventionArm::LLMPersonalized));
  EXPECT_FALSE(c.has_arm(InterventionArm::Control));
  EXPECT_EQ(c.feed_size, 5);
  EXPECT_EQ(c.min_interactions, 3);
  EXPECT_EQ(c.attention_answers(), std::make_pair(3, 5));
}

TEST(Config, ParseSections) {
  const auto c = parse_config(R"(
# comment
[experiment]
feed_size = 8
min_interactions = 2
seed = 99
clock = logical
age_brackets = under 30, 30+

[arms]
Control = 1
LLMPersonalized = 2.5

[personalization]
reference_table = "table.json"
prior = table

[llm]
provider = mock
)");
  EXPECT_EQ(c.feed_size, 8);
  EXPECT_EQ(c.seed, 99u);
  EXPECT_TRUE(c.logical_clock);
  EXPECT_EQ(c.age_brackets, (std::vector<std::string>{"under 30", "30+"}));
  ASSERT_EQ(c.arms.size(), 2u);
  EXPECT_EQ(c.arms[1].first, InterventionArm::LLMPersonalized);
  EXPECT_DOUBLE_EQ(c.arms[1].second, 2.5);
  EXPECT_EQ(c.reference_table, "table.json");
  EXPECT_FALSE(c.uniform_prior);
}

TEST(Config, FormatParsesBack) {
  ExperimentConfig c;
  c.seed = 12345;
  c.feed_size = 7;
  c.arms = {{InterventionArm::Control, 1}, {InterventionArm::LabelOnly, 3}};
  c.slots_file = "slots.json";
  c.reference_table = "ref.json";
  const auto again = parse_config(format_config(c));
  EXPECT_EQ(format_config(again), format_config(c));
  EXPECT_EQ(again.arms, c.arms);
}

TEST(Config, Errors) {
  auto code_of = [](const std::string& text) {
    try {
      parse_config(text);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::AlreadyExists;  // sentinel: no error
  };
  EXPECT_EQ(code_of("[experiment]\nfeed_size = many\n"), ErrorCode::ConfigError);
  EXPECT_EQ(code_of("[experiment]\ncolour = red\n"), ErrorCode::ConfigError);
  EXPECT_EQ(code_of("[nonsense]\n"), ErrorCode::ConfigError);
  EXPECT_EQ(code_of("[arms]\nPlacebo = 1\n"), ErrorCode::ConfigError);
  EXPECT_EQ(code_of("[arms]\nControl = 0\n"), ErrorCode::ConfigError);
  EXPECT_EQ(code_of("[experiment]\nmin_interactions = 9\n"), ErrorCode::ConfigError);
  EXPECT_EQ(code_of("feed_size = 3\n"), ErrorCode::ConfigError);
  EXPECT_EQ(code_of("[llm]\nprovider = carrier-pigeon\n"), ErrorCode::ConfigError);
  try {
    parse_config("[experiment]\n\nfeed_size = x\n");
  } catch (const Error& e) {
    EXPECT_EQ(e.detail(), "line 3");
  }
}
