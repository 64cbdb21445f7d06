#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "misinfo/lingua.hpp"
#include "support.hpp"

using namespace misinfo;
using namespace misinfo::lingua;

namespace {

json fixture() {
  std::ifstream in(std::string(MISINFO_ORACLE_DIR) + "/readability.json");
  return json::parse(in);
}

// Flesch reading ease from hand counts.
double ease(double words, double sentences, double syllables) {
  return 206.835 - 1.015 * (words / sentences) - 84.6 * (syllables / words);
}

}  // namespace

TEST(Syllables, HandCountedLexicon) {
  const auto lexicon = fixture()["lexicon"];
  int agree = 0, total = 0;
  for (const auto& [word, n] : lexicon.items()) {
    ++total;
    if (syllables(word) == n.get<int>()) {
      ++agree;
    } else {
      std::cout << "  disagree: " << word << " " << syllables(word) << " vs " << n << "\n";
    }
  }
  EXPECT_EQ(total, 50);
  EXPECT_GE(agree, 45);
}

TEST(Syllables, EdgeCases) {
  EXPECT_EQ(syllables("x"), 1);
  EXPECT_EQ(syllables("123"), 1);
  EXPECT_EQ(syllables("Table,"), 2);
  EXPECT_EQ(syllables("yes"), 1);
}

TEST(Readability, FixtureSentences) {
  const auto sentences = fixture()["sentences"];
  for (const auto& s : sentences) {
    const std::string text = s["text"];
    const auto c = count_units(text);
    EXPECT_EQ(c.words, s["words"].get<int>()) << text;
    EXPECT_EQ(c.sentences, s["sentences"].get<int>()) << text;
    EXPECT_EQ(c.syllables, s["syllables"].get<int>()) << text;
    EXPECT_NEAR(reading_ease(c),
                ease(s["words"].get<double>(), s["sentences"].get<double>(),
                     s["syllables"].get<double>()),
                1e-9)
        << text;
  }
}

TEST(Readability, AbbreviationsAndUnterminated) {
  EXPECT_EQ(count_units("Dr. Jones met Sen. Smith at 3 p.m. today.").sentences, 1);
  EXPECT_EQ(count_units("no final stop here").sentences, 1);
  EXPECT_EQ(count_units("One. Two! Three? \"Four.\"").sentences, 4);
  try {
    count_units("  ... !! ");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyText);
  }
  const Counts c{20, 2, 30, };
  EXPECT_NEAR(fk_grade(c), 0.39 * 10 + 11.8 * 1.5 - 15.59, 1e-12);
}

TEST(Formality, FormalAboveColloquial) {
  const double formal = formality(
      "The committee published a detailed analysis of the economic consequences of the policy.");
  const double casual = formality("oh wow you know I really think we just gotta go now lol");
  EXPECT_GT(formal, casual);
  EXPECT_GE(casual, 0.0);
  EXPECT_LE(formal, 100.0);
}

TEST(Formality, Registry) {
  try {
    formality("text", "no-such-model");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ScorerUnavailable);
  }
  ScorerRegistry::instance().add("constant", [](std::string_view) { return 42.0; });
  EXPECT_EQ(formality("anything", "constant"), 42.0);
  EXPECT_EQ(measure("Dogs run fast.", "constant").formality, 42.0);
}

TEST(Compare, StudentTestAgainstReference) {
  std::map<std::string, std::vector<std::string>> groups = {
      {"g1", {"Short one.", "Tiny text here.", "Very small."}},
      {"g2",
       {"This explanation is considerably longer than the others in the reference group.",
        "Another rather long explanation that keeps going for quite a few more words.",
        "A third long text, written so that the mean length clearly differs from the rest."}},
      {"g3", {"Short two.", "Small text here.", "Also brief."}}};
  const auto cmp = group_comparison(groups);
  ASSERT_EQ(cmp.rows.size(), 3u);
  EXPECT_EQ(cmp.rows[0].group, "g1");
  EXPECT_FALSE(cmp.rows[0].length.p);

  const std::vector<double> ref = {2, 3, 2}, longer = {12, 13, 15};
  EXPECT_DOUBLE_EQ(cmp.rows[0].length.mean, 7.0 / 3);
  EXPECT_NEAR(*cmp.rows[1].length.p, stats::student_t_test(longer, ref).p, 1e-12);
  EXPECT_TRUE(cmp.rows[1].length.starred);
  EXPECT_FALSE(cmp.rows[2].length.starred);

  const auto table = format_comparison(cmp);
  EXPECT_NE(table.find("13.33*"), std::string::npos) << table;
  EXPECT_EQ(to_json(cmp)["rows"][1]["length"]["starred"], true);

  groups["g4"] = {"only one"};
  try {
    group_comparison(groups);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::GroupTooSmall);
  }
  CompareOptions missing;
  missing.reference = "g9";
  EXPECT_THROW(group_comparison(groups, missing), Error);
}

TEST(Compare, ReadGroupedTexts) {
  std::istringstream in("{\"group\":\"g1\",\"text\":\"a b\"}\n\n{\"group\":\"g2\",\"text\":\"c\"}\n");
  const auto g = read_grouped_texts(in);
  EXPECT_EQ(g.at("g1").size(), 1u);
  std::istringstream bad("{\"group\":\"g1\"}\n");
  try {
    read_grouped_texts(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.detail(), "line 1");
  }
}
