#include <gtest/gtest.h>

#include <bit>

#include "misinfo/personalization.hpp"
#include "misinfo/rng.hpp"
#include "support.hpp"

using namespace misinfo;

namespace {

AttributeSet attrs(Politics p, Gender g) {
  AttributeSet a;
  a.politics = p;
  a.gender = g;
  return a;
}

// 4 groups x 3 questions; "gB" and "gA" share a distribution so that some
// answer vectors tie exactly, and gC/gD are permutations of each other.
ReferenceTable tie_table() {
  ReferenceTable t;
  for (const char* q : {"q1", "q2", "q3"}) t.add_question(q, {"x", "y", "z"});
  t.add_group({"gB", attrs(Politics::Liberal, Gender::Male), 100}, 0.25);
  t.add_group({"gA", attrs(Politics::Liberal, Gender::Female), 100}, 0.25);
  t.add_group({"gD", attrs(Politics::Conservative, Gender::Male), 100}, 0.25);
  t.add_group({"gC", attrs(Politics::Moderate, Gender::Female), 100}, 0.25);
  const std::map<std::string, std::array<double, 3>> rows = {
      {"gA", {0.6, 0.3, 0.1}}, {"gB", {0.6, 0.3, 0.1}}, {"gC", {0.2, 0.5, 0.3}},
      {"gD", {0.5, 0.2, 0.3}}};
  for (const auto& [g, p] : rows)
    for (const char* q : {"q1", "q2", "q3"}) {
      t.set_probability(g, q, "x", p[0]);
      t.set_probability(g, q, "y", p[1]);
      t.set_probability(g, q, "z", p[2]);
    }
  t.validate();
  return t;
}

// Direct enumeration: product of priors and likelihoods, argmax with ties
// (relative 1e-9) resolved by smallest id.
std::string brute_force_map(const ReferenceTable& t, const std::vector<SurveyAnswer>& ans) {
  std::vector<std::pair<std::string, long double>> scores;
  for (const auto& g : t.groups()) {
    long double s = t.prior(g.id);
    for (const auto& a : ans) s *= *t.probability(g.id, a.question_id, a.answer_id);
    scores.emplace_back(g.id, s);
  }
  long double best = 0;
  for (const auto& [id, s] : scores) best = std::max(best, s);
  std::string winner;
  for (const auto& [id, s] : scores)
    if (best - s <= best * 1e-9L && (winner.empty() || id < winner)) winner = id;
  return winner;
}

}  // namespace

TEST(ReferenceTable, FixtureLoads) {
  const auto t = testing_support::reference_table();
  EXPECT_EQ(t.groups().size(), 6u);
  EXPECT_EQ(t.questions().size(), 4u);
  EXPECT_NEAR(t.prior("g-lib-edu-female"), 1.0 / 6, 1e-15);
  const auto again = ReferenceTable::from_json(t.to_json());
  EXPECT_EQ(again.to_json(), t.to_json());
}

TEST(ReferenceTable, ValidationErrors) {
  auto base = testing_support::reference_table().to_json();
  auto code = [](const json& j) {
    try {
      ReferenceTable::from_json(j);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::AlreadyExists;
  };
  auto bad_sum = base;
  bad_sum["cond_prob"]["g-lib-edu-female"]["q1"]["a"] = 0.9;
  EXPECT_EQ(code(bad_sum), ErrorCode::MalformedTable);
  auto bad_answer = base;
  bad_answer["cond_prob"]["g-lib-edu-female"]["q1"]["nope"] = 0.0;
  EXPECT_EQ(code(bad_answer), ErrorCode::MalformedTable);
  auto bad_prior = base;
  bad_prior["prior"]["g-lib-edu-female"] = 0.5;
  EXPECT_EQ(code(bad_prior), ErrorCode::MalformedTable);
  auto bad_attr = base;
  bad_attr["groups"][0]["attrs"]["politics"] = "anarchist";
  EXPECT_EQ(code(bad_attr), ErrorCode::MalformedTable);
  EXPECT_THROW(ReferenceTable::load("/nonexistent/table.json"), Error);
}

TEST(ReferenceTable, LaplaceForMissingAndZero) {
  ReferenceTable t;
  t.add_question("q", {"a", "b", "c"});
  t.add_group({"g", attrs(Politics::Liberal, Gender::Male), 7}, 1.0);
  t.set_probability("g", "q", "a", 1.0);
  t.set_probability("g", "q", "b", 0.0);
  EXPECT_DOUBLE_EQ(*t.probability("g", "q", "a"), 1.0);
  EXPECT_DOUBLE_EQ(*t.probability("g", "q", "b"), 1.0 / (7 + 3));
  EXPECT_DOUBLE_EQ(*t.probability("g", "q", "c"), 1.0 / (7 + 3));
  EXPECT_DOUBLE_EQ(*t.probability("g", "q", "other"), 1.0 / (7 + 4));
  EXPECT_FALSE(t.probability("g", "unknown", "a"));
}

TEST(Inference, MatchesEnumerationOnEveryAnswerVector) {
  const auto t = tie_table();
  const char* vocab[] = {"x", "y", "z"};
  int ties = 0;
  for (int code = 0; code < 27; ++code) {
    std::vector<SurveyAnswer> ans = {{"q1", vocab[code % 3]},
                                     {"q2", vocab[(code / 3) % 3]},
                                     {"q3", vocab[code / 9]}};
    const auto r = infer_attributes(ans, t);
    EXPECT_EQ(r.group_id, brute_force_map(t, ans)) << code;
    if (r.group_id == "gA") ++ties;  // gA and gB are always tied
    double total = 0;
    for (const auto& [g, p] : r.posterior) total += p;
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
  EXPECT_GT(ties, 0);
}

TEST(Inference, FixtureTableRandomVectors) {
  const auto t = testing_support::reference_table();
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    std::vector<SurveyAnswer> ans;
    for (const auto& [q, answers] : t.questions())
      if (rng.bernoulli(0.8)) ans.push_back({q, answers[rng.index(answers.size())]});
    if (ans.empty()) continue;
    const auto r = infer_attributes(ans, t);
    EXPECT_EQ(r.group_id, brute_force_map(t, ans));
    for (const auto& g : t.groups())
      if (g.id == r.group_id) {
        EXPECT_EQ(r.attrs, g.attrs);
      }
  }
}

TEST(Inference, UnknownQuestionsIgnoredAndEmptyRejected) {
  const auto t = tie_table();
  const auto r = infer_attributes({{"q1", "z"}, {"shoe_size", "44"}}, t);
  EXPECT_EQ(r.ignored_questions, std::vector<std::string>{"shoe_size"});
  EXPECT_EQ(r.group_id, brute_force_map(t, {{"q1", "z"}}));
  try {
    infer_attributes({}, t);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyAnswers);
  }
}

TEST(Inference, PriorShiftsDecision) {
  ReferenceTable t;
  t.add_question("q", {"a", "b"});
  t.add_group({"g1", attrs(Politics::Liberal, Gender::Male), 10}, 0.9);
  t.add_group({"g2", attrs(Politics::Conservative, Gender::Male), 10}, 0.1);
  t.set_probability("g1", "q", "a", 0.4);
  t.set_probability("g1", "q", "b", 0.6);
  t.set_probability("g2", "q", "a", 0.6);
  t.set_probability("g2", "q", "b", 0.4);
  EXPECT_EQ(infer_attributes({{"q", "a"}}, t).group_id, "g1");
  t.set_uniform_prior();
  EXPECT_EQ(infer_attributes({{"q", "a"}}, t).group_id, "g2");
}

// Property: adding an answer that every group gives with equal probability
// never changes the decision.
TEST(Inference, UninformativeAnswerIsNeutral) {
  auto t = tie_table();
  t.add_question("flat", {"u", "v"});
  for (const auto& g : t.groups()) {
    t.set_probability(g.id, "flat", "u", 0.5);
    t.set_probability(g.id, "flat", "v", 0.5);
  }
  const char* vocab[] = {"x", "y", "z"};
  for (int code = 0; code < 27; ++code) {
    std::vector<SurveyAnswer> ans = {{"q1", vocab[code % 3]},
                                     {"q2", vocab[(code / 3) % 3]},
                                     {"q3", vocab[code / 9]}};
    const auto before = infer_attributes(ans, t).group_id;
    ans.push_back({"flat", "v"});
    EXPECT_EQ(infer_attributes(ans, t).group_id, before);
  }
}

TEST(Alignment, ExhaustiveAgainstDirectCount) {
  AttributeSet user;
  user.politics = Politics::Conservative;
  user.race = Race::White;
  user.education = Education::Uneducated;
  user.gender = Gender::Male;
  user.age = AgeBracket{"18-29"};
  AttributeSet other;
  other.politics = Politics::Liberal;
  other.race = Race::Black;
  other.education = Education::Educated;
  other.gender = Gender::Female;
  other.age = AgeBracket{"65+"};
  for (int present = 1; present < 32; ++present)
    for (int match = 0; match < 32; ++match) {
      if ((match & present) != match) continue;
      AttributeSet gen;
      auto pick = [&](int bit, auto member) {
        if (present & (1 << bit)) gen.*member = (match & (1 << bit)) ? user.*member : other.*member;
      };
      pick(0, &AttributeSet::politics);
      pick(1, &AttributeSet::race);
      pick(2, &AttributeSet::education);
      pick(3, &AttributeSet::gender);
      pick(4, &AttributeSet::age);
      const auto s = alignment_score(user, gen);
      EXPECT_EQ(s.k_used, std::popcount(unsigned(present)));
      EXPECT_EQ(s.matches, std::popcount(unsigned(match)));
      EXPECT_DOUBLE_EQ(s.value(), double(std::popcount(unsigned(match))) /
                                      std::popcount(unsigned(present)));
    }
}

TEST(Alignment, UnreportedAttributeNeverMatches) {
  AttributeSet user;
  user.politics = Politics::Liberal;
  AttributeSet gen;
  gen.politics = Politics::Liberal;
  gen.gender = Gender::Male;
  const auto s = alignment_score(user, gen);
  EXPECT_EQ(s.matches, 1);
  EXPECT_EQ(s.k_used, 2);
  EXPECT_THROW(alignment_score(user, AttributeSet{}), Error);
}

TEST(Alignment, ThresholdBoundary) {
  EXPECT_EQ(classify_alignment(0.2), AlignmentClass::Misaligned);
  EXPECT_EQ(classify_alignment(0.4), AlignmentClass::Aligned);
  EXPECT_EQ(classify_alignment(2.0 / 5.0), AlignmentClass::Aligned);
  EXPECT_EQ(classify_alignment(AlignmentScore{2, 5}), AlignmentClass::Aligned);
  EXPECT_EQ(classify_alignment(AlignmentScore{1, 3}), AlignmentClass::Misaligned);
  EXPECT_EQ(classify_alignment(0.6), AlignmentClass::Aligned);
  EXPECT_EQ(classify_alignment(0.6, 0.7), AlignmentClass::Misaligned);
  EXPECT_EQ(to_string(AlignmentClass::Aligned), "aligned");
}
