#include <gtest/gtest.h>

#include <thread>

#include "misinfo/interventions.hpp"
#include "support.hpp"

using namespace misinfo;

namespace {

const char* kFauci = "Special Forces Arrest Deep State Dr. Anthony Fauci";

Claim fauci() {
  return Claim("fauci", kFauci, "realrawnews.example", std::nullopt, Veracity::False,
               Topic::Political);
}

AttributeSet table_one_attrs() {
  AttributeSet a;
  a.education = Education::Uneducated;
  a.gender = Gender::Male;
  a.race = Race::White;
  a.age = AgeBracket{"18-29"};
  a.politics = Politics::Conservative;
  return a;
}

std::string words(int n) {
  std::string s;
  for (int i = 0; i < n; ++i) s += (i ? " w" : "w");
  return s;
}

}  // namespace

TEST(Templates, FixedTexts) {
  EXPECT_EQ(render_label_only(Veracity::True).explanation, "This claim is true.");
  EXPECT_EQ(render_label_only(Veracity::False).explanation, "This claim is false.");
  EXPECT_EQ(render_methodology(Veracity::True, MethodologySource::AI).explanation,
            "This claim was verified by an AI model trained on a large-scale corpus of web data.");
  EXPECT_EQ(render_methodology(Veracity::False, MethodologySource::Human).explanation,
            "This claim was refuted by non-partisan fact-checkers.");
  const auto control = render_control(Veracity::False, "c1");
  EXPECT_TRUE(control.explanation.empty());
  EXPECT_EQ(control.arm, InterventionArm::Control);
  EXPECT_EQ(control.claim_id, "c1");
}

TEST(Templates, ReactionFrame) {
  FrameSlots slots{"the government is corrupt", "want to find out more", Stance::Manipulate};
  const auto t = render_reaction_frame(Veracity::False, slots, "c9");
  EXPECT_EQ(t.explanation,
            "This claim is false. This headline is trying to manipulate readers by implying that "
            "the government is corrupt. It is compelling readers to want to find out more.");
  EXPECT_EQ(t.word_count, 28);
  EXPECT_EQ(t.arm, InterventionArm::ReactionFrame);
}

TEST(Templates, ReactionFrameSlotsFromLookup) {
  const auto provider = LookupSlotProvider::from_json(json::parse(R"({
    "a": {"writer_intent": "x is y", "reader_action": "do z"},
    "b": {"writer_intent": "p", "reader_action": "q", "stance": "persuade"}})"));
  const auto a = testing_support::claim("a", Veracity::True);
  EXPECT_NE(render_reaction_frame(a, Veracity::True, provider).explanation.find("persuade"),
            std::string::npos);
  const auto b = testing_support::claim("b", Veracity::False);
  EXPECT_NE(render_reaction_frame(b, Veracity::False, provider).explanation.find("persuade"),
            std::string::npos);
  const auto missing = testing_support::claim("zz", Veracity::False);
  try {
    render_reaction_frame(missing, Veracity::False, provider);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingSlots);
  }
  EXPECT_THROW(render_reaction_frame(Veracity::False, FrameSlots{"", "x"}), Error);
  EXPECT_THROW(LookupSlotProvider::from_json(json::parse(
                   R"({"a": {"writer_intent": "p", "reader_action": "q", "stance": "coax"}})")),
               Error);
}

TEST(Prompts, ZeroShotTableOne) {
  const auto r = build_zero_shot_prompt(fauci(), Veracity::False);
  EXPECT_EQ(r.filled_prompt,
            "Write a short explanation for why the headline \xE2\x80\x98" + std::string(kFauci) +
                "\xE2\x80\x99 is \xE2\x80\x98" "false.\xE2\x80\x99 Do not mention that you are AI. "
                "The explanation must be less than 100 words.");
  EXPECT_EQ(r.model_id, "gpt-4-0613");
  EXPECT_EQ(r.template_id, InterventionArm::LLMZeroShot);
  EXPECT_FALSE(r.attrs);
}

TEST(Prompts, PersonalizedTableOne) {
  const auto r = build_personalized_prompt(fauci(), Veracity::False, table_one_attrs());
  EXPECT_EQ(r.filled_prompt,
            "Write a short explanation for why the headline \xE2\x80\x98" + std::string(kFauci) +
                "\xE2\x80\x99 is \xE2\x80\x98" "false\xE2\x80\x99 that will appeal to an uneducated, "
                "male, white, 18-29 year old reader with conservative political beliefs. Do not "
                "mention that you are AI. Do not mention the type of reader. The explanation must "
                "be less than 100 words.");
}

TEST(Prompts, PersonalizedElidesAbsentAttributes) {
  const auto c = testing_support::claim("h", Veracity::True);
  auto audience = [&](AttributeSet a) {
    const auto p = build_personalized_prompt(c, Veracity::True, a).filled_prompt;
    const auto b = p.find("appeal to ") + 10;
    return p.substr(b, p.find(". Do not") - b);
  };
  AttributeSet pol;
  pol.politics = Politics::Liberal;
  EXPECT_EQ(audience(pol), "a reader with liberal political beliefs");
  AttributeSet edu;
  edu.education = Education::Educated;
  EXPECT_EQ(audience(edu), "an educated reader");
  AttributeSet young;
  young.age = AgeBracket{"18-29"};
  EXPECT_EQ(audience(young), "an 18-29 year old reader");
  AttributeSet mid;
  mid.age = AgeBracket{"30-49"};
  mid.gender = Gender::Female;
  EXPECT_EQ(audience(mid), "a female, 30-49 year old reader");
  AttributeSet two;
  two.race = Race::Asian;
  two.politics = Politics::Moderate;
  EXPECT_EQ(audience(two), "an asian reader with moderate political beliefs");

  try {
    build_personalized_prompt(c, Veracity::True, AttributeSet{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyAttributes);
  }
}

// Property: for every non-empty attribute subset the prompt keeps the fixed
// frame and mentions each present attribute exactly where expected.
TEST(Prompts, EveryAttributeSubsetKeepsFrame) {
  const auto full = table_one_attrs();
  const auto c = fauci();
  for (int mask = 1; mask < 32; ++mask) {
    AttributeSet a;
    if (mask & 1) a.politics = full.politics;
    if (mask & 2) a.race = full.race;
    if (mask & 4) a.education = full.education;
    if (mask & 8) a.gender = full.gender;
    if (mask & 16) a.age = full.age;
    const auto p = build_personalized_prompt(c, Veracity::False, a).filled_prompt;
    EXPECT_TRUE(p.starts_with("Write a short explanation for why the headline "));
    EXPECT_TRUE(p.ends_with(" political beliefs. Do not mention that you are AI. Do not mention the "
                            "type of reader. The explanation must be less than 100 words.") ==
                bool(mask & 1));
    EXPECT_EQ(p.find("conservative") != std::string::npos, bool(mask & 1)) << mask;
    EXPECT_EQ(p.find("white") != std::string::npos, bool(mask & 2)) << mask;
    EXPECT_EQ(p.find("uneducated") != std::string::npos, bool(mask & 4)) << mask;
    EXPECT_EQ(p.find("male") != std::string::npos, bool(mask & 8)) << mask;
    EXPECT_EQ(p.find("18-29 year old") != std::string::npos, bool(mask & 16)) << mask;
    EXPECT_EQ(p.find(", ,"), std::string::npos);
    EXPECT_EQ(p.find("  "), std::string::npos);
  }
}

TEST(Prompts, CacheKeySeparatesAttributesAndModel) {
  const auto c = fauci();
  auto a = table_one_attrs();
  auto b = a;
  b.gender = Gender::Female;
  EXPECT_NE(build_personalized_prompt(c, Veracity::False, a).cache_key(),
            build_personalized_prompt(c, Veracity::False, b).cache_key());
  EXPECT_NE(build_zero_shot_prompt(c, Veracity::False, "m1").cache_key(),
            build_zero_shot_prompt(c, Veracity::False, "m2").cache_key());
  EXPECT_EQ(build_zero_shot_prompt(c, Veracity::False).cache_key(),
            build_zero_shot_prompt(c, Veracity::False).cache_key());
}

TEST(Generator, RetriesLongResponsesThenFlags) {
  auto client = std::make_shared<MockLlmClient>(
      [](const PromptRequest&, int attempt) { return attempt < 1 ? words(120) : words(40); });
  ExplanationGenerator gen(client, GenerationPolicy{2, 2});
  const auto t = gen.generate(build_zero_shot_prompt(fauci(), Veracity::False));
  EXPECT_EQ(t.word_count, 40);
  EXPECT_FALSE(t.over_limit);
  EXPECT_EQ(client->calls(), 2);

  auto stubborn = std::make_shared<MockLlmClient>(
      [](const PromptRequest&, int) { return words(100); });
  ExplanationGenerator gen2(stubborn, GenerationPolicy{2, 2});
  const auto t2 = gen2.generate(build_zero_shot_prompt(fauci(), Veracity::False));
  EXPECT_TRUE(t2.over_limit);
  EXPECT_EQ(t2.word_count, 100);
  EXPECT_EQ(stubborn->calls(), 3);
}

TEST(Generator, CachesPerKey) {
  auto client = std::make_shared<MockLlmClient>();
  ExplanationGenerator gen(client);
  const auto req = build_personalized_prompt(fauci(), Veracity::False, table_one_attrs());
  const auto a = gen.generate(req);
  const auto b = gen.generate(req);
  EXPECT_EQ(a, b);
  EXPECT_EQ(client->calls(), 1);
  EXPECT_EQ(a.generation_attrs, table_one_attrs());
  EXPECT_EQ(a.arm, InterventionArm::LLMPersonalized);
  gen.generate(build_zero_shot_prompt(fauci(), Veracity::False));
  EXPECT_EQ(client->calls(), 2);
  EXPECT_EQ(gen.cache_size(), 2u);
}

TEST(Generator, ConcurrentSameKeyMakesOneCall) {
  auto client = std::make_shared<MockLlmClient>([](const PromptRequest&, int) {
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    return std::string("Short answer.");
  });
  ExplanationGenerator gen(client, GenerationPolicy{2, 8});
  std::vector<PromptRequest> reqs(8, build_zero_shot_prompt(fauci(), Veracity::False));
  const auto out = gen.generate_batch(reqs);
  ASSERT_EQ(out.size(), 8u);
  for (const auto& t : out) EXPECT_EQ(t.explanation, "Short answer.");
  EXPECT_EQ(client->calls(), 1);
}

TEST(Generator, EmptyResponseIsProviderErrorAndNotCached) {
  int n = 0;
  auto client = std::make_shared<MockLlmClient>([&n](const PromptRequest&, int) {
    return n++ == 0 ? std::string("   ") : std::string("Fine now.");
  });
  ExplanationGenerator gen(client);
  const auto req = build_zero_shot_prompt(fauci(), Veracity::False);
  try {
    gen.generate(req);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ProviderError);
  }
  EXPECT_EQ(gen.generate(req).explanation, "Fine now.");
}

TEST(Generator, PrimedCacheSkipsClient) {
  auto client = std::make_shared<MockLlmClient>();
  ExplanationGenerator gen(client);
  const auto req = build_zero_shot_prompt(fauci(), Veracity::False);
  InterventionText t;
  t.claim_id = "fauci";
  t.arm = InterventionArm::LLMZeroShot;
  t.explanation = "From an earlier run.";
  gen.prime(req, t);
  EXPECT_EQ(gen.generate(req).explanation, "From an earlier run.");
  EXPECT_EQ(client->calls(), 0);
}

TEST(Generator, MockDefaultStaysUnderLimit) {
  auto client = std::make_shared<MockLlmClient>();
  ExplanationGenerator gen(client);
  const auto t = gen.generate(build_personalized_prompt(fauci(), Veracity::False, table_one_attrs()));
  EXPECT_LT(t.word_count, kMaxExplanationWords);
  EXPECT_TRUE(t.explanation.starts_with("The headline is false."));
  const auto out = to_output_json({build_zero_shot_prompt(fauci(), Veracity::False), t});
  EXPECT_EQ(out.at("model_id"), "gpt-4-0613");
  EXPECT_EQ(out.at("label"), "false");
}
