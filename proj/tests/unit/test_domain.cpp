#include <gtest/gtest.h>

#include <sstream>

#include "misinfo/dataset.hpp"
#include "misinfo/domain.hpp"
#include "misinfo/rng.hpp"
#include "support.hpp"

using namespace misinfo;
using testing_support::claim;
using testing_support::data_file;

TEST(Enums, NamesRoundTrip) {
  for (auto arm : kAllArms) EXPECT_EQ(parse_arm(to_string(arm)), arm);
  for (auto k : {EventKind::Like, EventKind::Share, EventKind::Flag, EventKind::OpenIntervention,
                 EventKind::VeracityJudgment, EventKind::HelpfulnessRating,
                 EventKind::QuestionnaireAnswer, EventKind::AttentionCheckAnswer})
    EXPECT_EQ(parse_event_kind(to_string(k)), k);
  EXPECT_EQ(parse_politics("conservative"), Politics::Conservative);
  EXPECT_EQ(parse_education("uneducated"), Education::Uneducated);
}

TEST(Enums, UnknownValueIsParseError) {
  try {
    parse_veracity("mostly-true");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ParseError);
  }
  EXPECT_THROW(parse_arm("Placebo"), Error);
}

TEST(ClaimJson, RoundTrip) {
  Claim c("x1", "Some headline", "news.example", std::string("img/x1.png"), Veracity::True,
          Topic::Medical);
  EXPECT_EQ(json(c).get<Claim>(), c);
  Claim no_image = c;
  no_image.image_ref.reset();
  EXPECT_EQ(json(no_image).get<Claim>(), no_image);
}

TEST(ClaimJson, EmptyHeadlineRejected) {
  EXPECT_THROW((Claim("x", "", "", std::nullopt, Veracity::True, Topic::Other)), Error);
  EXPECT_THROW(json::parse(R"({"id":"","headline":"h","veracity":"true"})").get<Claim>(), Error);
}

TEST(AttributeSet, ParseAndKey) {
  auto a = parse_attribute_set(json::parse(R"({"politics":"liberal","age":"30-49"})"));
  EXPECT_EQ(a.size(), 2);
  EXPECT_EQ(a.key(), "liberal|-|-|-|30-49");
  EXPECT_EQ(json(a).get<AttributeSet>(), a);
  EXPECT_THROW(parse_attribute_set(json::parse(R"({"age":"12-15"})")), Error);
  EXPECT_THROW(parse_attribute_set(json::parse(R"({"height":"tall"})")), Error);
  // custom brackets
  auto b = parse_attribute_set(json::parse(R"({"age":"under 40"})"), {"under 40", "40+"});
  EXPECT_EQ(b.age->label, "under 40");
}

TEST(Payload, KindSpecificFieldsRequired) {
  InteractionEvent e;
  e.seq = 1;
  e.session_id = "s";
  e.kind = EventKind::VeracityJudgment;
  EXPECT_THROW(check_payload(e), Error);
  e.payload.judgment = Judgment::True;
  EXPECT_NO_THROW(check_payload(e));

  e.kind = EventKind::HelpfulnessRating;
  for (int bad : {0, 5}) {
    e.payload.helpfulness = bad;
    EXPECT_THROW(check_payload(e), Error) << bad;
  }
  e.payload.helpfulness = 4;
  EXPECT_NO_THROW(check_payload(e));
}

TEST(EventJson, RoundTripAndUnknownPayloadField) {
  InteractionEvent e{7, "s000001", "c1", 1234, EventKind::HelpfulnessRating, Phase::Post,
                     EventPayload{std::nullopt, 3, std::nullopt, std::nullopt}};
  EXPECT_EQ(json(e).get<InteractionEvent>(), e);
  auto j = json(e);
  j["payload"]["mood"] = "happy";
  EXPECT_THROW(j.get<InteractionEvent>(), Error);
}

TEST(ValidateEvent, Rules) {
  SessionValidationState s;
  s.feed = {"a", "b"};
  InteractionEvent e;
  e.seq = 1;
  e.claim_id = "a";
  e.kind = EventKind::Like;
  EXPECT_TRUE(validate_event(e, s));

  e.claim_id = "zzz";
  EXPECT_EQ(*validate_event(e, s).code, ErrorCode::UnknownClaim);

  e.claim_id = "a";
  e.phase = Phase::Post;
  EXPECT_EQ(*validate_event(e, s).code, ErrorCode::PhaseViolation);

  e.kind = EventKind::OpenIntervention;
  e.phase = Phase::Pre;
  s.apply(e);
  e.seq = 1;
  EXPECT_EQ(*validate_event(e, s).code, ErrorCode::OutOfOrder);

  e.seq = 2;
  e.kind = EventKind::HelpfulnessRating;
  e.phase = Phase::Pre;
  EXPECT_EQ(*validate_event(e, s).code, ErrorCode::PhaseViolation);
  e.phase = Phase::Post;
  EXPECT_TRUE(validate_event(e, s));
}

// Property: an accepted event sequence has strictly increasing seq, and
// every Post event follows an OpenIntervention for the same claim.
TEST(ValidateEvent, AcceptedSequencesAreWellFormed) {
  Rng rng(11);
  const std::vector<std::string> feed = {"a", "b", "c"};
  const EventKind kinds[] = {EventKind::Like, EventKind::OpenIntervention,
                             EventKind::VeracityJudgment, EventKind::HelpfulnessRating};
  for (int trial = 0; trial < 200; ++trial) {
    SessionValidationState s;
    s.feed = {feed.begin(), feed.end()};
    std::set<std::string> opened;
    std::int64_t last = 0;
    for (int i = 0; i < 30; ++i) {
      InteractionEvent e;
      e.seq = std::int64_t(rng.index(40));
      e.claim_id = feed[rng.index(3)];
      e.kind = kinds[rng.index(4)];
      e.phase = rng.bernoulli(0.5) ? Phase::Pre : Phase::Post;
      if (!validate_event(e, s)) continue;
      ASSERT_GT(e.seq, last);
      if (e.phase == Phase::Post) {
        ASSERT_TRUE(opened.contains(e.claim_id));
      }
      last = e.seq;
      if (e.kind == EventKind::OpenIntervention) opened.insert(e.claim_id);
      s.apply(e);
    }
  }
}

TEST(Dataset, FixtureSummary) {
  const auto data = load_claims(data_file("claims.jsonl"));
  const auto s = summarize(data);
  EXPECT_EQ(s.to_string(), "373 claims: 188 true, 185 false");
  EXPECT_EQ(s.by_topic.at(Topic::Medical), 54u);
}

TEST(Dataset, CsvWithQuotedFields) {
  std::istringstream in(
      "id,headline,source,veracity,topic\n"
      "a,\"Mayor says \"\"no\"\", again\",x.org,true,political\n"
      "b,Plain,y.org,false,\n");
  const auto data = parse_claims(in, ClaimsFormat::Csv);
  ASSERT_EQ(data.size(), 2u);
  EXPECT_EQ(data.at("a").headline, "Mayor says \"no\", again");
  EXPECT_EQ(data.at("b").topic, Topic::Other);
}

TEST(Dataset, Errors) {
  std::istringstream dup("{\"id\":\"a\",\"headline\":\"h\",\"veracity\":\"true\"}\n"
                         "{\"id\":\"a\",\"headline\":\"h2\",\"veracity\":\"false\"}\n");
  try {
    parse_claims(dup, ClaimsFormat::JsonLines);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DuplicateId);
  }
  std::istringstream bad("{\"id\":\"a\",\"headline\":\"h\",\"veracity\":\"maybe\"}\n");
  try {
    parse_claims(bad, ClaimsFormat::JsonLines);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ParseError);
    EXPECT_EQ(e.detail(), "line 1");
  }
  std::istringstream missing("id,headline\na,h\n");
  EXPECT_THROW(parse_claims(missing, ClaimsFormat::Csv), Error);
  EXPECT_THROW(Dataset().at("nope"), Error);
}

TEST(Dataset, JsonlRoundTrip) {
  const auto data = load_claims(data_file("claims.jsonl"));
  std::ostringstream out;
  write_claims_jsonl(out, data);
  std::istringstream in(out.str());
  const auto again = parse_claims(in, ClaimsFormat::JsonLines);
  EXPECT_EQ(again.claims(), data.claims());
}
