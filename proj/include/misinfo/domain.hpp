#pragma once

// Core vocabulary shared by every module: claims, demographic attribute sets,
// intervention arms, and the interaction events that make up a session log.

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "misinfo/error.hpp"

namespace misinfo {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Closed enumerations. Each has a canonical wire name; parsing anything else
// throws ParseError.

enum class Veracity { True, False };
enum class Topic { Medical, Political, Other };
enum class Politics { Conservative, Moderate, Liberal };
enum class Race { White, Black, Asian, Hispanic, Other };
enum class Education { Educated, Uneducated };
enum class Gender { Male, Female, Other };

enum class InterventionArm {
  Control,
  LabelOnly,
  MethodologyAI,
  MethodologyHuman,
  ReactionFrame,
  LLMZeroShot,
  LLMPersonalized,
};

inline constexpr std::array<InterventionArm, 7> kAllArms = {
    InterventionArm::Control,          InterventionArm::LabelOnly,
    InterventionArm::MethodologyAI,    InterventionArm::MethodologyHuman,
    InterventionArm::ReactionFrame,    InterventionArm::LLMZeroShot,
    InterventionArm::LLMPersonalized,
};

enum class EventKind {
  Like,
  Share,
  Flag,
  OpenIntervention,
  VeracityJudgment,
  HelpfulnessRating,
  QuestionnaireAnswer,
  AttentionCheckAnswer,
};

enum class Phase { Pre, Post };
enum class Judgment { True, False, Uncertain };

namespace detail {

template <typename E, std::size_t N>
struct EnumNames {
  std::array<std::pair<E, std::string_view>, N> entries;

  constexpr std::string_view name(E value) const {
    for (const auto& [e, n] : entries)
      if (e == value) return n;
    return "?";
  }

  std::optional<E> find(std::string_view text) const {
    for (const auto& [e, n] : entries)
      if (n == text) return e;
    return std::nullopt;
  }
};

inline constexpr EnumNames<Veracity, 2> kVeracityNames{
    {{{Veracity::True, "true"}, {Veracity::False, "false"}}}};
inline constexpr EnumNames<Topic, 3> kTopicNames{{{{Topic::Medical, "medical"},
                                                   {Topic::Political, "political"},
                                                   {Topic::Other, "other"}}}};
inline constexpr EnumNames<Politics, 3> kPoliticsNames{
    {{{Politics::Conservative, "conservative"},
      {Politics::Moderate, "moderate"},
      {Politics::Liberal, "liberal"}}}};
inline constexpr EnumNames<Race, 5> kRaceNames{{{{Race::White, "white"},
                                                 {Race::Black, "black"},
                                                 {Race::Asian, "asian"},
                                                 {Race::Hispanic, "hispanic"},
                                                 {Race::Other, "other"}}}};
inline constexpr EnumNames<Education, 2> kEducationNames{
    {{{Education::Educated, "educated"}, {Education::Uneducated, "uneducated"}}}};
inline constexpr EnumNames<Gender, 3> kGenderNames{{{{Gender::Male, "male"},
                                                     {Gender::Female, "female"},
                                                     {Gender::Other, "other"}}}};
inline constexpr EnumNames<InterventionArm, 7> kArmNames{
    {{{InterventionArm::Control, "Control"},
      {InterventionArm::LabelOnly, "LabelOnly"},
      {InterventionArm::MethodologyAI, "MethodologyAI"},
      {InterventionArm::MethodologyHuman, "MethodologyHuman"},
      {InterventionArm::ReactionFrame, "ReactionFrame"},
      {InterventionArm::LLMZeroShot, "LLMZeroShot"},
      {InterventionArm::LLMPersonalized, "LLMPersonalized"}}}};
inline constexpr EnumNames<EventKind, 8> kEventKindNames{
    {{{EventKind::Like, "Like"},
      {EventKind::Share, "Share"},
      {EventKind::Flag, "Flag"},
      {EventKind::OpenIntervention, "OpenIntervention"},
      {EventKind::VeracityJudgment, "VeracityJudgment"},
      {EventKind::HelpfulnessRating, "HelpfulnessRating"},
      {EventKind::QuestionnaireAnswer, "QuestionnaireAnswer"},
      {EventKind::AttentionCheckAnswer, "AttentionCheckAnswer"}}}};
inline constexpr EnumNames<Phase, 2> kPhaseNames{
    {{{Phase::Pre, "Pre"}, {Phase::Post, "Post"}}}};
inline constexpr EnumNames<Judgment, 3> kJudgmentNames{
    {{{Judgment::True, "True"}, {Judgment::False, "False"}, {Judgment::Uncertain, "Uncertain"}}}};

template <typename E, std::size_t N>
E parse_enum(const EnumNames<E, N>& names, std::string_view text, std::string_view what) {
  if (auto e = names.find(text)) return *e;
  throw Error(ErrorCode::ParseError,
              "invalid " + std::string(what) + " value '" + std::string(text) + "'");
}

}  // namespace detail

inline std::string_view to_string(Veracity v) { return detail::kVeracityNames.name(v); }
inline std::string_view to_string(Topic v) { return detail::kTopicNames.name(v); }
inline std::string_view to_string(Politics v) { return detail::kPoliticsNames.name(v); }
inline std::string_view to_string(Race v) { return detail::kRaceNames.name(v); }
inline std::string_view to_string(Education v) { return detail::kEducationNames.name(v); }
inline std::string_view to_string(Gender v) { return detail::kGenderNames.name(v); }
inline std::string_view to_string(InterventionArm v) { return detail::kArmNames.name(v); }
inline std::string_view to_string(EventKind v) { return detail::kEventKindNames.name(v); }
inline std::string_view to_string(Phase v) { return detail::kPhaseNames.name(v); }
inline std::string_view to_string(Judgment v) { return detail::kJudgmentNames.name(v); }

inline Veracity parse_veracity(std::string_view s) {
  return detail::parse_enum(detail::kVeracityNames, s, "veracity");
}
inline Topic parse_topic(std::string_view s) {
  return detail::parse_enum(detail::kTopicNames, s, "topic");
}
inline Politics parse_politics(std::string_view s) {
  return detail::parse_enum(detail::kPoliticsNames, s, "politics");
}
inline Race parse_race(std::string_view s) {
  return detail::parse_enum(detail::kRaceNames, s, "race");
}
inline Education parse_education(std::string_view s) {
  return detail::parse_enum(detail::kEducationNames, s, "education");
}
inline Gender parse_gender(std::string_view s) {
  return detail::parse_enum(detail::kGenderNames, s, "gender");
}
inline InterventionArm parse_arm(std::string_view s) {
  return detail::parse_enum(detail::kArmNames, s, "arm");
}
inline EventKind parse_event_kind(std::string_view s) {
  return detail::parse_enum(detail::kEventKindNames, s, "event kind");
}
inline Phase parse_phase(std::string_view s) {
  return detail::parse_enum(detail::kPhaseNames, s, "phase");
}
inline Judgment parse_judgment(std::string_view s) {
  return detail::parse_enum(detail::kJudgmentNames, s, "judgment");
}

inline Judgment judgment_of(Veracity v) {
  return v == Veracity::True ? Judgment::True : Judgment::False;
}

// ---------------------------------------------------------------------------
// Claims

struct Claim {
  std::string id;
  std::string headline;
  std::string source;
  std::optional<std::string> image_ref;
  Veracity veracity = Veracity::False;
  Topic topic = Topic::Other;

  Claim() = default;
  Claim(std::string id_, std::string headline_, std::string source_,
        std::optional<std::string> image, Veracity v, Topic t)
      : id(std::move(id_)),
        headline(std::move(headline_)),
        source(std::move(source_)),
        image_ref(std::move(image)),
        veracity(v),
        topic(t) {
    validate();
  }

  void validate() const {
    if (id.empty()) throw Error(ErrorCode::ParseError, "claim id is empty");
    if (headline.empty())
      throw Error(ErrorCode::ParseError, "claim '" + id + "' has an empty headline");
  }

  bool operator==(const Claim&) const = default;
};

inline void to_json(json& j, const Claim& c) {
  j = json{{"id", c.id},
           {"headline", c.headline},
           {"source", c.source},
           {"image_ref", c.image_ref ? json(*c.image_ref) : json(nullptr)},
           {"veracity", to_string(c.veracity)},
           {"topic", to_string(c.topic)}};
}

inline void from_json(const json& j, Claim& c) {
  c.id = j.at("id").get<std::string>();
  c.headline = j.at("headline").get<std::string>();
  c.source = j.value("source", std::string{});
  if (j.contains("image_ref") && !j.at("image_ref").is_null() &&
      !j.at("image_ref").get<std::string>().empty())
    c.image_ref = j.at("image_ref").get<std::string>();
  else
    c.image_ref.reset();
  c.veracity = parse_veracity(j.at("veracity").get<std::string>());
  c.topic = parse_topic(j.value("topic", std::string{"other"}));
  c.validate();
}

// ---------------------------------------------------------------------------
// Demographics

/// Age brackets are labels validated against the experiment's configured
/// bracket list (defaults below), so they stay open for reconfiguration.
struct AgeBracket {
  std::string label;
  auto operator<=>(const AgeBracket&) const = default;
};

inline const std::vector<std::string>& default_age_brackets() {
  static const std::vector<std::string> brackets = {"18-29", "30-49", "50-64", "65+"};
  return brackets;
}

struct AttributeSet {
  std::optional<Politics> politics;
  std::optional<Race> race;
  std::optional<Education> education;
  std::optional<Gender> gender;
  std::optional<AgeBracket> age;

  static constexpr int kMaxAttributes = 5;

  int size() const {
    return int(politics.has_value()) + int(race.has_value()) +
           int(education.has_value()) + int(gender.has_value()) + int(age.has_value());
  }
  bool empty() const { return size() == 0; }

  /// Stable key used for tie-breaking and cache lookups.
  std::string key() const {
    auto part = [](const auto& opt) -> std::string {
      if (!opt) return "-";
      if constexpr (std::is_same_v<std::decay_t<decltype(*opt)>, AgeBracket>)
        return opt->label;
      else
        return std::string(to_string(*opt));
    };
    return part(politics) + "|" + part(race) + "|" + part(education) + "|" +
           part(gender) + "|" + part(age);
  }

  bool operator==(const AttributeSet&) const = default;
};

inline void to_json(json& j, const AttributeSet& a) {
  j = json::object();
  if (a.politics) j["politics"] = to_string(*a.politics);
  if (a.race) j["race"] = to_string(*a.race);
  if (a.education) j["education"] = to_string(*a.education);
  if (a.gender) j["gender"] = to_string(*a.gender);
  if (a.age) j["age"] = a.age->label;
}

inline AttributeSet parse_attribute_set(const json& j,
                                        const std::vector<std::string>& age_brackets =
                                            default_age_brackets()) {
  if (!j.is_object()) throw Error(ErrorCode::ParseError, "attribute set must be an object");
  AttributeSet a;
  for (const auto& [key, value] : j.items()) {
    if (value.is_null()) continue;
    const auto text = value.get<std::string>();
    if (key == "politics") a.politics = parse_politics(text);
    else if (key == "race") a.race = parse_race(text);
    else if (key == "education") a.education = parse_education(text);
    else if (key == "gender") a.gender = parse_gender(text);
    else if (key == "age") {
      if (std::find(age_brackets.begin(), age_brackets.end(), text) == age_brackets.end())
        throw Error(ErrorCode::ParseError, "invalid age bracket '" + text + "'");
      a.age = AgeBracket{text};
    } else {
      throw Error(ErrorCode::ParseError, "unknown attribute '" + key + "'");
    }
  }
  return a;
}

inline void from_json(const json& j, AttributeSet& a) { a = parse_attribute_set(j); }

struct SurveyAnswer {
  std::string question_id;
  std::string answer_id;
  bool operator==(const SurveyAnswer&) const = default;
};

inline void to_json(json& j, const SurveyAnswer& a) {
  j = json{{"question_id", a.question_id}, {"answer_id", a.answer_id}};
}
inline void from_json(const json& j, SurveyAnswer& a) {
  a.question_id = j.at("question_id").get<std::string>();
  a.answer_id = j.at("answer_id").get<std::string>();
}

/// `self_reported` is ground truth for scoring only; generation must use
/// `inferred`.
struct UserProfile {
  std::string user_id;
  AttributeSet self_reported;
  std::optional<AttributeSet> inferred;
  std::vector<SurveyAnswer> survey_answers;
  bool operator==(const UserProfile&) const = default;
};

inline void to_json(json& j, const UserProfile& p) {
  j = json{{"user_id", p.user_id},
           {"self_reported", p.self_reported},
           {"inferred", p.inferred ? json(*p.inferred) : json(nullptr)},
           {"survey_answers", p.survey_answers}};
}
inline void from_json(const json& j, UserProfile& p) {
  p.user_id = j.at("user_id").get<std::string>();
  p.self_reported = j.at("self_reported").get<AttributeSet>();
  if (j.contains("inferred") && !j.at("inferred").is_null())
    p.inferred = j.at("inferred").get<AttributeSet>();
  else
    p.inferred.reset();
  p.survey_answers = j.value("survey_answers", std::vector<SurveyAnswer>{});
}

// ---------------------------------------------------------------------------
// Intervention text

struct InterventionText {
  std::string claim_id;
  InterventionArm arm = InterventionArm::Control;
  Veracity label_shown = Veracity::False;
  std::string explanation;
  std::optional<AttributeSet> generation_attrs;
  int word_count = 0;
  bool over_limit = false;

  bool operator==(const InterventionText&) const = default;
};

inline void to_json(json& j, const InterventionText& t) {
  j = json{{"claim_id", t.claim_id},
           {"arm", to_string(t.arm)},
           {"label_shown", to_string(t.label_shown)},
           {"explanation", t.explanation},
           {"generation_attrs", t.generation_attrs ? json(*t.generation_attrs) : json(nullptr)},
           {"word_count", t.word_count},
           {"over_limit", t.over_limit}};
}
inline void from_json(const json& j, InterventionText& t) {
  t.claim_id = j.at("claim_id").get<std::string>();
  t.arm = parse_arm(j.at("arm").get<std::string>());
  t.label_shown = parse_veracity(j.at("label_shown").get<std::string>());
  t.explanation = j.at("explanation").get<std::string>();
  if (j.contains("generation_attrs") && !j.at("generation_attrs").is_null())
    t.generation_attrs = j.at("generation_attrs").get<AttributeSet>();
  else
    t.generation_attrs.reset();
  t.word_count = j.at("word_count").get<int>();
  t.over_limit = j.at("over_limit").get<bool>();
}

// ---------------------------------------------------------------------------
// Interaction events

struct EventPayload {
  std::optional<Judgment> judgment;
  std::optional<int> helpfulness;  // 1 = very unhelpful ... 4 = very helpful
  std::optional<std::string> question_id;
  std::optional<std::string> answer;

  bool operator==(const EventPayload&) const = default;
};

struct InteractionEvent {
  std::int64_t seq = 0;
  std::string session_id;
  std::string claim_id;
  std::int64_t timestamp = 0;
  EventKind kind = EventKind::Like;
  Phase phase = Phase::Pre;
  EventPayload payload;

  bool operator==(const InteractionEvent&) const = default;
};

inline void check_payload(const InteractionEvent& e) {
  switch (e.kind) {
    case EventKind::VeracityJudgment:
      if (!e.payload.judgment)
        throw Error(ErrorCode::ParseError, "VeracityJudgment requires payload.judgment");
      break;
    case EventKind::HelpfulnessRating:
      if (!e.payload.helpfulness || *e.payload.helpfulness < 1 || *e.payload.helpfulness > 4)
        throw Error(ErrorCode::ParseError, "helpfulness must be an integer in 1..4");
      break;
    case EventKind::QuestionnaireAnswer:
    case EventKind::AttentionCheckAnswer:
      if (!e.payload.question_id || !e.payload.answer)
        throw Error(ErrorCode::ParseError, "answer events require question_id and answer");
      break;
    default:
      break;
  }
}

inline void to_json(json& j, const EventPayload& p) {
  j = json::object();
  if (p.judgment) j["judgment"] = to_string(*p.judgment);
  if (p.helpfulness) j["helpfulness"] = *p.helpfulness;
  if (p.question_id) j["question_id"] = *p.question_id;
  if (p.answer) j["answer"] = *p.answer;
}

inline void from_json(const json& j, EventPayload& p) {
  p = {};
  for (const auto& [key, value] : j.items()) {
    if (key == "judgment") p.judgment = parse_judgment(value.get<std::string>());
    else if (key == "helpfulness") p.helpfulness = value.get<int>();
    else if (key == "question_id") p.question_id = value.get<std::string>();
    else if (key == "answer") p.answer = value.get<std::string>();
    else throw Error(ErrorCode::ParseError, "unknown payload field '" + key + "'");
  }
}

inline void to_json(json& j, const InteractionEvent& e) {
  j = json{{"seq", e.seq},
           {"session_id", e.session_id},
           {"claim_id", e.claim_id},
           {"timestamp", e.timestamp},
           {"kind", to_string(e.kind)},
           {"phase", to_string(e.phase)},
           {"payload", e.payload}};
}

inline void from_json(const json& j, InteractionEvent& e) {
  e.seq = j.at("seq").get<std::int64_t>();
  e.session_id = j.at("session_id").get<std::string>();
  e.claim_id = j.value("claim_id", std::string{});
  e.timestamp = j.at("timestamp").get<std::int64_t>();
  e.kind = parse_event_kind(j.at("kind").get<std::string>());
  e.phase = parse_phase(j.at("phase").get<std::string>());
  e.payload = j.value("payload", json::object()).get<EventPayload>();
  check_payload(e);
}

inline bool is_reaction(EventKind k) {
  return k == EventKind::Like || k == EventKind::Share || k == EventKind::Flag;
}

// ---------------------------------------------------------------------------
// Event validation against a session's current state.

/// The parts of a session that decide whether an incoming event is legal.
struct SessionValidationState {
  std::set<std::string> feed;
  std::int64_t last_seq = 0;
  std::set<std::string> opened;  // claims with an OpenIntervention event

  void apply(const InteractionEvent& e) {
    last_seq = e.seq;
    if (e.kind == EventKind::OpenIntervention) opened.insert(e.claim_id);
  }
};

struct Validation {
  bool accepted = true;
  std::optional<ErrorCode> code;
  std::string reason;

  static Validation accept() { return {}; }
  static Validation reject(ErrorCode c, std::string why) { return {false, c, std::move(why)}; }
  explicit operator bool() const { return accepted; }
};

inline Validation validate_event(const InteractionEvent& e, const SessionValidationState& s) {
  if (e.seq <= s.last_seq)
    return Validation::reject(ErrorCode::OutOfOrder,
                              "seq " + std::to_string(e.seq) + " not after " +
                                  std::to_string(s.last_seq));
  const bool needs_claim =
      e.kind != EventKind::QuestionnaireAnswer && e.kind != EventKind::AttentionCheckAnswer;
  if (needs_claim && !s.feed.contains(e.claim_id))
    return Validation::reject(ErrorCode::UnknownClaim,
                              "claim '" + e.claim_id + "' is not in the session feed");
  if (e.phase == Phase::Post && !s.opened.contains(e.claim_id))
    return Validation::reject(ErrorCode::PhaseViolation,
                              "Post-phase event before the intervention was opened");
  if (e.kind == EventKind::HelpfulnessRating && e.phase != Phase::Post)
    return Validation::reject(ErrorCode::PhaseViolation,
                              "helpfulness can only be rated after the intervention");
  return Validation::accept();
}

}  // namespace misinfo
