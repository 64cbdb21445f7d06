#pragma once

// Simulated participants. Agents walk the same session flow as the browser
// client (consent, questionnaire, feed, two-step pop-up, submit) against any
// ParticipantApi, so cohorts exercise either the embedded engine or the HTTP
// service.

#include <array>
#include <atomic>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "misinfo/engine.hpp"
#include "misinfo/personalization.hpp"
#include "misinfo/rng.hpp"

namespace misinfo {

/// The participant-facing operations of the experiment service.
class ParticipantApi {
 public:
  virtual ~ParticipantApi() = default;
  virtual CreatedSession create_session(const std::string& user_id) = 0;
  virtual void accept_consent(const std::string& sid) = 0;
  virtual void complete_instructions(const std::string& sid) = 0;
  virtual bool submit_questionnaire(const std::string& sid, const QuestionnaireSubmission& q) = 0;
  virtual std::vector<Claim> feed(const std::string& sid) = 0;
  virtual void record_event(const std::string& sid, const EventInput& e) = 0;
  virtual Step1View intervention_step1(const std::string& sid, const std::string& claim_id) = 0;
  virtual Step2View intervention_step2(const std::string& sid, const std::string& claim_id) = 0;
  virtual CompletionResult submit(const std::string& sid) = 0;
};

class EngineApi : public ParticipantApi {
 public:
  explicit EngineApi(std::shared_ptr<ExperimentEngine> engine) : engine_(std::move(engine)) {
    if (!engine_) throw Error(ErrorCode::EngineUnavailable, "no experiment engine");
  }

  CreatedSession create_session(const std::string& user_id) override {
    return engine_->create_session(user_id);
  }
  void accept_consent(const std::string& sid) override { engine_->accept_consent(sid); }
  void complete_instructions(const std::string& sid) override {
    engine_->complete_instructions(sid);
  }
  bool submit_questionnaire(const std::string& sid, const QuestionnaireSubmission& q) override {
    return engine_->submit_questionnaire(sid, q);
  }
  std::vector<Claim> feed(const std::string& sid) override { return engine_->feed(sid); }
  void record_event(const std::string& sid, const EventInput& e) override {
    engine_->record_event(sid, e);
  }
  Step1View intervention_step1(const std::string& sid, const std::string& cid) override {
    return engine_->intervention_step1(sid, cid);
  }
  Step2View intervention_step2(const std::string& sid, const std::string& cid) override {
    return engine_->intervention_step2(sid, cid);
  }
  CompletionResult submit(const std::string& sid) override { return engine_->submit(sid); }

 private:
  std::shared_ptr<ExperimentEngine> engine_;
};

// ---------------------------------------------------------------------------
// Agent policies

using Likert = std::array<double, 4>;  // weights of ratings 1..4

/// Probability of each reaction given what the agent currently believes
/// about the claim.
struct ReactionBias {
  double if_true = 0.3;
  double if_false = 0.1;

  double for_belief(Judgment j) const {
    if (j == Judgment::True) return if_true;
    if (j == Judgment::False) return if_false;
    return 0.5 * (if_true + if_false);
  }
};

struct AgentPolicy {
  double base_accuracy = 0.5;   // P(pre judgment correct)
  double adoption_prob = 0.9;   // P(post judgment = label shown)
  double open_prob = 1.0;       // P(clicking "Find out more")
  double uncertain_prob = 0.0;  // P(an incorrect judgment is "Uncertain" instead)
  ReactionBias like{0.4, 0.2};
  ReactionBias share{0.3, 0.1};
  ReactionBias flag{0.05, 0.4};
  // Keys: "score=0.40" style exact alignment, "aligned", "misaligned",
  // "non-personalized", "default"; first present key wins in that order.
  std::map<std::string, Likert> helpfulness = {{"default", {0.1, 0.2, 0.4, 0.3}}};
  std::optional<AttributeSet> profile;  // random profile when absent
  std::vector<SurveyAnswer> survey_answers;  // random answers from the table when empty
  std::optional<int> target_matches;  // self-report agreeing with the inferred audience on k attributes
  double partisan_bias = 0.0;  // accuracy loss on political claims for non-moderate agents
  bool pass_attention = true;

  void validate() const {
    auto prob = [](double p, const char* what) {
      if (!(p >= 0 && p <= 1))
        throw Error(ErrorCode::ConfigError, std::string(what) + " must be within [0, 1]");
    };
    prob(base_accuracy, "base_accuracy");
    prob(adoption_prob, "adoption_prob");
    prob(open_prob, "open_prob");
    prob(uncertain_prob, "uncertain_prob");
    for (const auto* b : {&like, &share, &flag}) {
      prob(b->if_true, "reaction probability");
      prob(b->if_false, "reaction probability");
    }
    prob(partisan_bias, "partisan_bias");
    for (const auto& [band, w] : helpfulness) {
      double total = 0;
      for (double x : w) {
        if (x < 0) throw Error(ErrorCode::ConfigError, "negative helpfulness weight in " + band);
        total += x;
      }
      if (total <= 0) throw Error(ErrorCode::ConfigError, "helpfulness weights for " + band + " sum to 0");
    }
    if (target_matches && (*target_matches < 0 || *target_matches > AttributeSet::kMaxAttributes))
      throw Error(ErrorCode::ConfigError, "target_matches must be within 0..5");
  }
};

inline void from_json(const json& j, ReactionBias& b) {
  b.if_true = j.value("true", b.if_true);
  b.if_false = j.value("false", b.if_false);
}

inline void from_json(const json& j, AgentPolicy& p) {
  p = AgentPolicy{};
  p.base_accuracy = j.value("base_accuracy", p.base_accuracy);
  p.adoption_prob = j.value("adoption_prob", p.adoption_prob);
  p.open_prob = j.value("open_prob", p.open_prob);
  p.uncertain_prob = j.value("uncertain_prob", p.uncertain_prob);
  if (j.contains("like")) p.like = j.at("like").get<ReactionBias>();
  if (j.contains("share")) p.share = j.at("share").get<ReactionBias>();
  if (j.contains("flag")) p.flag = j.at("flag").get<ReactionBias>();
  if (j.contains("helpfulness")) p.helpfulness = j.at("helpfulness").get<std::map<std::string, Likert>>();
  if (j.contains("profile")) p.profile = parse_attribute_set(j.at("profile"));
  if (j.contains("survey_answers"))
    p.survey_answers = j.at("survey_answers").get<std::vector<SurveyAnswer>>();
  if (j.contains("target_matches")) p.target_matches = j.at("target_matches").get<int>();
  p.partisan_bias = j.value("partisan_bias", p.partisan_bias);
  p.pass_attention = j.value("pass_attention", p.pass_attention);
  p.validate();
}

/// Which policy an agent follows: a per-arm override if present, otherwise a
/// weighted draw from the mix.
struct PolicyMix {
  std::vector<std::pair<AgentPolicy, double>> mix = {{AgentPolicy{}, 1.0}};
  std::map<InterventionArm, AgentPolicy> per_arm;

  const AgentPolicy& pick(InterventionArm arm, Rng& rng) const {
    if (auto it = per_arm.find(arm); it != per_arm.end()) return it->second;
    std::vector<double> w;
    for (const auto& [p, weight] : mix) w.push_back(weight);
    return mix[rng.weighted(w)].first;
  }

  void validate() const {
    if (mix.empty()) throw Error(ErrorCode::ConfigError, "policy mix is empty");
    for (const auto& [p, w] : mix) {
      if (!(w > 0)) throw Error(ErrorCode::ConfigError, "policy weights must be positive");
      p.validate();
    }
    for (const auto& [arm, p] : per_arm) p.validate();
  }

  /// {"default": {...}, "arms": {"LabelOnly": {...}}, "mix": [{"weight": 1, "policy": {...}}]}
  static PolicyMix from_json(const json& j) {
    PolicyMix m;
    try {
      if (j.contains("mix")) {
        m.mix.clear();
        for (const auto& item : j.at("mix"))
          m.mix.emplace_back(item.at("policy").get<AgentPolicy>(), item.value("weight", 1.0));
      } else if (j.contains("default")) {
        m.mix = {{j.at("default").get<AgentPolicy>(), 1.0}};
      } else if (!j.contains("arms")) {
        m.mix = {{j.get<AgentPolicy>(), 1.0}};
      }
      if (j.contains("arms"))
        for (const auto& [name, p] : j.at("arms").items())
          m.per_arm[parse_arm(name)] = p.get<AgentPolicy>();
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ConfigError, std::string("policy: ") + e.what());
    }
    m.validate();
    return m;
  }
};

// ---------------------------------------------------------------------------
// One agent

namespace detail {

template <typename E, std::size_t N>
E draw_enum(const EnumNames<E, N>& names, Rng& rng) {
  return names.entries[rng.index(N)].first;
}

template <typename E, std::size_t N>
E other_value(const EnumNames<E, N>& names, E current, Rng& rng) {
  for (;;) {
    const E v = draw_enum(names, rng);
    if (v != current) return v;
  }
}

inline AgeBracket other_age(const AgeBracket& current, Rng& rng) {
  const auto& all = default_age_brackets();
  for (;;) {
    AgeBracket b{all[rng.index(all.size())]};
    if (b != current) return b;
  }
}

inline AttributeSet random_profile(Rng& rng) {
  AttributeSet a;
  a.politics = draw_enum(kPoliticsNames, rng);
  a.race = draw_enum(kRaceNames, rng);
  a.education = draw_enum(kEducationNames, rng);
  a.gender = draw_enum(kGenderNames, rng);
  const auto& ages = default_age_brackets();
  a.age = AgeBracket{ages[rng.index(ages.size())]};
  return a;
}

/// A self-report that agrees with `audience` on exactly min(k, |audience|)
/// of the audience's attributes; the rest differ. Attributes outside the
/// audience are random.
inline AttributeSet profile_matching(const AttributeSet& audience, int k, Rng& rng) {
  AttributeSet self = random_profile(rng);
  std::vector<int> present;
  if (audience.politics) present.push_back(0);
  if (audience.race) present.push_back(1);
  if (audience.education) present.push_back(2);
  if (audience.gender) present.push_back(3);
  if (audience.age) present.push_back(4);
  for (std::size_t i = present.size(); i > 1; --i) std::swap(present[i - 1], present[rng.index(i)]);
  for (std::size_t i = 0; i < present.size(); ++i) {
    const bool match = int(i) < k;
    switch (present[i]) {
      case 0: self.politics = match ? *audience.politics : other_value(kPoliticsNames, *audience.politics, rng); break;
      case 1: self.race = match ? *audience.race : other_value(kRaceNames, *audience.race, rng); break;
      case 2: self.education = match ? *audience.education : other_value(kEducationNames, *audience.education, rng); break;
      case 3: self.gender = match ? *audience.gender : other_value(kGenderNames, *audience.gender, rng); break;
      case 4: self.age = match ? *audience.age : other_age(*audience.age, rng); break;
    }
  }
  return self;
}

inline Judgment opposite(Judgment j) { return j == Judgment::True ? Judgment::False : Judgment::True; }

inline std::string score_key(const AlignmentScore& s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "score=%.2f", s.value());
  return buf;
}

}  // namespace detail

struct AgentOutcome {
  std::string user_id;
  std::string session_id;
  InterventionArm arm = InterventionArm::Control;
  bool disqualified = false;
  bool completed = false;
};

/// Plays one full session. The reference table, when given, supplies random
/// survey answers and the audience used for target_matches.
inline AgentOutcome run_agent(ParticipantApi& api, const std::string& user_id,
                              const PolicyMix& policies, const ExperimentConfig& config, Rng rng,
                              const ReferenceTable* table = nullptr) {
  AgentOutcome out;
  out.user_id = user_id;
  const auto created = api.create_session(user_id);
  out.session_id = created.session_id;
  out.arm = created.arm;
  const auto& policy = policies.pick(created.arm, rng);
  const auto& sid = created.session_id;

  api.accept_consent(sid);
  api.complete_instructions(sid);

  QuestionnaireSubmission q;
  q.survey_answers = policy.survey_answers;
  if (q.survey_answers.empty() && table)
    for (const auto& [qid, answers] : table->questions())
      q.survey_answers.push_back({qid, answers[rng.index(answers.size())]});
  if (policy.target_matches && table && !q.survey_answers.empty())
    q.self_reported = detail::profile_matching(infer_attributes(q.survey_answers, *table).attrs,
                                               *policy.target_matches, rng);
  else
    q.self_reported = policy.profile ? *policy.profile : detail::random_profile(rng);
  const auto [want_min, want_feed] = config.attention_answers();
  q.attention_min_interactions = std::to_string(policy.pass_attention ? want_min : want_min + 1);
  q.attention_feed_size = std::to_string(want_feed);
  if (!api.submit_questionnaire(sid, q)) {
    out.disqualified = true;
    return out;
  }

  const bool partisan = q.self_reported.politics && *q.self_reported.politics != Politics::Moderate;
  std::set<std::string> reacted;
  auto react = [&](const Claim& c, Judgment belief) {
    const std::pair<EventKind, const ReactionBias*> kinds[] = {
        {EventKind::Like, &policy.like}, {EventKind::Share, &policy.share}, {EventKind::Flag, &policy.flag}};
    for (const auto& [kind, bias] : kinds)
      if (rng.bernoulli(bias->for_belief(belief))) {
        api.record_event(sid, {c.id, kind, {}, std::nullopt});
        reacted.insert(c.id);
      }
  };

  const auto claims = api.feed(sid);
  for (const auto& c : claims) {
    const Judgment truth = judgment_of(c.veracity);
    double acc = policy.base_accuracy;
    if (partisan && c.topic == Topic::Political) acc = std::max(0.0, acc - policy.partisan_bias);
    Judgment belief = truth;
    if (!rng.bernoulli(acc))
      belief = rng.bernoulli(policy.uncertain_prob) ? Judgment::Uncertain : detail::opposite(truth);
    react(c, belief);
    if (!rng.bernoulli(policy.open_prob)) continue;

    api.intervention_step1(sid, c.id);
    api.record_event(sid, {c.id, EventKind::VeracityJudgment,
                           EventPayload{belief, std::nullopt, std::nullopt, std::nullopt},
                           Phase::Pre});
    const auto step2 = api.intervention_step2(sid, c.id);
    if (step2.label && rng.bernoulli(policy.adoption_prob)) belief = judgment_of(*step2.label);
    api.record_event(sid, {c.id, EventKind::VeracityJudgment,
                           EventPayload{belief, std::nullopt, std::nullopt, std::nullopt},
                           Phase::Post});
    if (step2.asks_helpfulness) {
      std::vector<std::string> keys;
      if (step2.audience && !step2.audience->empty()) {
        const auto score = alignment_score(q.self_reported, *step2.audience);
        keys = {detail::score_key(score),
                std::string(to_string(classify_alignment(score, config.alignment_threshold)))};
      } else {
        keys = {"non-personalized"};
      }
      keys.push_back("default");
      const Likert* weights = nullptr;
      for (const auto& k : keys)
        if (auto it = policy.helpfulness.find(k); it != policy.helpfulness.end()) {
          weights = &it->second;
          break;
        }
      if (weights) {
        const int rating = 1 + int(rng.weighted({weights->begin(), weights->end()}));
        api.record_event(sid, {c.id, EventKind::HelpfulnessRating,
                               EventPayload{std::nullopt, rating, std::nullopt, std::nullopt},
                               Phase::Post});
      }
    }
    react(c, belief);
  }

  // Top up to the completion minimum, as a participant must before submitting.
  for (const auto& c : claims) {
    if (int(reacted.size()) >= config.min_interactions) break;
    if (reacted.contains(c.id)) continue;
    api.record_event(sid, {c.id, EventKind::Like, {}, std::nullopt});
    reacted.insert(c.id);
  }
  out.completed = api.submit(sid).accepted;
  return out;
}

// ---------------------------------------------------------------------------
// Cohorts

struct CohortOptions {
  int agents = 100;
  std::uint64_t seed = 0;
  int parallel = 1;  // concurrent sessions; log order is deterministic only at 1
  std::string user_prefix = "agent";
  std::shared_ptr<const ReferenceTable> table;
};

struct CohortResult {
  std::vector<AgentOutcome> agents;  // agent order
  std::map<InterventionArm, int> per_arm;
  int completed = 0;
  int disqualified = 0;
};

/// Agent i draws from its own stream of the cohort seed, so its choices do
/// not depend on scheduling.
inline CohortResult run_cohort(ParticipantApi* api, const PolicyMix& policies,
                               const ExperimentConfig& config, const CohortOptions& opt) {
  if (!api) throw Error(ErrorCode::EngineUnavailable, "no participant API");
  policies.validate();
  CohortResult result;
  result.agents.resize(std::size_t(std::max(0, opt.agents)));
  constexpr std::uint64_t kAgentStreams = std::uint64_t{1} << 62;
  auto play = [&](std::size_t i) {
    char uid[96];
    std::snprintf(uid, sizeof uid, "%s-%06zu", opt.user_prefix.c_str(), i);
    result.agents[i] = run_agent(*api, uid, policies, config,
                                 Rng::stream(opt.seed, kAgentStreams + i), opt.table.get());
  };
  if (opt.parallel <= 1) {
    for (std::size_t i = 0; i < result.agents.size(); ++i) play(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr error;
    std::vector<std::jthread> workers;
    for (int w = 0; w < opt.parallel; ++w)
      workers.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < result.agents.size();) {
          try {
            play(i);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
            next = result.agents.size();
          }
        }
      });
    workers.clear();
    if (error) std::rethrow_exception(error);
  }
  for (const auto& a : result.agents) {
    ++result.per_arm[a.arm];
    result.completed += a.completed;
    result.disqualified += a.disqualified;
  }
  return result;
}

/// Policy for alignment-sensitive helpfulness runs: agents self-report
/// profiles agreeing with their inferred audience on `matches` attributes
/// and rate helpfulness from the given per-band weights.
inline AgentPolicy alignment_policy(int matches, std::map<std::string, Likert> helpfulness,
                                    AgentPolicy base = {}) {
  base.target_matches = matches;
  base.helpfulness = std::move(helpfulness);
  base.open_prob = 1.0;
  base.validate();
  return base;
}

}  // namespace misinfo
