#pragma once

// Participant sessions: arm assignment, feed sampling, attention checks, the
// two-step intervention pop-up, completion gating and spam filtering.

#include <algorithm>
#include <atomic>
#include <cctype>
#include <charconv>
#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "misinfo/config.hpp"
#include "misinfo/dataset.hpp"
#include "misinfo/event_store.hpp"
#include "misinfo/interventions.hpp"
#include "misinfo/personalization.hpp"
#include "misinfo/rng.hpp"

namespace misinfo {

// ---------------------------------------------------------------------------
// Randomization

inline InterventionArm assign_arm(const ExperimentConfig& config, Rng& rng) {
  std::vector<double> weights;
  weights.reserve(config.arms.size());
  for (const auto& [arm, w] : config.arms) weights.push_back(w);
  return config.arms[rng.weighted(weights)].first;
}

namespace detail {

inline std::vector<std::size_t> draw_without_replacement(std::vector<std::size_t> pool,
                                                         std::size_t k, Rng& rng) {
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + rng.index(pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

}  // namespace detail

/// Distinct claims, uniformly without replacement. With balance_feed the
/// true/false split is floor(k/2)/ceil(k/2) in random orientation.
inline std::vector<std::string> sample_feed(const Dataset& data, const ExperimentConfig& config,
                                            Rng& rng) {
  const auto k = std::size_t(config.feed_size);
  if (k > data.size())
    throw Error(ErrorCode::DatasetTooSmall, "feed of " + std::to_string(k) + " from " +
                                                std::to_string(data.size()) + " claims");
  std::vector<std::size_t> chosen;
  if (!config.balance_feed) {
    std::vector<std::size_t> all(data.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    chosen = detail::draw_without_replacement(std::move(all), k, rng);
  } else {
    std::vector<std::size_t> trues, falses;
    for (std::size_t i = 0; i < data.size(); ++i)
      (data.claims()[i].veracity == Veracity::True ? trues : falses).push_back(i);
    std::size_t n_true = k / 2;
    if (k % 2 == 1 && rng.bernoulli(0.5)) ++n_true;
    const std::size_t n_false = k - n_true;
    if (n_true > trues.size() || n_false > falses.size())
      throw Error(ErrorCode::DatasetTooSmall, "not enough true/false claims for a balanced feed");
    chosen = detail::draw_without_replacement(std::move(trues), n_true, rng);
    auto f = detail::draw_without_replacement(std::move(falses), n_false, rng);
    chosen.insert(chosen.end(), f.begin(), f.end());
    // Interleave so position does not reveal veracity.
    for (std::size_t i = chosen.size(); i > 1; --i) std::swap(chosen[i - 1], chosen[rng.index(i)]);
  }
  std::vector<std::string> ids;
  ids.reserve(chosen.size());
  for (auto i : chosen) ids.push_back(data.claims()[i].id);
  return ids;
}

// ---------------------------------------------------------------------------
// Attention checks

namespace detail {

inline std::optional<int> parse_count(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  int value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

}  // namespace detail

/// Answers are free text ("3", " 5 "); they pass iff they equal
/// (min_interactions, feed_size) numerically.
inline bool check_attention(std::string_view min_answer, std::string_view feed_answer,
                            const ExperimentConfig& config) {
  const auto [want_min, want_feed] = config.attention_answers();
  return detail::parse_count(min_answer) == want_min &&
         detail::parse_count(feed_answer) == want_feed;
}

inline bool check_attention(int min_answer, int feed_answer, const ExperimentConfig& config) {
  return std::make_pair(min_answer, feed_answer) == config.attention_answers();
}

// ---------------------------------------------------------------------------
// Intervention provisioning

/// Renders the intervention for (arm, claim) in the oracle setting: the label
/// shown is always the claim's ground truth.
class InterventionProvider {
 public:
  InterventionProvider(std::shared_ptr<ExplanationGenerator> generator,
                       std::shared_ptr<const SlotProvider> slots, std::string model_id)
      : generator_(std::move(generator)), slots_(std::move(slots)), model_id_(std::move(model_id)) {}

  InterventionText build(InterventionArm arm, const Claim& claim,
                         const std::optional<AttributeSet>& attrs = std::nullopt) const {
    const auto label = claim.veracity;
    switch (arm) {
      case InterventionArm::Control: return render_control(label, claim.id);
      case InterventionArm::LabelOnly: return render_label_only(label, claim.id);
      case InterventionArm::MethodologyAI:
        return render_methodology(label, MethodologySource::AI, claim.id);
      case InterventionArm::MethodologyHuman:
        return render_methodology(label, MethodologySource::Human, claim.id);
      case InterventionArm::ReactionFrame:
        if (!slots_) throw Error(ErrorCode::MissingSlots, "no reaction-frame slot provider");
        return render_reaction_frame(claim, label, *slots_);
      case InterventionArm::LLMZeroShot:
        return require_generator().generate(build_zero_shot_prompt(claim, label, model_id_));
      case InterventionArm::LLMPersonalized:
        if (!attrs) throw Error(ErrorCode::EmptyAttributes, "personalized arm needs attributes");
        return require_generator().generate(
            build_personalized_prompt(claim, label, *attrs, model_id_));
    }
    throw Error(ErrorCode::ConfigError, "unhandled arm");
  }

  ExplanationGenerator* generator() const { return generator_.get(); }

 private:
  ExplanationGenerator& require_generator() const {
    if (!generator_) throw Error(ErrorCode::ProviderError, "no explanation generator configured");
    return *generator_;
  }

  std::shared_ptr<ExplanationGenerator> generator_;
  std::shared_ptr<const SlotProvider> slots_;
  std::string model_id_;
};

// ---------------------------------------------------------------------------
// Sessions

struct ClaimFlags {
  bool intervention_opened = false;
  bool pre_judged = false;
  bool post_judged = false;
};

struct SessionState {
  SessionRecord record;
  SessionValidationState validation;
  std::map<std::string, ClaimFlags> flags;
  std::set<std::string> reacted;  // distinct claims with a like/share/flag

  const std::string& session_id() const { return record.session_id; }
  Stage stage() const { return record.stage; }
  int interaction_count() const { return int(reacted.size()); }

  void apply(const InteractionEvent& e) {
    validation.apply(e);
    auto& f = flags[e.claim_id];
    switch (e.kind) {
      case EventKind::OpenIntervention: f.intervention_opened = true; break;
      case EventKind::VeracityJudgment:
        (e.phase == Phase::Pre ? f.pre_judged : f.post_judged) = true;
        break;
      case EventKind::Like:
      case EventKind::Share:
      case EventKind::Flag: reacted.insert(e.claim_id); break;
      default: break;
    }
  }
};

struct CompletionResult {
  bool accepted = false;
  int distinct_interactions = 0;
  int required = 0;
};

/// Accept iff like/share/flag events cover at least min_interactions distinct
/// claims. Opening an intervention does not count.
inline CompletionResult enforce_completion(const SessionState& session,
                                           const ExperimentConfig& config) {
  return {session.interaction_count() >= config.min_interactions, session.interaction_count(),
          config.min_interactions};
}

struct EventInput {
  std::string claim_id;
  EventKind kind = EventKind::Like;
  EventPayload payload;
  std::optional<Phase> phase;  // derived by the engine; checked when supplied
};

struct QuestionnaireSubmission {
  AttributeSet self_reported;
  std::vector<SurveyAnswer> survey_answers;
  std::string attention_min_interactions;
  std::string attention_feed_size;
};

struct Step1View {
  std::string claim_id;
  std::string question = "Do you think this claim is true, false, or are you uncertain?";
  std::vector<std::string> options = {"True", "False", "Uncertain"};
};

struct Step2View {
  std::string claim_id;
  InterventionArm arm = InterventionArm::Control;
  std::optional<Veracity> label;
  std::string explanation;  // empty for Control
  bool asks_helpfulness = false;
  std::optional<AttributeSet> audience;  // attributes a personalized text targeted
  std::string question = Step1View{}.question;
};

struct CreatedSession {
  std::string session_id;
  InterventionArm arm;
  std::vector<std::string> feed;
};

using Clock = std::function<std::int64_t()>;

inline Clock system_clock_ms() {
  return [] {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
  };
}

/// Monotone counter clock for reproducible logs.
inline Clock logical_clock(std::int64_t start = 1) {
  auto counter = std::make_shared<std::atomic<std::int64_t>>(start);
  return [counter] { return counter->fetch_add(1); };
}

/// Runs sessions for one experiment. Sessions progress independently; all
/// mutations of a single session are serialized by that session's mutex and
/// persisted before the call returns.
class ExperimentEngine {
 public:
  ExperimentEngine(ExperimentConfig config, std::shared_ptr<const Dataset> data,
                   std::shared_ptr<InterventionProvider> interventions,
                   std::shared_ptr<EventStore> store, Clock clock = {},
                   std::shared_ptr<const ReferenceTable> table = nullptr)
      : config_(std::move(config)),
        data_(std::move(data)),
        interventions_(std::move(interventions)),
        store_(std::move(store)),
        table_(std::move(table)) {
    config_.validate();
    if (std::size_t(config_.feed_size) > data_->size())
      throw Error(ErrorCode::DatasetTooSmall, "feed_size exceeds the dataset");
    if (config_.has_arm(InterventionArm::LLMPersonalized) && !table_)
      throw Error(ErrorCode::ConfigError, "LLMPersonalized requires a reference table");
    auto snapshot = store_ ? store_->recover() : LogSnapshot{};
    std::int64_t max_ts = 0;
    for (auto& [sid, rec] : snapshot.sessions) {
      auto st = std::make_unique<Slot>();
      st->state.record = rec;
      st->state.validation.feed = {rec.feed.begin(), rec.feed.end()};
      user_arms_.emplace(rec.user_id, rec.arm);
      max_ts = std::max(max_ts, rec.created_at);
      sessions_.emplace(sid, std::move(st));
    }
    std::map<std::string, std::vector<InteractionEvent>> per_session;
    for (auto& e : snapshot.events) per_session[e.session_id].push_back(std::move(e));
    for (auto& [sid, events] : per_session) {
      std::sort(events.begin(), events.end(),
                [](const auto& a, const auto& b) { return a.seq < b.seq; });
      auto& st = sessions_.at(sid)->state;
      for (const auto& e : events) {
        st.apply(e);
        max_ts = std::max(max_ts, e.timestamp);
      }
    }
    for (const auto& [sid, slot] : sessions_)
      if (sid.size() > 1 && sid[0] == 's')
        if (auto n = detail::parse_count(std::string_view(sid).substr(1)))
          session_counter_ = std::max<std::int64_t>(session_counter_, *n + 1);
    clock_ = clock ? std::move(clock)
                   : (config_.logical_clock ? logical_clock(max_ts + 1) : system_clock_ms());
  }

  const ExperimentConfig& config() const { return config_; }
  const Dataset& dataset() const { return *data_; }

  CreatedSession create_session(const std::string& user_id) {
    auto slot = std::make_unique<Slot>();
    auto& rec = slot->state.record;
    {
      std::unique_lock lock(map_mutex_);
      const std::int64_t n = session_counter_++;
      char id[32];
      std::snprintf(id, sizeof id, "s%06lld", static_cast<long long>(n));
      Rng rng = Rng::stream(config_.seed, std::uint64_t(n));
      const InterventionArm drawn = assign_arm(config_, rng);
      // A returning participant keeps the arm of their first session.
      auto [it, inserted] = user_arms_.emplace(user_id, drawn);
      rec.session_id = id;
      rec.user_id = user_id;
      rec.arm = it->second;
      rec.feed = sample_feed(*data_, config_, rng);
      rec.trial = config_.trial;
      rec.created_at = clock_();
    }
    slot->state.validation.feed = {rec.feed.begin(), rec.feed.end()};

    // Non-personalized interventions are rendered up front so the pop-up never
    // waits on generation.
    if (rec.arm != InterventionArm::LLMPersonalized)
      for (const auto& cid : rec.feed)
        rec.interventions.emplace(cid, interventions_->build(rec.arm, data_->at(cid)));

    std::unique_lock lock(map_mutex_);
    persist(session_created_json(rec));
    if (!rec.interventions.empty()) persist(interventions_json(rec));
    CreatedSession out{rec.session_id, rec.arm, rec.feed};
    sessions_.emplace(rec.session_id, std::move(slot));
    return out;
  }

  void accept_consent(const std::string& sid) {
    with_session(sid, [&](SessionState& s) {
      require_stage(s, Stage::Consent);
      set_stage(s, Stage::Instructions);
    });
  }

  void complete_instructions(const std::string& sid) {
    with_session(sid, [&](SessionState& s) {
      require_stage(s, Stage::Instructions);
      set_stage(s, Stage::Questionnaire);
    });
  }

  /// Records the questionnaire; returns whether the attention checks passed.
  bool submit_questionnaire(const std::string& sid, const QuestionnaireSubmission& q) {
    return with_session(sid, [&](SessionState& s) {
      require_stage(s, Stage::Questionnaire);
      for (const auto& a : q.survey_answers)
        append(s, {"", EventKind::QuestionnaireAnswer,
                   EventPayload{std::nullopt, std::nullopt, a.question_id, a.answer_id}, {}});
      append(s, {"", EventKind::AttentionCheckAnswer,
                 EventPayload{std::nullopt, std::nullopt, "min_interactions",
                              q.attention_min_interactions},
                 {}});
      append(s, {"", EventKind::AttentionCheckAnswer,
                 EventPayload{std::nullopt, std::nullopt, "feed_size", q.attention_feed_size},
                 {}});
      const bool passed =
          check_attention(q.attention_min_interactions, q.attention_feed_size, config_);

      UserProfile profile{s.record.user_id, q.self_reported, std::nullopt, q.survey_answers};
      if (passed && s.record.arm == InterventionArm::LLMPersonalized) {
        auto inferred = infer_attributes(q.survey_answers, *table_);
        profile.inferred = inferred.attrs;
        for (const auto& cid : s.record.feed)
          s.record.interventions.insert_or_assign(
              cid, interventions_->build(s.record.arm, data_->at(cid), profile.inferred));
      }
      s.record.profile = profile;
      s.record.attention = {q.attention_min_interactions, q.attention_feed_size};
      s.record.attention_passed = passed;
      persist(json{{"type", "questionnaire"},
                   {"session_id", s.record.session_id},
                   {"profile", profile},
                   {"attention", {q.attention_min_interactions, q.attention_feed_size}},
                   {"passed", passed}});
      if (passed && s.record.arm == InterventionArm::LLMPersonalized)
        persist(interventions_json(s.record));
      set_stage(s, passed ? Stage::Feed : Stage::Disqualified);
      return passed;
    });
  }

  std::vector<Claim> feed(const std::string& sid) {
    return with_session(sid, [&](SessionState& s) {
      if (s.record.stage != Stage::Done) require_stage(s, Stage::Feed);
      std::vector<Claim> out;
      for (const auto& cid : s.record.feed) out.push_back(data_->at(cid));
      return out;
    });
  }

  /// Records a reaction, judgment or rating. The phase is Post once the
  /// claim's intervention has been opened, Pre before.
  InteractionEvent record_event(const std::string& sid, const EventInput& input) {
    return with_session(sid, [&](SessionState& s) {
      require_stage(s, Stage::Feed);
      if (input.kind == EventKind::OpenIntervention || input.kind == EventKind::QuestionnaireAnswer ||
          input.kind == EventKind::AttentionCheckAnswer)
        throw Error(ErrorCode::StageViolation, std::string(to_string(input.kind)) +
                                                   " is recorded by its own endpoint");
      if (input.kind == EventKind::HelpfulnessRating && s.record.arm == InterventionArm::Control)
        throw Error(ErrorCode::StageViolation, "the control pop-up collects no helpfulness rating");
      return append(s, input);
    });
  }

  Step1View intervention_step1(const std::string& sid, const std::string& claim_id) {
    return with_session(sid, [&](SessionState& s) {
      require_stage(s, Stage::Feed);
      require_claim(s, claim_id);
      return Step1View{claim_id};
    });
  }

  /// Reveals the intervention; requires the pre-intervention judgment.
  Step2View intervention_step2(const std::string& sid, const std::string& claim_id) {
    return with_session(sid, [&](SessionState& s) {
      require_stage(s, Stage::Feed);
      require_claim(s, claim_id);
      if (!s.flags[claim_id].pre_judged)
        throw Error(ErrorCode::PhaseViolation,
                    "step 2 requested before the step 1 judgment for '" + claim_id + "'");
      append(s, {claim_id, EventKind::OpenIntervention, {}, {}});
      Step2View v;
      v.claim_id = claim_id;
      v.arm = s.record.arm;
      if (s.record.arm != InterventionArm::Control) {
        const auto& t = s.record.interventions.at(claim_id);
        v.label = t.label_shown;
        v.explanation = t.explanation;
        v.asks_helpfulness = true;
        v.audience = t.generation_attrs;
      }
      return v;
    });
  }

  CompletionResult submit(const std::string& sid) {
    return with_session(sid, [&](SessionState& s) {
      require_stage(s, Stage::Feed);
      auto result = enforce_completion(s, config_);
      if (result.accepted) set_stage(s, Stage::Done);
      return result;
    });
  }

  SessionState session(const std::string& sid) {
    return with_session(sid, [](SessionState& s) { return s; });
  }

  std::vector<std::string> session_ids() const {
    std::shared_lock lock(map_mutex_);
    std::vector<std::string> ids;
    for (const auto& [sid, slot] : sessions_) ids.push_back(sid);
    return ids;
  }

  /// Sessions and Done sessions per arm.
  std::map<InterventionArm, std::pair<int, int>> live_counts() const {
    std::shared_lock lock(map_mutex_);
    std::map<InterventionArm, std::pair<int, int>> out;
    for (const auto& [sid, slot] : sessions_) {
      std::lock_guard slock(slot->mutex);
      auto& c = out[slot->state.record.arm];
      ++c.first;
      if (slot->state.record.stage == Stage::Done) ++c.second;
    }
    return out;
  }

  void sync() {
    if (store_) store_->sync();
  }

 private:
  struct Slot {
    std::mutex mutex;
    SessionState state;
  };

  template <typename Fn>
  auto with_session(const std::string& sid, Fn&& fn) -> std::invoke_result_t<Fn, SessionState&> {
    Slot* slot = nullptr;
    {
      std::shared_lock lock(map_mutex_);
      auto it = sessions_.find(sid);
      if (it == sessions_.end())
        throw Error(ErrorCode::UnknownSession, "unknown session '" + sid + "'");
      slot = it->second.get();
    }
    std::lock_guard lock(slot->mutex);
    return fn(slot->state);
  }

  static void require_stage(const SessionState& s, Stage want) {
    if (s.record.stage != want)
      throw Error(ErrorCode::StageViolation, "session is in stage " +
                                                 std::string(to_string(s.record.stage)) +
                                                 ", expected " + std::string(to_string(want)));
  }

  static void require_claim(const SessionState& s, const std::string& claim_id) {
    if (!s.validation.feed.contains(claim_id))
      throw Error(ErrorCode::UnknownClaim, "claim '" + claim_id + "' is not in this feed");
  }

  InteractionEvent append(SessionState& s, const EventInput& input) {
    InteractionEvent e;
    e.seq = s.validation.last_seq + 1;
    e.session_id = s.record.session_id;
    e.claim_id = input.claim_id;
    e.kind = input.kind;
    e.payload = input.payload;
    e.phase = s.validation.opened.contains(input.claim_id) ? Phase::Post : Phase::Pre;
    if (input.phase && *input.phase != e.phase)
      throw Error(ErrorCode::PhaseViolation,
                  std::string("event declared ") + std::string(to_string(*input.phase)) +
                      " but the intervention is " +
                      (e.phase == Phase::Post ? "already open" : "not open"));
    check_payload(e);
    if (auto v = validate_event(e, s.validation); !v) throw Error(*v.code, v.reason);
    e.timestamp = clock_();
    if (store_) store_->append_event(e);
    s.apply(e);
    return e;
  }

  void set_stage(SessionState& s, Stage stage) {
    s.record.stage = stage;
    persist(json{{"type", "stage"},
                 {"session_id", s.record.session_id},
                 {"stage", to_string(stage)}});
  }

  void persist(const json& record) {
    if (store_) store_->append_session(record);
  }

  static json interventions_json(const SessionRecord& rec) {
    json items = json::array();
    for (const auto& cid : rec.feed)
      if (auto it = rec.interventions.find(cid); it != rec.interventions.end())
        items.push_back(it->second);
    return json{{"type", "interventions"}, {"session_id", rec.session_id}, {"items", items}};
  }

  ExperimentConfig config_;
  std::shared_ptr<const Dataset> data_;
  std::shared_ptr<InterventionProvider> interventions_;
  std::shared_ptr<EventStore> store_;
  std::shared_ptr<const ReferenceTable> table_;
  Clock clock_;

  mutable std::shared_mutex map_mutex_;
  std::map<std::string, std::unique_ptr<Slot>> sessions_;
  std::map<std::string, InterventionArm> user_arms_;
  std::int64_t session_counter_ = 0;
};

// ---------------------------------------------------------------------------
// Quality control over a finished corpus

struct ExclusionReport {
  std::set<std::string> attention_failures;
  std::set<std::string> sub_minimum;
  std::set<std::string> constant_labelers;

  std::set<std::string> all() const {
    std::set<std::string> out = attention_failures;
    out.insert(sub_minimum.begin(), sub_minimum.end());
    out.insert(constant_labelers.begin(), constant_labelers.end());
    return out;
  }
};

/// Users to drop from analysis:
///  - any session failed the attention checks;
///  - any session reached the feed but reacted to fewer than min_interactions
///    distinct claims;
///  - more than `spam_session_threshold` completed sessions whose veracity
///    judgments are all the same value.
inline ExclusionReport filter_spammers(const LogSnapshot& logs, const ExperimentConfig& config,
                                       int spam_session_threshold = 10) {
  ExclusionReport out;
  std::map<std::string, std::set<std::string>> reacted;
  std::map<std::string, std::set<Judgment>> judgments_by_user;
  for (const auto& e : logs.events) {
    const auto& rec = logs.sessions.at(e.session_id);
    if (is_reaction(e.kind)) reacted[e.session_id].insert(e.claim_id);
    if (e.kind == EventKind::VeracityJudgment && rec.stage == Stage::Done)
      judgments_by_user[rec.user_id].insert(*e.payload.judgment);
  }
  std::map<std::string, int> completed;
  for (const auto& [sid, rec] : logs.sessions) {
    if (rec.stage == Stage::Disqualified || rec.attention_passed == false)
      out.attention_failures.insert(rec.user_id);
    if (rec.stage == Stage::Feed || rec.stage == Stage::Done) {
      const auto n = reacted.contains(sid) ? int(reacted.at(sid).size()) : 0;
      if (n < config.min_interactions) out.sub_minimum.insert(rec.user_id);
    }
    if (rec.stage == Stage::Done) ++completed[rec.user_id];
  }
  for (const auto& [user, n] : completed) {
    if (n <= spam_session_threshold) continue;
    auto it = judgments_by_user.find(user);
    if (it != judgments_by_user.end() && it->second.size() == 1)
      out.constant_labelers.insert(user);
  }
  return out;
}

}  // namespace misinfo
