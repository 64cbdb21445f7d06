#pragma once

// Rendering of the six intervention texts and the prompts sent to the
// completion service for the two LLM-generated arms.

#include <atomic>
#include <chrono>
#include <future>
#include <istream>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <semaphore>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "misinfo/domain.hpp"
#include "misinfo/text.hpp"

namespace misinfo {

inline constexpr int kMaxExplanationWords = 100;

namespace detail {

inline std::string_view label_word(Veracity label) {
  return label == Veracity::True ? "true" : "false";
}

inline InterventionText make_text(std::string claim_id, InterventionArm arm, Veracity label,
                                  std::string explanation) {
  InterventionText t;
  t.claim_id = std::move(claim_id);
  t.arm = arm;
  t.label_shown = label;
  t.word_count = text::word_count(explanation);
  t.explanation = std::move(explanation);
  return t;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Fixed templates

inline InterventionText render_control(Veracity label, std::string claim_id = {}) {
  return detail::make_text(std::move(claim_id), InterventionArm::Control, label, {});
}

inline InterventionText render_label_only(Veracity label, std::string claim_id = {}) {
  return detail::make_text(std::move(claim_id), InterventionArm::LabelOnly, label,
                           "This claim is " + std::string(detail::label_word(label)) + ".");
}

enum class MethodologySource { AI, Human };

inline InterventionText render_methodology(Veracity label, MethodologySource source,
                                           std::string claim_id = {}) {
  std::string s = "This claim was ";
  s += label == Veracity::True ? "verified" : "refuted";
  s += source == MethodologySource::AI
           ? " by an AI model trained on a large-scale corpus of web data."
           : " by non-partisan fact-checkers.";
  const auto arm = source == MethodologySource::AI ? InterventionArm::MethodologyAI
                                                   : InterventionArm::MethodologyHuman;
  return detail::make_text(std::move(claim_id), arm, label, std::move(s));
}

// ---------------------------------------------------------------------------
// Reaction frames

enum class Stance { Persuade, Manipulate };

inline Stance default_stance(Veracity label) {
  return label == Veracity::True ? Stance::Persuade : Stance::Manipulate;
}

struct FrameSlots {
  std::string writer_intent;
  std::string reader_action;
  Stance stance = Stance::Persuade;
};

inline InterventionText render_reaction_frame(Veracity label, const FrameSlots& slots,
                                              std::string claim_id = {}) {
  if (slots.writer_intent.empty() || slots.reader_action.empty())
    throw Error(ErrorCode::MissingSlots, "reaction frame slots are incomplete");
  std::string s = "This claim is " + std::string(detail::label_word(label)) +
                  ". This headline is trying to " +
                  (slots.stance == Stance::Persuade ? "persuade" : "manipulate") +
                  " readers by implying that " + slots.writer_intent +
                  ". It is compelling readers to " + slots.reader_action + ".";
  return detail::make_text(std::move(claim_id), InterventionArm::ReactionFrame, label,
                           std::move(s));
}

/// Supplies writer-intent / reader-action predictions per claim.
class SlotProvider {
 public:
  virtual ~SlotProvider() = default;
  virtual std::optional<FrameSlots> slots_for(const Claim& claim) const = 0;
};

/// Default provider: a table keyed by claim id, loaded from JSON of the form
/// {"<claim_id>": {"writer_intent": ..., "reader_action": ..., "stance": ...}}.
/// A missing stance falls back to the label-driven default.
class LookupSlotProvider : public SlotProvider {
 public:
  struct Entry {
    std::string writer_intent;
    std::string reader_action;
    std::optional<Stance> stance;
  };

  LookupSlotProvider() = default;
  explicit LookupSlotProvider(std::map<std::string, Entry> entries)
      : entries_(std::move(entries)) {}

  static LookupSlotProvider from_json(const json& j) {
    std::map<std::string, Entry> entries;
    for (const auto& [id, v] : j.items()) {
      Entry e{v.at("writer_intent").get<std::string>(), v.at("reader_action").get<std::string>(),
              std::nullopt};
      if (v.contains("stance")) {
        const auto s = v.at("stance").get<std::string>();
        if (s == "persuade") e.stance = Stance::Persuade;
        else if (s == "manipulate") e.stance = Stance::Manipulate;
        else throw Error(ErrorCode::ParseError, "invalid stance '" + s + "'");
      }
      entries.emplace(id, std::move(e));
    }
    return LookupSlotProvider(std::move(entries));
  }

  void set(const std::string& claim_id, Entry e) { entries_[claim_id] = std::move(e); }

  std::optional<FrameSlots> slots_for(const Claim& claim) const override {
    auto it = entries_.find(claim.id);
    if (it == entries_.end()) return std::nullopt;
    return FrameSlots{it->second.writer_intent, it->second.reader_action,
                      it->second.stance.value_or(default_stance(claim.veracity))};
  }

 private:
  std::map<std::string, Entry> entries_;
};

inline InterventionText render_reaction_frame(const Claim& claim, Veracity label,
                                              const SlotProvider& provider) {
  auto slots = provider.slots_for(claim);
  if (!slots)
    throw Error(ErrorCode::MissingSlots, "no reaction-frame slots for claim '" + claim.id + "'");
  return render_reaction_frame(label, *slots, claim.id);
}

// ---------------------------------------------------------------------------
// LLM prompts

struct PromptRequest {
  InterventionArm template_id = InterventionArm::LLMZeroShot;
  std::string filled_prompt;
  int max_words = kMaxExplanationWords;
  std::string model_id;
  std::string claim_id;
  Veracity label = Veracity::False;
  std::optional<AttributeSet> attrs;

  /// Cache identity: (claim, label, attributes, model).
  std::string cache_key() const {
    return claim_id + "\x1f" + std::string(to_string(label)) + "\x1f" +
           (attrs ? attrs->key() : std::string("none")) + "\x1f" + model_id;
  }
};

inline constexpr std::string_view kOpenQuote = "‘";
inline constexpr std::string_view kCloseQuote = "’";

inline PromptRequest build_zero_shot_prompt(const Claim& claim, Veracity label,
                                            std::string model_id = "gpt-4-0613") {
  PromptRequest r;
  r.template_id = InterventionArm::LLMZeroShot;
  r.model_id = std::move(model_id);
  r.claim_id = claim.id;
  r.label = label;
  r.filled_prompt = "Write a short explanation for why the headline ";
  r.filled_prompt += kOpenQuote;
  r.filled_prompt += claim.headline;
  r.filled_prompt += kCloseQuote;
  r.filled_prompt += " is ";
  r.filled_prompt += kOpenQuote;
  r.filled_prompt += detail::label_word(label);
  r.filled_prompt += ".";
  r.filled_prompt += kCloseQuote;
  r.filled_prompt +=
      " Do not mention that you are AI. The explanation must be less than 100 words.";
  return r;
}

namespace detail {

inline std::string_view indefinite_article(std::string_view next_word) {
  if (next_word.empty()) return "a";
  const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(next_word[0])));
  const bool vowel_sound = c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u' ||
                           next_word.starts_with("8") || next_word.starts_with("11") ||
                           next_word.starts_with("18");
  return vowel_sound ? "an" : "a";
}

/// "an uneducated, male, white, 18-29 year old reader with conservative
/// political beliefs" with absent attributes (and their connectives) elided.
inline std::string audience_clause(const AttributeSet& attrs) {
  std::vector<std::string> descriptors;
  if (attrs.education) descriptors.emplace_back(to_string(*attrs.education));
  if (attrs.gender) descriptors.emplace_back(to_string(*attrs.gender));
  if (attrs.race) descriptors.emplace_back(to_string(*attrs.race));
  if (attrs.age) descriptors.push_back(attrs.age->label + " year old");

  std::string joined;
  for (std::size_t i = 0; i < descriptors.size(); ++i) {
    if (i) joined += ", ";
    joined += descriptors[i];
  }
  std::string clause(indefinite_article(joined.empty() ? "reader" : joined));
  clause += " ";
  if (!joined.empty()) clause += joined + " ";
  clause += "reader";
  if (attrs.politics) {
    clause += " with ";
    clause += to_string(*attrs.politics);
    clause += " political beliefs";
  }
  return clause;
}

}  // namespace detail

inline PromptRequest build_personalized_prompt(const Claim& claim, Veracity label,
                                               const AttributeSet& attrs,
                                               std::string model_id = "gpt-4-0613") {
  if (attrs.empty())
    throw Error(ErrorCode::EmptyAttributes, "personalized prompt needs at least one attribute");
  PromptRequest r;
  r.template_id = InterventionArm::LLMPersonalized;
  r.model_id = std::move(model_id);
  r.claim_id = claim.id;
  r.label = label;
  r.attrs = attrs;
  r.filled_prompt = "Write a short explanation for why the headline ";
  r.filled_prompt += kOpenQuote;
  r.filled_prompt += claim.headline;
  r.filled_prompt += kCloseQuote;
  r.filled_prompt += " is ";
  r.filled_prompt += kOpenQuote;
  r.filled_prompt += detail::label_word(label);
  r.filled_prompt += kCloseQuote;
  r.filled_prompt += " that will appeal to ";
  r.filled_prompt += detail::audience_clause(attrs);
  r.filled_prompt +=
      ". Do not mention that you are AI. Do not mention the type of reader. The explanation "
      "must be less than 100 words.";
  return r;
}

// ---------------------------------------------------------------------------
// Completion clients and the caching generator

/// Raised by clients for network, auth and throttling failures.
class ProviderFailure : public Error {
 public:
  ProviderFailure(const std::string& message, std::optional<int> retry_after_seconds = {})
      : Error(ErrorCode::ProviderError, message,
              retry_after_seconds ? "retry_after=" + std::to_string(*retry_after_seconds) : ""),
        retry_after_(retry_after_seconds) {}
  std::optional<int> retry_after() const { return retry_after_; }

 private:
  std::optional<int> retry_after_;
};

class LlmClient {
 public:
  virtual ~LlmClient() = default;
  virtual std::string complete(const PromptRequest& request) = 0;
};

/// Deterministic in-process client. The responder sees the request and the
/// zero-based attempt number for that request.
class MockLlmClient : public LlmClient {
 public:
  using Responder = std::function<std::string(const PromptRequest&, int attempt)>;

  MockLlmClient() : responder_(default_responder) {}
  explicit MockLlmClient(Responder responder) : responder_(std::move(responder)) {}

  std::string complete(const PromptRequest& request) override {
    int attempt = 0;
    {
      std::lock_guard lock(mutex_);
      attempt = attempts_[request.cache_key()]++;
    }
    calls_.fetch_add(1);
    return responder_(request, attempt);
  }

  int calls() const { return calls_.load(); }

  static std::string default_responder(const PromptRequest& r, int) {
    const std::string label(detail::label_word(r.label));
    std::string s = "The headline is " + label + ". ";
    if (r.label == Veracity::False)
      s += "There is no credible evidence for it, and reliable news outlets have not reported "
           "anything of the kind. ";
    else
      s += "Several reliable news outlets have reported it, and official records confirm the "
           "main facts. ";
    if (r.attrs && r.attrs->education == Education::Educated)
      s += "Consequently, a careful evaluation of the available documentation substantiates this "
           "assessment.";
    else if (r.attrs)
      s += "Always check the source before you share a story like this.";
    else
      s += "Checking the original source is the best way to confirm a story.";
    return s;
  }

 private:
  Responder responder_;
  std::atomic<int> calls_{0};
  std::mutex mutex_;
  std::map<std::string, int> attempts_;
};

struct GenerationPolicy {
  int retry_limit = 2;   // extra attempts when the response is too long
  int max_in_flight = 4;
};

/// Generates explanations through an LlmClient with length retries and a
/// shared cache. Concurrent requests for the same key share one client call.
class ExplanationGenerator {
 public:
  ExplanationGenerator(std::shared_ptr<LlmClient> client, GenerationPolicy policy = {})
      : client_(std::move(client)), policy_(policy) {}

  InterventionText generate(const PromptRequest& request) {
    std::promise<InterventionText> promise;
    std::shared_future<InterventionText> future;
    bool owner = false;
    {
      std::lock_guard lock(mutex_);
      auto it = cache_.find(request.cache_key());
      if (it != cache_.end()) {
        future = it->second;
      } else {
        future = promise.get_future().share();
        cache_.emplace(request.cache_key(), future);
        owner = true;
      }
    }
    if (!owner) return future.get();
    try {
      promise.set_value(generate_uncached(request));
    } catch (...) {
      {
        std::lock_guard lock(mutex_);
        cache_.erase(request.cache_key());
      }
      promise.set_exception(std::current_exception());
    }
    return future.get();
  }

  std::vector<InterventionText> generate_batch(const std::vector<PromptRequest>& requests) {
    std::vector<std::future<InterventionText>> futures;
    std::counting_semaphore<> slots(std::max(1, policy_.max_in_flight));
    futures.reserve(requests.size());
    for (const auto& r : requests) {
      slots.acquire();
      futures.push_back(std::async(std::launch::async, [this, &r, &slots] {
        struct Release {
          std::counting_semaphore<>& s;
          ~Release() { s.release(); }
        } release{slots};
        return generate(r);
      }));
    }
    std::vector<InterventionText> out;
    out.reserve(futures.size());
    for (auto& f : futures) out.push_back(f.get());
    return out;
  }

  /// Seeds the cache, e.g. from a previous run's interventions file.
  void prime(const PromptRequest& request, InterventionText text) {
    std::promise<InterventionText> p;
    p.set_value(std::move(text));
    std::lock_guard lock(mutex_);
    cache_.insert_or_assign(request.cache_key(), p.get_future().share());
  }

  std::size_t cache_size() const {
    std::lock_guard lock(mutex_);
    return cache_.size();
  }

  const GenerationPolicy& policy() const { return policy_; }

 private:
  InterventionText generate_uncached(const PromptRequest& request) {
    std::string response;
    int words = 0;
    for (int attempt = 0; attempt <= policy_.retry_limit; ++attempt) {
      response = client_->complete(request);
      if (text::word_count(response) == 0)
        throw ProviderFailure("completion service returned an empty explanation");
      words = text::word_count(response);
      if (words < request.max_words) break;
    }
    InterventionText t;
    t.claim_id = request.claim_id;
    t.arm = request.template_id;
    t.label_shown = request.label;
    t.explanation = std::move(response);
    t.generation_attrs = request.attrs;
    t.word_count = words;
    t.over_limit = words >= request.max_words;
    return t;
  }

  std::shared_ptr<LlmClient> client_;
  GenerationPolicy policy_;
  mutable std::mutex mutex_;
  std::unordered_map<std::string, std::shared_future<InterventionText>> cache_;
};

/// One row of the batch output file.
struct GeneratedIntervention {
  PromptRequest request;
  InterventionText text;
};

inline json to_output_json(const GeneratedIntervention& g) {
  return json{{"claim_id", g.text.claim_id},
              {"arm", to_string(g.text.arm)},
              {"label", to_string(g.text.label_shown)},
              {"attrs", g.request.attrs ? json(*g.request.attrs) : json(nullptr)},
              {"model_id", g.request.model_id},
              {"prompt", g.request.filled_prompt},
              {"explanation", g.text.explanation},
              {"word_count", g.text.word_count},
              {"over_limit", g.text.over_limit}};
}

}  // namespace misinfo
