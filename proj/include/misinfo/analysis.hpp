#pragma once

// Replays experiment logs into effectiveness metrics: accuracy before and
// after interventions, false-content sharing and flagging, helpfulness,
// personalization alignment effects, and explanation-quality annotations.

#include <cstdio>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "misinfo/config.hpp"
#include "misinfo/dataset.hpp"
#include "misinfo/engine.hpp"
#include "misinfo/event_store.hpp"
#include "misinfo/personalization.hpp"
#include "misinfo/stats.hpp"

namespace misinfo {

// ---------------------------------------------------------------------------
// Prepared observations

struct JudgmentObs {
  std::string session_id;
  std::string user_id;
  std::string claim_id;
  InterventionArm arm;
  int trial = 0;
  Phase phase = Phase::Pre;
  Judgment judgment = Judgment::Uncertain;
  Veracity truth = Veracity::False;
  bool opened = false;  // intervention for this claim was opened in the session
};

/// One claim shown to one session in one phase. Pre impressions are every
/// feed claim; Post impressions are claims whose intervention was opened.
struct ImpressionObs {
  std::string session_id;
  std::string claim_id;
  InterventionArm arm;
  int trial = 0;
  Phase phase = Phase::Pre;
  Veracity truth = Veracity::False;
  bool liked = false;
  bool shared = false;
  bool flagged = false;
};

struct RatingObs {
  std::string session_id;
  std::string user_id;
  std::string claim_id;
  InterventionArm arm;
  int rating = 0;
  std::optional<AlignmentScore> alignment;  // personalized arm only
};

/// Deduplicated observations for analysis: latest judgment per
/// (session, claim, phase) and latest rating per (session, claim), after
/// removing disqualified sessions and excluded users.
struct AnalysisData {
  std::vector<JudgmentObs> judgments;
  std::vector<ImpressionObs> impressions;
  std::vector<RatingObs> ratings;
  std::map<std::string, SessionRecord> sessions;  // included sessions only
  ExclusionReport exclusions;
  std::shared_ptr<const Dataset> claims;
};

inline AnalysisData prepare_analysis(const LogSnapshot& logs, std::shared_ptr<const Dataset> data,
                                     const ExperimentConfig& config, bool apply_qc = true) {
  AnalysisData out;
  out.claims = data;
  if (apply_qc) out.exclusions = filter_spammers(logs, config);
  const auto excluded = out.exclusions.all();
  for (const auto& [sid, rec] : logs.sessions) {
    if (rec.stage == Stage::Disqualified || excluded.contains(rec.user_id)) continue;
    if (rec.stage != Stage::Feed && rec.stage != Stage::Done) continue;
    out.sessions.emplace(sid, rec);
  }

  std::vector<const InteractionEvent*> events;
  for (const auto& e : logs.events)
    if (out.sessions.contains(e.session_id)) events.push_back(&e);
  std::sort(events.begin(), events.end(), [](auto* a, auto* b) {
    return std::tie(a->session_id, a->seq) < std::tie(b->session_id, b->seq);
  });

  using Key = std::tuple<std::string, std::string, Phase>;
  std::map<Key, Judgment> latest_judgment;
  std::map<std::pair<std::string, std::string>, int> latest_rating;
  std::map<Key, ImpressionObs> impressions;
  std::set<std::pair<std::string, std::string>> opened;

  for (const auto& [sid, rec] : out.sessions)
    for (const auto& cid : rec.feed) {
      ImpressionObs imp{sid, cid, rec.arm, rec.trial, Phase::Pre, data->at(cid).veracity};
      impressions.emplace(Key{sid, cid, Phase::Pre}, imp);
    }

  for (const auto* e : events) {
    const auto& rec = out.sessions.at(e->session_id);
    switch (e->kind) {
      case EventKind::VeracityJudgment:
        latest_judgment[Key{e->session_id, e->claim_id, e->phase}] = *e->payload.judgment;
        break;
      case EventKind::HelpfulnessRating:
        latest_rating[{e->session_id, e->claim_id}] = *e->payload.helpfulness;
        break;
      case EventKind::OpenIntervention: {
        opened.insert({e->session_id, e->claim_id});
        ImpressionObs imp{e->session_id, e->claim_id, rec.arm, rec.trial, Phase::Post,
                          data->at(e->claim_id).veracity};
        impressions.emplace(Key{e->session_id, e->claim_id, Phase::Post}, imp);
        break;
      }
      case EventKind::Like:
      case EventKind::Share:
      case EventKind::Flag: {
        auto& imp = impressions.at(Key{e->session_id, e->claim_id, e->phase});
        if (e->kind == EventKind::Like) imp.liked = true;
        if (e->kind == EventKind::Share) imp.shared = true;
        if (e->kind == EventKind::Flag) imp.flagged = true;
        break;
      }
      default:
        break;
    }
  }

  for (const auto& [key, j] : latest_judgment) {
    const auto& [sid, cid, phase] = key;
    const auto& rec = out.sessions.at(sid);
    out.judgments.push_back({sid, rec.user_id, cid, rec.arm, rec.trial, phase, j,
                             data->at(cid).veracity, opened.contains({sid, cid})});
  }
  for (const auto& [key, imp] : impressions) out.impressions.push_back(imp);
  for (const auto& [key, rating] : latest_rating) {
    const auto& rec = out.sessions.at(key.first);
    RatingObs r{key.first, rec.user_id, key.second, rec.arm, rating, std::nullopt};
    if (auto it = rec.interventions.find(key.second);
        it != rec.interventions.end() && it->second.generation_attrs && rec.profile)
      r.alignment = alignment_score(rec.profile->self_reported, *it->second.generation_attrs);
    out.ratings.push_back(r);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Accuracy

enum class UncertainMode { Incorrect, Exclude };
enum class PreSelection { AllPre, OpenedOnly };

struct ClaimFilter {
  std::function<bool(const Claim&)> predicate;  // empty = all claims
  std::string description = "all";

  bool operator()(const Claim& c) const { return !predicate || predicate(c); }

  static ClaimFilter topic(Topic t) {
    return {[t](const Claim& c) { return c.topic == t; }, "topic=" + std::string(to_string(t))};
  }

  /// "topic=medical" style expressions; empty means all claims.
  static ClaimFilter parse(const std::string& expr) {
    if (expr.empty() || expr == "all") return {};
    const auto eq = expr.find('=');
    if (eq == std::string::npos || expr.substr(0, eq) != "topic")
      throw Error(ErrorCode::ParseError, "unsupported subset '" + expr + "' (use topic=<name>)");
    return topic(parse_topic(expr.substr(eq + 1)));
  }
};

struct AccuracyOptions {
  ClaimFilter filter;
  PreSelection pre_selection = PreSelection::AllPre;
  UncertainMode uncertain = UncertainMode::Incorrect;
  std::optional<int> trial;
  stats::BootstrapOptions bootstrap;
};

/// Percentages with a 95% interval; `n` counts user-claim judgments.
struct AccuracyResult {
  double point = 0;
  stats::Interval ci;
  std::size_t n = 0;
  std::size_t correct = 0;
};

inline std::vector<double> correctness_vector(const AnalysisData& data, InterventionArm arm,
                                              Phase phase, const AccuracyOptions& opt) {
  std::vector<double> v;
  for (const auto& j : data.judgments) {
    if (j.arm != arm || j.phase != phase) continue;
    if (opt.trial && j.trial != *opt.trial) continue;
    if (phase == Phase::Pre && opt.pre_selection == PreSelection::OpenedOnly && !j.opened) continue;
    if (!opt.filter(data.claims->at(j.claim_id))) continue;
    if (j.judgment == Judgment::Uncertain && opt.uncertain == UncertainMode::Exclude) continue;
    v.push_back(j.judgment == judgment_of(j.truth) ? 1.0 : 0.0);
  }
  return v;
}

/// Bootstrap interval of a 0/1 correctness vector, in percent.
inline AccuracyResult accuracy_from(const std::vector<double>& correct,
                                    const stats::BootstrapOptions& bootstrap) {
  if (correct.empty()) throw Error(ErrorCode::EmptySelection, "no judgments selected");
  AccuracyResult r;
  r.n = correct.size();
  r.correct = std::size_t(std::count(correct.begin(), correct.end(), 1.0));
  r.point = 100.0 * double(r.correct) / double(r.n);
  auto ci = stats::bootstrap_mean_ci(correct, bootstrap);
  r.ci = {100.0 * ci.lo, 100.0 * ci.hi};
  return r;
}

inline AccuracyResult accuracy(const AnalysisData& data, InterventionArm arm, Phase phase,
                               const AccuracyOptions& opt = {}) {
  return accuracy_from(correctness_vector(data, arm, phase, opt), opt.bootstrap);
}

struct TrialAccuracy {
  int trial = 0;
  std::size_t n = 0;
  std::size_t correct = 0;
  double pct() const { return n ? 100.0 * double(correct) / double(n) : 0.0; }
};

/// Per-trial accuracies plus both averaging modes: the unweighted mean of
/// trial accuracies and the pooled accuracy over all interactions.
struct TrialBreakdown {
  std::vector<TrialAccuracy> trials;
  double mean_of_trials = 0;
  double pooled = 0;
};

inline TrialBreakdown trial_breakdown(const AnalysisData& data, InterventionArm arm, Phase phase,
                                      AccuracyOptions opt = {}) {
  std::set<int> trial_ids;
  for (const auto& [sid, rec] : data.sessions)
    if (rec.arm == arm) trial_ids.insert(rec.trial);
  TrialBreakdown out;
  std::size_t total_n = 0, total_correct = 0;
  for (int t : trial_ids) {
    opt.trial = t;
    auto v = correctness_vector(data, arm, phase, opt);
    if (v.empty()) continue;
    TrialAccuracy ta{t, v.size(), std::size_t(std::count(v.begin(), v.end(), 1.0))};
    total_n += ta.n;
    total_correct += ta.correct;
    out.trials.push_back(ta);
  }
  if (out.trials.empty()) throw Error(ErrorCode::EmptySelection, "no judgments selected");
  for (const auto& t : out.trials) out.mean_of_trials += t.pct();
  out.mean_of_trials /= double(out.trials.size());
  out.pooled = 100.0 * double(total_correct) / double(total_n);
  return out;
}

// ---------------------------------------------------------------------------
// Interaction rates

struct InteractionRates {
  std::size_t false_impressions = 0;
  std::size_t true_impressions = 0;
  double false_share_pct = 0;
  double false_flag_pct = 0;
  double false_like_pct = 0;
  double true_share_pct = 0;
  double true_flag_pct = 0;
  double true_like_pct = 0;
};

inline InteractionRates interaction_rates(const AnalysisData& data, InterventionArm arm,
                                          Phase phase, const ClaimFilter& filter = {}) {
  InteractionRates r;
  std::size_t fs = 0, ff = 0, fl = 0, ts = 0, tf = 0, tl = 0;
  for (const auto& imp : data.impressions) {
    if (imp.arm != arm || imp.phase != phase) continue;
    if (!filter(data.claims->at(imp.claim_id))) continue;
    if (imp.truth == Veracity::False) {
      ++r.false_impressions;
      fs += imp.shared;
      ff += imp.flagged;
      fl += imp.liked;
    } else {
      ++r.true_impressions;
      ts += imp.shared;
      tf += imp.flagged;
      tl += imp.liked;
    }
  }
  if (r.false_impressions + r.true_impressions == 0)
    throw Error(ErrorCode::EmptySelection, "no impressions selected");
  auto pct = [](std::size_t k, std::size_t n) { return n ? 100.0 * double(k) / double(n) : 0.0; };
  r.false_share_pct = pct(fs, r.false_impressions);
  r.false_flag_pct = pct(ff, r.false_impressions);
  r.false_like_pct = pct(fl, r.false_impressions);
  r.true_share_pct = pct(ts, r.true_impressions);
  r.true_flag_pct = pct(tf, r.true_impressions);
  r.true_like_pct = pct(tl, r.true_impressions);
  return r;
}

// ---------------------------------------------------------------------------
// Helpfulness (1 = very unhelpful ... 4 = very helpful)

struct HelpfulnessResult {
  double pct_helpful = 0;  // share of ratings 3 or 4
  double mean = 0;
  std::size_t n = 0;
};

inline HelpfulnessResult helpfulness_of(std::span<const double> ratings) {
  if (ratings.empty()) throw Error(ErrorCode::EmptySelection, "no helpfulness ratings");
  HelpfulnessResult h;
  h.n = ratings.size();
  std::size_t helpful = 0;
  for (double r : ratings) helpful += r >= 3;
  h.pct_helpful = 100.0 * double(helpful) / double(h.n);
  h.mean = stats::mean(ratings);
  return h;
}

inline std::vector<double> ratings_for(const AnalysisData& data, InterventionArm arm,
                                       const ClaimFilter& filter = {}) {
  std::vector<double> v;
  for (const auto& r : data.ratings)
    if (r.arm == arm && filter(data.claims->at(r.claim_id))) v.push_back(r.rating);
  return v;
}

inline HelpfulnessResult helpfulness(const AnalysisData& data, InterventionArm arm,
                                     const ClaimFilter& filter = {}) {
  return helpfulness_of(ratings_for(data, arm, filter));
}

// ---------------------------------------------------------------------------
// Per-arm report

struct ArmReport {
  InterventionArm arm;
  std::size_t n_pre = 0;
  std::size_t n_post = 0;
  std::optional<AccuracyResult> acc_pre;
  std::optional<AccuracyResult> acc_post;
  std::optional<double> delta;
  std::optional<InteractionRates> rates_pre;
  std::optional<InteractionRates> rates_post;
  std::optional<HelpfulnessResult> help;
  std::optional<TrialBreakdown> trials_post;
};

template <typename Fn>
auto optional_selection(Fn&& fn) -> std::optional<decltype(fn())> {
  try {
    return fn();
  } catch (const Error& e) {
    if (e.code() != ErrorCode::EmptySelection) throw;
    return std::nullopt;
  }
}

inline ArmReport arm_report(const AnalysisData& data, InterventionArm arm,
                            const AccuracyOptions& opt = {}) {
  ArmReport r;
  r.arm = arm;
  r.acc_pre = optional_selection([&] { return accuracy(data, arm, Phase::Pre, opt); });
  r.acc_post = optional_selection([&] { return accuracy(data, arm, Phase::Post, opt); });
  if (r.acc_pre) r.n_pre = r.acc_pre->n;
  if (r.acc_post) r.n_post = r.acc_post->n;
  if (r.acc_pre && r.acc_post) r.delta = r.acc_post->point - r.acc_pre->point;
  r.rates_pre = optional_selection([&] { return interaction_rates(data, arm, Phase::Pre, opt.filter); });
  r.rates_post =
      optional_selection([&] { return interaction_rates(data, arm, Phase::Post, opt.filter); });
  r.help = optional_selection([&] { return helpfulness(data, arm, opt.filter); });
  r.trials_post = optional_selection([&] { return trial_breakdown(data, arm, Phase::Post, opt); });
  return r;
}

struct SubsetReport {
  std::vector<ArmReport> arms;
  std::size_t true_claims = 0;
  std::size_t false_claims = 0;
  std::optional<std::string> balance_warning;
};

/// Per-arm report restricted to claims matching the filter.
inline SubsetReport subset_report(const AnalysisData& data, const AccuracyOptions& opt) {
  SubsetReport out;
  for (const auto& c : data.claims->claims())
    if (opt.filter(c)) (c.veracity == Veracity::True ? out.true_claims : out.false_claims)++;
  if (out.true_claims + out.false_claims == 0)
    throw Error(ErrorCode::EmptySelection, "no claims match subset '" + opt.filter.description + "'");
  const double larger = double(std::max(out.true_claims, out.false_claims));
  const double smaller = double(std::min(out.true_claims, out.false_claims));
  if ((larger - smaller) / larger > 0.10) {
    std::ostringstream w;
    w << "subset '" << opt.filter.description << "' is unbalanced: " << out.true_claims
      << " true vs " << out.false_claims << " false claims";
    out.balance_warning = w.str();
  }
  std::set<InterventionArm> arms;
  for (const auto& [sid, rec] : data.sessions) arms.insert(rec.arm);
  for (auto arm : kAllArms)
    if (arms.contains(arm)) {
      auto r = arm_report(data, arm, opt);
      if (r.acc_pre || r.acc_post) out.arms.push_back(std::move(r));
    }
  if (out.arms.empty())
    throw Error(ErrorCode::EmptySelection, "no judgments on subset '" + opt.filter.description + "'");
  return out;
}

// ---------------------------------------------------------------------------
// Personalization effects

struct UserAccuracyPoint {
  std::string user_id;
  bool personalized = false;
  std::optional<double> alignment;  // personalized users only
  double accuracy = 0;              // 0..1 over the user's Post judgments
  std::size_t n = 0;
};

/// Per-user Post accuracy for the two LLM arms, with the mean alignment of the
/// explanations each personalized user saw.
inline std::vector<UserAccuracyPoint> user_accuracy_points(const AnalysisData& data,
                                                           const AccuracyOptions& opt = {}) {
  struct Acc {
    std::size_t n = 0, correct = 0;
    double align_sum = 0;
    std::size_t align_n = 0;
    bool personalized = false;
  };
  std::map<std::string, Acc> users;
  for (const auto& j : data.judgments) {
    if (j.phase != Phase::Post) continue;
    if (j.arm != InterventionArm::LLMPersonalized && j.arm != InterventionArm::LLMZeroShot) continue;
    if (!opt.filter(data.claims->at(j.claim_id))) continue;
    if (j.judgment == Judgment::Uncertain && opt.uncertain == UncertainMode::Exclude) continue;
    auto& u = users[j.user_id];
    ++u.n;
    u.correct += j.judgment == judgment_of(j.truth);
    if (j.arm == InterventionArm::LLMPersonalized) {
      u.personalized = true;
      const auto& rec = data.sessions.at(j.session_id);
      auto it = rec.interventions.find(j.claim_id);
      if (it != rec.interventions.end() && it->second.generation_attrs && rec.profile) {
        u.align_sum += alignment_score(rec.profile->self_reported, *it->second.generation_attrs).value();
        ++u.align_n;
      }
    }
  }
  std::vector<UserAccuracyPoint> out;
  for (const auto& [uid, u] : users) {
    UserAccuracyPoint p{uid, u.personalized, std::nullopt,
                        double(u.correct) / double(u.n), u.n};
    if (u.personalized && u.align_n) p.alignment = u.align_sum / double(u.align_n);
    out.push_back(p);
  }
  return out;
}

struct GroupMeans {
  double aligned_pct = 0;
  double nonpersonalized_pct = 0;
  double p_value = 1;
  std::size_t n_aligned = 0;
  std::size_t n_nonpersonalized = 0;

  std::string format() const {
    char buf[160];
    std::snprintf(buf, sizeof buf, "personalized (aligned) %.2f%% vs non-personalized %.2f%% (p=%.3f)",
                  aligned_pct, nonpersonalized_pct, p_value);
    return buf;
  }
};

struct AlignmentRegression {
  stats::RegressionResult fit;
  std::optional<GroupMeans> groups;
};

/// OLS of accuracy on alignment over personalized users, plus the mean
/// accuracy of aligned personalized users vs non-personalized users.
inline AlignmentRegression alignment_regression(const std::vector<UserAccuracyPoint>& points,
                                                double threshold = kDefaultAlignmentThreshold) {
  std::vector<double> x, y, aligned, nonpers;
  for (const auto& p : points) {
    if (p.personalized && p.alignment) {
      x.push_back(*p.alignment);
      y.push_back(p.accuracy);
      if (classify_alignment(*p.alignment, threshold) == AlignmentClass::Aligned)
        aligned.push_back(p.accuracy);
    } else if (!p.personalized) {
      nonpers.push_back(p.accuracy);
    }
  }
  AlignmentRegression out{stats::linear_regression(x, y), std::nullopt};
  if (aligned.size() >= 2 && nonpers.size() >= 2) {
    GroupMeans g;
    g.aligned_pct = 100.0 * stats::mean(aligned);
    g.nonpersonalized_pct = 100.0 * stats::mean(nonpers);
    g.p_value = stats::welch_t_test(aligned, nonpers).p;
    g.n_aligned = aligned.size();
    g.n_nonpersonalized = nonpers.size();
    out.groups = g;
  }
  return out;
}

/// Mean helpfulness per alignment band (misaligned, aligned, each exact
/// score, non-personalized) with tests of aligned vs the other two bands.
struct HelpfulnessBands {
  struct Band {
    std::string name;
    HelpfulnessResult help;
  };
  std::vector<Band> bands;
  std::optional<stats::SignificanceResult> aligned_vs_nonpersonalized;
  std::optional<stats::SignificanceResult> aligned_vs_misaligned;
};

inline HelpfulnessBands helpfulness_by_band(const AnalysisData& data,
                                            double threshold = kDefaultAlignmentThreshold) {
  std::vector<double> aligned, misaligned, nonpers;
  std::map<std::string, std::vector<double>> exact;
  for (const auto& r : data.ratings) {
    if (r.arm == InterventionArm::LLMZeroShot) {
      nonpers.push_back(r.rating);
    } else if (r.arm == InterventionArm::LLMPersonalized && r.alignment) {
      (classify_alignment(*r.alignment, threshold) == AlignmentClass::Aligned ? aligned : misaligned)
          .push_back(r.rating);
      char key[32];
      std::snprintf(key, sizeof key, "score=%.2f", r.alignment->value());
      exact[key].push_back(r.rating);
    }
  }
  HelpfulnessBands out;
  auto add = [&](const std::string& name, const std::vector<double>& v) {
    if (!v.empty()) out.bands.push_back({name, helpfulness_of(v)});
  };
  add("misaligned", misaligned);
  add("aligned", aligned);
  for (const auto& [k, v] : exact) add(k, v);
  add("non-personalized", nonpers);
  if (out.bands.empty()) throw Error(ErrorCode::EmptySelection, "no LLM-arm ratings");
  auto test = [](const std::vector<double>& a, const std::vector<double>& b)
      -> std::optional<stats::SignificanceResult> {
    if (a.size() < 2 || b.size() < 2) return std::nullopt;
    try {
      return stats::significance(a, b);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateSample) throw;
      return std::nullopt;
    }
  };
  out.aligned_vs_nonpersonalized = test(aligned, nonpers);
  out.aligned_vs_misaligned = test(aligned, misaligned);
  return out;
}

// ---------------------------------------------------------------------------
// Explanation-quality annotations

struct AnnotationRecord {
  std::string claim_id;
  bool reasoning_accurate = true;
  bool commonsense = false;
  bool event_knowledge = false;
  bool domain_knowledge = false;
  std::string annotator_id;
};

inline void from_json(const json& j, AnnotationRecord& r) {
  r.claim_id = j.at("claim_id").get<std::string>();
  r.reasoning_accurate = j.at("reasoning_accurate").get<bool>();
  r.commonsense = j.at("commonsense").get<bool>();
  r.event_knowledge = j.at("event_knowledge").get<bool>();
  r.domain_knowledge = j.at("domain_knowledge").get<bool>();
  r.annotator_id = j.value("annotator_id", std::string{});
}

struct AnnotationSummary {
  struct Flag {
    double pct = 0;
    std::size_t n = 0;                // claims with a majority decision
    std::vector<std::string> ties;    // claims where annotators split evenly
  };
  std::size_t claims = 0;
  Flag erroneous;  // reasoning_accurate == false
  Flag commonsense;
  Flag event_knowledge;
  Flag domain_knowledge;
};

/// Per-flag percentages over distinct claims. Multiple annotations of a claim
/// are resolved by majority; evenly split claims are listed as ties and left
/// out of that flag's denominator.
inline AnnotationSummary annotation_summary(const std::vector<AnnotationRecord>& records) {
  if (records.empty()) throw Error(ErrorCode::EmptySelection, "no annotation records");
  struct Votes {
    int total = 0, erroneous = 0, commonsense = 0, event = 0, domain = 0;
  };
  std::map<std::string, Votes> by_claim;
  for (const auto& r : records) {
    auto& v = by_claim[r.claim_id];
    ++v.total;
    v.erroneous += !r.reasoning_accurate;
    v.commonsense += r.commonsense;
    v.event += r.event_knowledge;
    v.domain += r.domain_knowledge;
  }
  AnnotationSummary s;
  s.claims = by_claim.size();
  auto resolve = [&](AnnotationSummary::Flag& flag, int Votes::*member) {
    std::size_t yes = 0;
    for (const auto& [cid, v] : by_claim) {
      const int k = v.*member;
      if (2 * k == v.total) {
        flag.ties.push_back(cid);
        continue;
      }
      ++flag.n;
      yes += 2 * k > v.total;
    }
    flag.pct = flag.n ? 100.0 * double(yes) / double(flag.n) : 0.0;
  };
  resolve(s.erroneous, &Votes::erroneous);
  resolve(s.commonsense, &Votes::commonsense);
  resolve(s.event_knowledge, &Votes::event);
  resolve(s.domain_knowledge, &Votes::domain);
  return s;
}

// ---------------------------------------------------------------------------
// Formatting

inline std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

/// "97.65 [96.03, 99.27]"
inline std::string format_accuracy(const AccuracyResult& a) {
  return fmt2(a.point) + " [" + fmt2(a.ci.lo) + ", " + fmt2(a.ci.hi) + "]";
}

inline json to_json(const AccuracyResult& a) {
  return json{{"point", a.point}, {"lo", a.ci.lo}, {"hi", a.ci.hi}, {"n", a.n},
              {"correct", a.correct}};
}

inline json to_json(const ArmReport& r) {
  auto opt = [](const auto& o, auto fn) { return o ? fn(*o) : json(nullptr); };
  json j{{"arm", to_string(r.arm)}, {"n_pre", r.n_pre}, {"n_post", r.n_post}};
  j["acc_pre"] = opt(r.acc_pre, [](const auto& a) { return to_json(a); });
  j["acc_post"] = opt(r.acc_post, [](const auto& a) { return to_json(a); });
  j["delta"] = r.delta ? json(*r.delta) : json(nullptr);
  auto rates = [](const InteractionRates& x) {
    return json{{"false_share_pct", x.false_share_pct}, {"false_flag_pct", x.false_flag_pct},
                {"false_like_pct", x.false_like_pct},   {"true_share_pct", x.true_share_pct},
                {"true_flag_pct", x.true_flag_pct},     {"true_like_pct", x.true_like_pct},
                {"false_impressions", x.false_impressions},
                {"true_impressions", x.true_impressions}};
  };
  j["rates_pre"] = opt(r.rates_pre, rates);
  j["rates_post"] = opt(r.rates_post, rates);
  j["helpfulness"] = opt(r.help, [](const HelpfulnessResult& h) {
    return json{{"pct_helpful", h.pct_helpful}, {"mean", h.mean}, {"n", h.n}};
  });
  j["trials_post"] = opt(r.trials_post, [](const TrialBreakdown& t) {
    json trials = json::array();
    for (const auto& x : t.trials)
      trials.push_back({{"trial", x.trial}, {"n", x.n}, {"correct", x.correct}, {"pct", x.pct()}});
    return json{{"trials", trials}, {"mean_of_trials", t.mean_of_trials}, {"pooled", t.pooled}};
  });
  return j;
}

inline json to_json(const SubsetReport& s) {
  json arms = json::array();
  for (const auto& a : s.arms) arms.push_back(to_json(a));
  return json{{"arms", arms},
              {"true_claims", s.true_claims},
              {"false_claims", s.false_claims},
              {"balance_warning", s.balance_warning ? json(*s.balance_warning) : json(nullptr)}};
}

/// Aligned-column text table, one row per arm.
inline std::string format_table(const SubsetReport& s) {
  const std::vector<std::string> header = {"Intervention", "Acc Before",  "Acc After",
                                           "Delta",        "Share Bef",   "Share Aft",
                                           "Flag Bef",     "Flag Aft",    "Helpful %",
                                           "n Pre",        "n Post"};
  std::vector<std::vector<std::string>> rows;
  auto or_dash = [](const auto& o, auto fn) -> std::string { return o ? fn(*o) : "-"; };
  for (const auto& r : s.arms) {
    rows.push_back({std::string(to_string(r.arm)),
                    or_dash(r.acc_pre, format_accuracy),
                    or_dash(r.acc_post, format_accuracy),
                    or_dash(r.delta, fmt2),
                    or_dash(r.rates_pre, [](const auto& x) { return fmt2(x.false_share_pct); }),
                    or_dash(r.rates_post, [](const auto& x) { return fmt2(x.false_share_pct); }),
                    or_dash(r.rates_pre, [](const auto& x) { return fmt2(x.false_flag_pct); }),
                    or_dash(r.rates_post, [](const auto& x) { return fmt2(x.false_flag_pct); }),
                    or_dash(r.help, [](const auto& h) { return fmt2(h.pct_helpful); }),
                    std::to_string(r.n_pre),
                    std::to_string(r.n_post)});
  }
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    width[c] = header[c].size();
    for (const auto& row : rows) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c) out << "  ";
      if (c == 0)
        out << std::left << std::setw(int(width[c])) << cells[c];
      else
        out << std::right << std::setw(int(width[c])) << cells[c];
    }
    out << "\n";
  };
  line(header);
  std::size_t total = 0;
  for (auto w : width) total += w + 2;
  out << std::string(total - 2, '-') << "\n";
  for (const auto& row : rows) line(row);
  if (s.balance_warning) out << "warning: " << *s.balance_warning << "\n";
  return out.str();
}

}  // namespace misinfo
