#pragma once

// Demographic inference from survey answers, and alignment between a
// personalized explanation's target attributes and the reader.

#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "misinfo/domain.hpp"

namespace misinfo {

/// Conditional answer distributions per demographic group. Loaded from an
/// operator-supplied JSON file:
///
///   {
///     "questions": {"<qid>": ["<answer>", ...], ...},
///     "groups": [{"id": "<gid>", "attrs": {...}, "sample_size": 120}, ...],
///     "prior": {"<gid>": 0.5, ...},                        // optional, uniform default
///     "cond_prob": {"<gid>": {"<qid>": {"<answer>": p, ...}, ...}, ...}
///   }
class ReferenceTable {
 public:
  struct Group {
    std::string id;
    AttributeSet attrs;
    double sample_size = 0;  // respondents behind the group's estimates
  };

  static constexpr double kTolerance = 1e-9;
  static constexpr double kLaplaceAlpha = 1.0;

  ReferenceTable() = default;

  static ReferenceTable from_json(const json& j) {
    ReferenceTable t;
    try {
      for (const auto& [qid, answers] : j.at("questions").items())
        t.questions_[qid] = answers.get<std::vector<std::string>>();
      for (const auto& g : j.at("groups")) {
        Group group;
        group.attrs = parse_attribute_set(g.at("attrs"));
        group.id = g.value("id", group.attrs.key());
        group.sample_size = g.value("sample_size", 0.0);
        t.groups_.push_back(std::move(group));
      }
      if (j.contains("prior")) {
        for (const auto& [gid, p] : j.at("prior").items()) t.prior_[gid] = p.get<double>();
      } else {
        for (const auto& g : t.groups_) t.prior_[g.id] = 1.0 / double(t.groups_.size());
      }
      for (const auto& [gid, per_q] : j.at("cond_prob").items())
        for (const auto& [qid, dist] : per_q.items())
          for (const auto& [ans, p] : dist.items()) t.cond_prob_[gid][qid][ans] = p.get<double>();
    } catch (const json::exception& e) {
      throw Error(ErrorCode::MalformedTable, e.what());
    } catch (const Error& e) {
      throw Error(ErrorCode::MalformedTable, e.message());
    }
    t.validate();
    return t;
  }

  static ReferenceTable load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::MalformedTable, "cannot open reference table " + path);
    try {
      return from_json(json::parse(in));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::MalformedTable, e.what());
    }
  }

  json to_json() const {
    json groups = json::array();
    for (const auto& g : groups_)
      groups.push_back({{"id", g.id}, {"attrs", g.attrs}, {"sample_size", g.sample_size}});
    return json{{"questions", questions_}, {"groups", groups}, {"prior", prior_},
                {"cond_prob", cond_prob_}};
  }

  void validate() const {
    if (groups_.empty()) throw Error(ErrorCode::MalformedTable, "table has no groups");
    std::set<std::string> ids;
    for (const auto& g : groups_) {
      if (!ids.insert(g.id).second)
        throw Error(ErrorCode::MalformedTable, "duplicate group id '" + g.id + "'");
      if (g.sample_size < 0)
        throw Error(ErrorCode::MalformedTable, "negative sample size for '" + g.id + "'");
    }
    double prior_total = 0;
    for (const auto& [gid, p] : prior_) {
      if (!ids.contains(gid))
        throw Error(ErrorCode::MalformedTable, "prior for unknown group '" + gid + "'");
      if (p < 0) throw Error(ErrorCode::MalformedTable, "negative prior for '" + gid + "'");
      prior_total += p;
    }
    if (prior_.size() != groups_.size())
      throw Error(ErrorCode::MalformedTable, "every group needs a prior");
    if (std::abs(prior_total - 1.0) > kTolerance)
      throw Error(ErrorCode::MalformedTable, "priors sum to " + std::to_string(prior_total));
    for (const auto& [gid, per_q] : cond_prob_) {
      if (!ids.contains(gid))
        throw Error(ErrorCode::MalformedTable, "probabilities for unknown group '" + gid + "'");
      for (const auto& [qid, dist] : per_q) {
        auto q = questions_.find(qid);
        if (q == questions_.end())
          throw Error(ErrorCode::MalformedTable, "unknown question '" + qid + "'");
        double total = 0;
        for (const auto& [ans, p] : dist) {
          if (std::find(q->second.begin(), q->second.end(), ans) == q->second.end())
            throw Error(ErrorCode::MalformedTable,
                        "answer '" + ans + "' not in vocabulary of '" + qid + "'");
          if (p < 0 || p > 1)
            throw Error(ErrorCode::MalformedTable, "probability out of range in '" + qid + "'");
          total += p;
        }
        if (std::abs(total - 1.0) > kTolerance)
          throw Error(ErrorCode::MalformedTable, "answers of (" + gid + ", " + qid +
                                                     ") sum to " + std::to_string(total));
      }
    }
  }

  const std::vector<Group>& groups() const { return groups_; }
  const std::map<std::string, std::vector<std::string>>& questions() const { return questions_; }
  double prior(const std::string& gid) const { return prior_.at(gid); }

  /// Replaces all priors with the uniform distribution.
  void set_uniform_prior() {
    for (const auto& g : groups_) prior_[g.id] = 1.0 / double(groups_.size());
  }

  /// P(answer | group, question). Triples absent from the table (or with zero
  /// mass) get the add-one estimate alpha / (n_g + alpha * V_q).
  std::optional<double> probability(const std::string& gid, const std::string& qid,
                                    const std::string& answer) const {
    auto q = questions_.find(qid);
    if (q == questions_.end()) return std::nullopt;
    if (auto g = cond_prob_.find(gid); g != cond_prob_.end())
      if (auto d = g->second.find(qid); d != g->second.end())
        if (auto a = d->second.find(answer); a != d->second.end() && a->second > 0)
          return a->second;
    double n = 0;
    for (const auto& grp : groups_)
      if (grp.id == gid) n = grp.sample_size;
    const bool in_vocab = std::find(q->second.begin(), q->second.end(), answer) != q->second.end();
    const double vocab = double(q->second.size() + (in_vocab ? 0 : 1));
    return kLaplaceAlpha / (n + kLaplaceAlpha * vocab);
  }

  // Builder API used by fixtures.
  void add_question(std::string qid, std::vector<std::string> answers) {
    questions_[std::move(qid)] = std::move(answers);
  }
  void add_group(Group g, double prior) {
    prior_[g.id] = prior;
    groups_.push_back(std::move(g));
  }
  void set_probability(const std::string& gid, const std::string& qid, const std::string& ans,
                       double p) {
    cond_prob_[gid][qid][ans] = p;
  }

 private:
  std::map<std::string, std::vector<std::string>> questions_;
  std::vector<Group> groups_;
  std::map<std::string, double> prior_;
  std::map<std::string, std::map<std::string, std::map<std::string, double>>> cond_prob_;
};

struct InferenceResult {
  AttributeSet attrs;
  std::string group_id;
  std::vector<std::pair<std::string, double>> posterior;  // normalized, table order
  std::vector<std::string> ignored_questions;
};

/// Maximum-a-posteriori group for the given answers, computed in log space.
/// Groups whose log scores are within 1e-12 of the best are tied; ties go to
/// the lexicographically smallest group id.
inline InferenceResult infer_attributes(const std::vector<SurveyAnswer>& answers,
                                        const ReferenceTable& table) {
  if (answers.empty()) throw Error(ErrorCode::EmptyAnswers, "no survey answers to infer from");
  const auto& groups = table.groups();
  if (groups.empty()) throw Error(ErrorCode::MalformedTable, "table has no groups");

  InferenceResult result;
  std::vector<double> log_score(groups.size());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const double prior = table.prior(groups[g].id);
    log_score[g] = prior > 0 ? std::log(prior) : -std::numeric_limits<double>::infinity();
    for (const auto& a : answers) {
      auto p = table.probability(groups[g].id, a.question_id, a.answer_id);
      if (!p) {
        if (g == 0) result.ignored_questions.push_back(a.question_id);
        continue;
      }
      log_score[g] += std::log(*p);
    }
  }

  constexpr double kTieEpsilon = 1e-12;
  std::size_t best = 0;
  for (std::size_t g = 1; g < groups.size(); ++g) {
    const double diff = log_score[g] - log_score[best];
    if (diff > kTieEpsilon || (std::abs(diff) <= kTieEpsilon && groups[g].id < groups[best].id))
      best = g;
  }

  const double top = log_score[best];
  double total = 0;
  for (double s : log_score) total += std::isfinite(s) ? std::exp(s - top) : 0.0;
  for (std::size_t g = 0; g < groups.size(); ++g)
    result.posterior.emplace_back(
        groups[g].id, std::isfinite(log_score[g]) ? std::exp(log_score[g] - top) / total : 0.0);
  result.attrs = groups[best].attrs;
  result.group_id = groups[best].id;
  return result;
}

// ---------------------------------------------------------------------------
// Alignment

struct AlignmentScore {
  int matches = 0;
  int k_used = 0;

  double value() const { return k_used == 0 ? 0.0 : double(matches) / double(k_used); }
  bool operator==(const AlignmentScore&) const = default;
};

/// Fraction of the attributes used for generation that equal the user's
/// self-reported values. Attributes the user did not report never match.
inline AlignmentScore alignment_score(const AttributeSet& self_reported,
                                      const AttributeSet& generation_attrs) {
  if (generation_attrs.empty())
    throw Error(ErrorCode::EmptyAttributes, "explanation was generated without attributes");
  AlignmentScore s;
  auto tally = [&](const auto& gen, const auto& user) {
    if (!gen) return;
    ++s.k_used;
    if (user && *user == *gen) ++s.matches;
  };
  tally(generation_attrs.politics, self_reported.politics);
  tally(generation_attrs.race, self_reported.race);
  tally(generation_attrs.education, self_reported.education);
  tally(generation_attrs.gender, self_reported.gender);
  tally(generation_attrs.age, self_reported.age);
  return s;
}

inline AlignmentScore alignment_score(const UserProfile& user,
                                      const AttributeSet& generation_attrs) {
  return alignment_score(user.self_reported, generation_attrs);
}

enum class AlignmentClass { Aligned, Misaligned };

inline constexpr double kDefaultAlignmentThreshold = 0.4;

inline AlignmentClass classify_alignment(double score,
                                         double threshold = kDefaultAlignmentThreshold) {
  // Scores are ratios of small integers; absorb representation error at the
  // boundary (2/5 vs 0.4).
  return score + 1e-12 >= threshold ? AlignmentClass::Aligned : AlignmentClass::Misaligned;
}

inline AlignmentClass classify_alignment(const AlignmentScore& score,
                                         double threshold = kDefaultAlignmentThreshold) {
  return classify_alignment(score.value(), threshold);
}

inline std::string_view to_string(AlignmentClass c) {
  return c == AlignmentClass::Aligned ? "aligned" : "misaligned";
}

}  // namespace misinfo
