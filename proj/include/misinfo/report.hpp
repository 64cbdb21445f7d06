#pragma once

// Writes the report artifacts for a set of logs: the per-arm table, the
// alignment regression with plot data, helpfulness by alignment band, and
// the linguistic comparison of the explanations participants saw.

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "misinfo/analysis.hpp"
#include "misinfo/lingua.hpp"

namespace misinfo {

struct ReportOptions {
  std::string subset;  // "topic=medical"; empty = all claims
  UncertainMode uncertain = UncertainMode::Incorrect;
  PreSelection pre_selection = PreSelection::AllPre;
  std::optional<int> trial;
  stats::BootstrapOptions bootstrap;
  bool apply_qc = true;
  bool force = false;
};

namespace detail {

class ArtifactWriter {
 public:
  ArtifactWriter(std::filesystem::path dir, bool force) : dir_(std::move(dir)), force_(force) {
    std::filesystem::create_directories(dir_);
  }

  void write(const std::string& name, const std::string& content) {
    const auto path = dir_ / name;
    if (!force_ && std::filesystem::exists(path))
      throw Error(ErrorCode::AlreadyExists, path.string() + " exists (use --force)");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
    if (!out) throw Error(ErrorCode::ConfigError, "cannot write " + path.string());
    written_.push_back(path);
  }

  /// Checks every target up front so a refused run writes nothing.
  void require_writable(std::initializer_list<const char*> names) const {
    if (force_) return;
    for (auto n : names)
      if (std::filesystem::exists(dir_ / n))
        throw Error(ErrorCode::AlreadyExists, (dir_ / n).string() + " exists (use --force)");
  }

  void write_json(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }

  const std::vector<std::filesystem::path>& written() const { return written_; }

 private:
  std::filesystem::path dir_;
  bool force_;
  std::vector<std::filesystem::path> written_;
};

inline json unavailable(const Error& e) {
  return json{{"status", "unavailable"}, {"code", to_string(e.code())}, {"reason", e.message()}};
}

template <typename Fn>
json or_unavailable(Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    if (e.code() != ErrorCode::EmptySelection && e.code() != ErrorCode::InsufficientData &&
        e.code() != ErrorCode::GroupTooSmall && e.code() != ErrorCode::DegenerateSample)
      throw;
    return unavailable(e);
  }
}

inline json to_json(const stats::SignificanceResult& s) {
  return json{{"t", s.t.t},   {"df", s.t.df},           {"t_p", s.t_p()},
              {"u", s.mann_whitney.u}, {"mannwhitney_p", s.mannwhitney_p()},
              {"exact", s.mann_whitney.exact}};
}

}  // namespace detail

inline json to_json(const HelpfulnessBands& h) {
  json bands = json::array();
  for (const auto& b : h.bands)
    bands.push_back({{"band", b.name}, {"mean", b.help.mean}, {"pct_helpful", b.help.pct_helpful},
                     {"n", b.help.n}});
  auto sig = [](const auto& o) { return o ? detail::to_json(*o) : json(nullptr); };
  return json{{"bands", bands},
              {"aligned_vs_nonpersonalized", sig(h.aligned_vs_nonpersonalized)},
              {"aligned_vs_misaligned", sig(h.aligned_vs_misaligned)}};
}

inline std::string format_bands(const HelpfulnessBands& h) {
  std::ostringstream out;
  out << std::left << std::setw(18) << "Band" << std::right << std::setw(8) << "n" << std::setw(8)
      << "mean" << std::setw(12) << "% helpful" << "\n";
  for (const auto& b : h.bands)
    out << std::left << std::setw(18) << b.name << std::right << std::setw(8) << b.help.n
        << std::setw(8) << fmt2(b.help.mean) << std::setw(12) << fmt2(b.help.pct_helpful) << "\n";
  auto line = [&](const char* what, const auto& o) {
    if (o)
      out << what << ": t-test p=" << std::setprecision(4) << o->t_p()
          << ", Mann-Whitney p=" << o->mannwhitney_p() << "\n";
  };
  line("aligned vs non-personalized", h.aligned_vs_nonpersonalized);
  line("aligned vs misaligned", h.aligned_vs_misaligned);
  return out.str();
}

/// Explanations shown in the LLM arms, one per distinct (claim, audience):
/// personalized texts grouped by audience as g1..gN (most frequent first),
/// zero-shot texts as "control".
struct ExplanationGroups {
  std::map<std::string, std::vector<std::string>> texts;
  std::vector<std::string> order;
  std::map<std::string, std::string> audience_of;  // g-name -> audience key
};

inline ExplanationGroups explanation_groups(const AnalysisData& data) {
  std::map<std::string, std::map<std::string, std::string>> by_audience;  // audience -> claim -> text
  std::map<std::string, std::string> zero_shot;
  for (const auto& [sid, rec] : data.sessions)
    for (const auto& [cid, t] : rec.interventions) {
      if (t.explanation.empty()) continue;
      if (rec.arm == InterventionArm::LLMPersonalized && t.generation_attrs)
        by_audience[t.generation_attrs->key()].emplace(cid, t.explanation);
      else if (rec.arm == InterventionArm::LLMZeroShot)
        zero_shot.emplace(cid, t.explanation);
    }
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (const auto& [k, m] : by_audience) ranked.emplace_back(k, m.size());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  ExplanationGroups g;
  int i = 0;
  for (const auto& [key, n] : ranked) {
    if (n < 2) continue;
    const auto name = "g" + std::to_string(++i);
    g.order.push_back(name);
    g.audience_of[name] = key;
    for (const auto& [cid, t] : by_audience[key]) g.texts[name].push_back(t);
  }
  if (zero_shot.size() >= 2) {
    g.order.push_back("control");
    for (const auto& [cid, t] : zero_shot) g.texts["control"].push_back(t);
  }
  return g;
}

/// Returns the files written. Throws EmptySelection when the logs hold no
/// analyzable session.
inline std::vector<std::filesystem::path> write_reports(const LogSnapshot& logs,
                                                        std::shared_ptr<const Dataset> claims,
                                                        const ExperimentConfig& config,
                                                        const ReportOptions& opt,
                                                        const std::filesystem::path& out_dir) {
  if (logs.sessions.empty()) throw Error(ErrorCode::EmptySelection, "no sessions in the logs");
  const auto data = prepare_analysis(logs, claims, config, opt.apply_qc);
  if (data.sessions.empty())
    throw Error(ErrorCode::EmptySelection, "no sessions left after quality control");

  AccuracyOptions acc;
  acc.filter = ClaimFilter::parse(opt.subset);
  acc.uncertain = opt.uncertain;
  acc.pre_selection = opt.pre_selection;
  acc.trial = opt.trial;
  acc.bootstrap = opt.bootstrap;

  // Computed before anything is written so a failing selection leaves no
  // partial output.
  const auto table = subset_report(data, acc);

  detail::ArtifactWriter out(out_dir, opt.force);
  out.require_writable({"effectiveness.json", "effectiveness.txt", "alignment_points.csv", "alignment_band.csv",
                        "alignment.json", "helpfulness_bands.json", "helpfulness_bands.txt",
                        "linguistic.txt", "linguistic.json"});
  json eff = to_json(table);
  eff["subset"] = acc.filter.description;
  eff["excluded_users"] = {{"attention_failures", data.exclusions.attention_failures},
                          {"sub_minimum", data.exclusions.sub_minimum},
                          {"constant_labelers", data.exclusions.constant_labelers}};
  out.write_json("effectiveness.json", eff);
  out.write("effectiveness.txt", format_table(table));

  // Alignment regression and plot data.
  const auto points = user_accuracy_points(data, acc);
  json align = detail::or_unavailable([&] {
    const auto reg = alignment_regression(points, config.alignment_threshold);
    json j{{"slope", reg.fit.slope},
           {"intercept", reg.fit.intercept},
           {"slope_ci", {reg.fit.slope_ci.lo, reg.fit.slope_ci.hi}},
           {"intercept_ci", {reg.fit.intercept_ci.lo, reg.fit.intercept_ci.hi}},
           {"p_value", reg.fit.p_value},
           {"n", reg.fit.n}};
    if (reg.groups) {
      j["group_means"] = {{"aligned_pct", reg.groups->aligned_pct},
                          {"nonpersonalized_pct", reg.groups->nonpersonalized_pct},
                          {"p_value", reg.groups->p_value},
                          {"n_aligned", reg.groups->n_aligned},
                          {"n_nonpersonalized", reg.groups->n_nonpersonalized},
                          {"summary", reg.groups->format()}};
    }
    std::ostringstream band;
    band << "x,fit,lo,hi\n";
    for (int i = 0; i <= 20; ++i) {
      const double x = i / 20.0;
      const auto b = reg.fit.band_at(x);
      band << x << "," << reg.fit.intercept + reg.fit.slope * x << "," << b.lo << "," << b.hi << "\n";
    }
    j["band_csv"] = band.str();
    return j;
  });
  std::ostringstream pts;
  pts << "user_id,alignment,accuracy,n\n";
  for (const auto& p : points)
    if (p.personalized && p.alignment)
      pts << p.user_id << "," << *p.alignment << "," << p.accuracy << "," << p.n << "\n";
  out.write("alignment_points.csv", pts.str());
  if (align.contains("band_csv")) {
    out.write("alignment_band.csv", align["band_csv"].get<std::string>());
    align.erase("band_csv");
  }
  out.write_json("alignment.json", align);

  // Helpfulness by alignment band.
  std::optional<HelpfulnessBands> hb;
  json bands = detail::or_unavailable([&] {
    hb = helpfulness_by_band(data, config.alignment_threshold);
    return to_json(*hb);
  });
  out.write_json("helpfulness_bands.json", bands);
  out.write("helpfulness_bands.txt",
            hb ? format_bands(*hb) : "unavailable: " + bands["reason"].get<std::string>() + "\n");

  // Linguistic comparison.
  const auto groups = explanation_groups(data);
  json ling = detail::or_unavailable([&]() -> json {
    if (groups.order.empty() || !groups.texts.contains(groups.order.front()))
      throw Error(ErrorCode::EmptySelection, "no LLM explanations with at least 2 texts per group");
    lingua::CompareOptions co;
    co.reference = groups.order.front();
    co.order = groups.order;
    auto cmp = lingua::group_comparison(groups.texts, co);
    json j = lingua::to_json(cmp);
    j["audiences"] = groups.audience_of;
    j["text"] = lingua::format_comparison(cmp);
    return j;
  });
  out.write("linguistic.txt", ling.contains("text") ? ling["text"].get<std::string>()
                                             : "unavailable: " + ling["reason"].get<std::string>() + "\n");
  ling.erase("text");
  out.write_json("linguistic.json", ling);
  return out.written();
}

}  // namespace misinfo
