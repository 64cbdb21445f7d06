#pragma once

// Experiment configuration and its flat sectioned key = value file format:
//
//   [experiment]
//   feed_size = 5
//   seed = 7
//   [arms]
//   LabelOnly = 1
//   ReactionFrame = 1
//
// Unknown sections or keys are errors.

#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "misinfo/domain.hpp"

namespace misinfo {

struct LlmSettings {
  std::string provider = "mock";  // mock | http
  std::string model_id = "gpt-4-0613";
  std::string base_url = "https://api.openai.com";
  std::string path = "/v1/chat/completions";
  std::string api_key_env = "MISINFO_LLM_API_KEY";
  int max_in_flight = 4;
};

struct ExperimentConfig {
  std::vector<std::pair<InterventionArm, double>> arms = {
      {InterventionArm::LabelOnly, 1.0},     {InterventionArm::ReactionFrame, 1.0},
      {InterventionArm::LLMZeroShot, 1.0},   {InterventionArm::MethodologyAI, 1.0},
      {InterventionArm::MethodologyHuman, 1.0},
  };
  int feed_size = 5;
  int min_interactions = 3;
  bool balance_feed = false;
  std::uint64_t seed = 0;
  int trial = 0;
  double alignment_threshold = 0.4;
  int retry_limit = 2;
  int fsync_every = 1;
  bool logical_clock = false;
  std::vector<std::string> age_brackets = default_age_brackets();
  std::string reference_table;  // path; required for LLMPersonalized
  bool uniform_prior = true;
  std::string slots_file;  // reaction-frame lookup table
  LlmSettings llm;

  /// Expected answers to the two attention-check questions.
  std::pair<int, int> attention_answers() const { return {min_interactions, feed_size}; }

  bool has_arm(InterventionArm arm) const {
    for (const auto& [a, w] : arms)
      if (a == arm) return true;
    return false;
  }

  void validate() const {
    if (arms.empty()) throw Error(ErrorCode::ConfigError, "at least one arm is required");
    for (const auto& [arm, w] : arms)
      if (!(w > 0))
        throw Error(ErrorCode::ConfigError,
                    "weight for " + std::string(to_string(arm)) + " must be positive");
    if (feed_size < 1) throw Error(ErrorCode::ConfigError, "feed_size must be at least 1");
    if (min_interactions < 0 || min_interactions > feed_size)
      throw Error(ErrorCode::ConfigError, "min_interactions must be within 0..feed_size");
    if (alignment_threshold < 0 || alignment_threshold > 1)
      throw Error(ErrorCode::ConfigError, "alignment_threshold must be within [0, 1]");
    if (retry_limit < 0) throw Error(ErrorCode::ConfigError, "retry_limit must be >= 0");
    if (fsync_every < 1) throw Error(ErrorCode::ConfigError, "fsync_every must be >= 1");
    if (age_brackets.empty()) throw Error(ErrorCode::ConfigError, "age_brackets is empty");
    if (llm.provider != "mock" && llm.provider != "http")
      throw Error(ErrorCode::ConfigError, "llm.provider must be mock or http");
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw Error(ErrorCode::ConfigError, key + ": expected true or false, got '" + v + "'");
}

template <typename T>
T parse_number(const std::string& v, const std::string& key) {
  std::istringstream in(v);
  T out{};
  in >> out;
  if (!in || !in.eof())
    throw Error(ErrorCode::ConfigError, key + ": invalid number '" + v + "'");
  return out;
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(v);
  while (std::getline(in, item, ','))
    if (auto t = trim(item); !t.empty()) out.push_back(t);
  return out;
}

inline std::string unquote(std::string v) {
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return v.substr(1, v.size() - 2);
  return v;
}

}  // namespace detail

inline ExperimentConfig parse_config(std::istream& in) {
  using detail::parse_bool;
  using detail::parse_number;
  ExperimentConfig cfg;
  bool arms_seen = false;
  std::string section;
  std::string line;
  int line_no = 0;

  using Setter = std::function<void(const std::string&, const std::string&)>;
  const std::map<std::string, Setter> experiment = {
      {"feed_size", [&](auto& k, auto& v) { cfg.feed_size = parse_number<int>(v, k); }},
      {"min_interactions", [&](auto& k, auto& v) { cfg.min_interactions = parse_number<int>(v, k); }},
      {"balance_feed", [&](auto& k, auto& v) { cfg.balance_feed = parse_bool(v, k); }},
      {"seed", [&](auto& k, auto& v) { cfg.seed = parse_number<std::uint64_t>(v, k); }},
      {"trial", [&](auto& k, auto& v) { cfg.trial = parse_number<int>(v, k); }},
      {"alignment_threshold",
       [&](auto& k, auto& v) { cfg.alignment_threshold = parse_number<double>(v, k); }},
      {"retry_limit", [&](auto& k, auto& v) { cfg.retry_limit = parse_number<int>(v, k); }},
      {"fsync_every", [&](auto& k, auto& v) { cfg.fsync_every = parse_number<int>(v, k); }},
      {"clock",
       [&](auto& k, auto& v) {
         if (v != "logical" && v != "system")
           throw Error(ErrorCode::ConfigError, k + ": expected logical or system");
         cfg.logical_clock = v == "logical";
       }},
      {"age_brackets", [&](auto&, auto& v) { cfg.age_brackets = detail::split_list(v); }},
      {"slots_file", [&](auto&, auto& v) { cfg.slots_file = v; }},
  };
  const std::map<std::string, Setter> personalization = {
      {"reference_table", [&](auto&, auto& v) { cfg.reference_table = v; }},
      {"prior",
       [&](auto& k, auto& v) {
         if (v != "uniform" && v != "table")
           throw Error(ErrorCode::ConfigError, k + ": expected uniform or table");
         cfg.uniform_prior = v == "uniform";
       }},
  };
  const std::map<std::string, Setter> llm = {
      {"provider", [&](auto&, auto& v) { cfg.llm.provider = v; }},
      {"model_id", [&](auto&, auto& v) { cfg.llm.model_id = v; }},
      {"base_url", [&](auto&, auto& v) { cfg.llm.base_url = v; }},
      {"path", [&](auto&, auto& v) { cfg.llm.path = v; }},
      {"api_key_env", [&](auto&, auto& v) { cfg.llm.api_key_env = v; }},
      {"max_in_flight", [&](auto& k, auto& v) { cfg.llm.max_in_flight = parse_number<int>(v, k); }},
  };

  while (std::getline(in, line)) {
    ++line_no;
    auto t = detail::trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    const std::string where = "line " + std::to_string(line_no);
    if (t.front() == '[') {
      if (t.back() != ']') throw Error(ErrorCode::ConfigError, "bad section header", where);
      section = detail::trim(t.substr(1, t.size() - 2));
      if (section != "experiment" && section != "arms" && section != "personalization" &&
          section != "llm")
        throw Error(ErrorCode::ConfigError, "unknown section [" + section + "]", where);
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::ConfigError, "expected key = value", where);
    const auto key = detail::trim(t.substr(0, eq));
    const auto value = detail::unquote(detail::trim(t.substr(eq + 1)));
    try {
      if (section == "arms") {
        if (!arms_seen) cfg.arms.clear();
        arms_seen = true;
        InterventionArm arm;
        try {
          arm = parse_arm(key);
        } catch (const Error&) {
          throw Error(ErrorCode::ConfigError, "unknown arm '" + key + "'");
        }
        cfg.arms.emplace_back(arm, parse_number<double>(value, key));
        continue;
      }
      const auto& table = section == "experiment"        ? experiment
                          : section == "personalization" ? personalization
                          : section == "llm"             ? llm
                                                         : experiment;
      if (section.empty())
        throw Error(ErrorCode::ConfigError, "key '" + key + "' outside of a section");
      auto it = table.find(key);
      if (it == table.end())
        throw Error(ErrorCode::ConfigError, "unknown key '" + key + "' in [" + section + "]");
      it->second(key, value);
    } catch (const Error& e) {
      throw Error(ErrorCode::ConfigError, e.message(), where);
    }
  }
  cfg.validate();
  return cfg;
}

inline ExperimentConfig parse_config(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open config " + path);
  return parse_config(in);
}

inline std::string format_config(const ExperimentConfig& cfg) {
  std::ostringstream out;
  out << "[experiment]\n"
      << "feed_size = " << cfg.feed_size << "\n"
      << "min_interactions = " << cfg.min_interactions << "\n"
      << "balance_feed = " << (cfg.balance_feed ? "true" : "false") << "\n"
      << "seed = " << cfg.seed << "\n"
      << "trial = " << cfg.trial << "\n"
      << "alignment_threshold = " << cfg.alignment_threshold << "\n"
      << "retry_limit = " << cfg.retry_limit << "\n"
      << "fsync_every = " << cfg.fsync_every << "\n"
      << "clock = " << (cfg.logical_clock ? "logical" : "system") << "\n";
  out << "age_brackets = ";
  for (std::size_t i = 0; i < cfg.age_brackets.size(); ++i)
    out << (i ? ", " : "") << cfg.age_brackets[i];
  out << "\n";
  if (!cfg.slots_file.empty()) out << "slots_file = " << cfg.slots_file << "\n";
  out << "\n[arms]\n";
  for (const auto& [arm, w] : cfg.arms) out << to_string(arm) << " = " << w << "\n";
  out << "\n[personalization]\n";
  if (!cfg.reference_table.empty()) out << "reference_table = " << cfg.reference_table << "\n";
  out << "prior = " << (cfg.uniform_prior ? "uniform" : "table") << "\n";
  out << "\n[llm]\n"
      << "provider = " << cfg.llm.provider << "\n"
      << "model_id = " << cfg.llm.model_id << "\n"
      << "base_url = " << cfg.llm.base_url << "\n"
      << "path = " << cfg.llm.path << "\n"
      << "api_key_env = " << cfg.llm.api_key_env << "\n"
      << "max_in_flight = " << cfg.llm.max_in_flight << "\n";
  return out.str();
}

}  // namespace misinfo
