#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "misinfo/domain.hpp"

namespace misinfo {

enum class ClaimsFormat { JsonLines, Csv };

inline ClaimsFormat claims_format_for(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".csv") return ClaimsFormat::Csv;
  return ClaimsFormat::JsonLines;
}

/// Loaded claims, indexed by id. Insertion order is preserved so that feed
/// sampling is reproducible for a given file.
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(std::vector<Claim> claims) {
    for (auto& c : claims) add(std::move(c));
  }

  void add(Claim claim) {
    claim.validate();
    if (index_.contains(claim.id))
      throw Error(ErrorCode::DuplicateId, "duplicate claim id '" + claim.id + "'");
    index_.emplace(claim.id, claims_.size());
    claims_.push_back(std::move(claim));
  }

  const std::vector<Claim>& claims() const { return claims_; }
  std::size_t size() const { return claims_.size(); }
  bool contains(const std::string& id) const { return index_.contains(id); }

  const Claim& at(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw Error(ErrorCode::UnknownClaim, "unknown claim '" + id + "'");
    return claims_[it->second];
  }

 private:
  std::vector<Claim> claims_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct DatasetSummary {
  std::size_t total = 0;
  std::size_t true_count = 0;
  std::size_t false_count = 0;
  std::map<Topic, std::size_t> by_topic;

  std::string to_string() const {
    std::ostringstream out;
    out << total << " claims: " << true_count << " true, " << false_count << " false";
    return out.str();
  }
};

inline DatasetSummary summarize(const Dataset& data) {
  DatasetSummary s;
  s.total = data.size();
  for (const auto& c : data.claims()) {
    (c.veracity == Veracity::True ? s.true_count : s.false_count)++;
    s.by_topic[c.topic]++;
  }
  return s;
}

namespace detail {

/// Splits one CSV record (RFC 4180 quoting; no embedded newlines).
inline std::vector<std::string> split_csv_line(const std::string& line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (ch != '\r') {
      field.push_back(ch);
    }
  }
  if (quoted)
    throw Error(ErrorCode::ParseError, "unterminated quote", "line " + std::to_string(line_no));
  fields.push_back(std::move(field));
  return fields;
}

template <typename Fn>
auto with_line(std::size_t line_no, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::DuplicateId) throw;
    throw Error(ErrorCode::ParseError, e.message(), "line " + std::to_string(line_no));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what(), "line " + std::to_string(line_no));
  }
}

}  // namespace detail

inline Dataset parse_claims(std::istream& in, ClaimsFormat format) {
  Dataset data;
  std::string line;
  std::size_t line_no = 0;
  if (format == ClaimsFormat::JsonLines) {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      auto claim = detail::with_line(line_no, [&] { return json::parse(line).get<Claim>(); });
      data.add(std::move(claim));
    }
    return data;
  }

  std::map<std::string, std::size_t> columns;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto fields = detail::split_csv_line(line, line_no);
    if (columns.empty()) {
      for (std::size_t i = 0; i < fields.size(); ++i) columns[fields[i]] = i;
      for (const char* required : {"id", "headline", "veracity"})
        if (!columns.contains(required))
          throw Error(ErrorCode::ParseError, std::string("missing column '") + required + "'",
                      "line " + std::to_string(line_no));
      continue;
    }
    auto get = [&](const char* name) -> std::string {
      auto it = columns.find(name);
      if (it == columns.end() || it->second >= fields.size()) return {};
      return fields[it->second];
    };
    auto claim = detail::with_line(line_no, [&] {
      const auto image = get("image_ref");
      const auto topic = get("topic");
      return Claim(get("id"), get("headline"), get("source"),
                   image.empty() ? std::nullopt : std::optional<std::string>(image),
                   parse_veracity(get("veracity")), topic.empty() ? Topic::Other : parse_topic(topic));
    });
    data.add(std::move(claim));
  }
  return data;
}

inline Dataset load_claims(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open claims file " + path.string());
  return parse_claims(in, claims_format_for(path));
}

inline void write_claims_jsonl(std::ostream& out, const Dataset& data) {
  for (const auto& c : data.claims()) out << json(c).dump() << '\n';
}

}  // namespace misinfo
