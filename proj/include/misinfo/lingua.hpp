#pragma once

// Length, readability and formality of explanation texts, and per-group
// comparisons of those metrics.

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <functional>
#include <iomanip>
#include <istream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "misinfo/domain.hpp"
#include "misinfo/error.hpp"
#include "misinfo/stats.hpp"
#include "misinfo/text.hpp"

namespace misinfo::lingua {

struct Counts {
  int words = 0;
  int sentences = 0;
  int syllables = 0;

  bool operator==(const Counts&) const = default;
};

namespace detail {

inline std::string lower_ascii(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = char(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

inline bool is_word_char(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

/// Strips leading and trailing punctuation; keeps inner apostrophes/hyphens.
inline std::string_view strip_punct(std::string_view tok) {
  std::size_t b = 0, e = tok.size();
  while (b < e && !is_word_char(static_cast<unsigned char>(tok[b]))) ++b;
  while (e > b && !is_word_char(static_cast<unsigned char>(tok[e - 1]))) --e;
  return tok.substr(b, e - b);
}

inline const std::unordered_set<std::string>& abbreviations() {
  static const std::unordered_set<std::string> abbr = {
      "mr.", "mrs.", "ms.", "dr.", "prof.", "sr.", "jr.", "st.", "vs.", "etc.", "e.g.", "i.e.",
      "u.s.", "u.k.", "u.n.", "no.", "inc.", "ltd.", "co.", "corp.", "gov.", "sen.", "rep.",
      "gen.", "jan.", "feb.", "mar.", "apr.", "aug.", "sep.", "sept.", "oct.", "nov.", "dec.",
      "a.m.", "p.m.", "approx.", "dept.", "est.", "fig.", "mt.", "ft."};
  return abbr;
}

/// Words whose vowel-group count is off; counts checked by hand.
inline const std::unordered_map<std::string, int>& syllable_exceptions() {
  static const std::unordered_map<std::string, int> lex = {
      {"business", 2}, {"every", 2},    {"area", 3},      {"idea", 3},     {"create", 2},
      {"created", 3},  {"poem", 2},     {"science", 2},   {"being", 2},    {"going", 2},
      {"doing", 2},    {"quiet", 2},    {"react", 2},     {"video", 3},    {"radio", 3},
      {"media", 3},    {"reality", 4},  {"real", 1},      {"people", 2},   {"evening", 2},
      {"different", 3}, {"interest", 3}, {"vaccine", 2},  {"vaccines", 2}, {"social", 2},
      {"covid", 2},    {"the", 1},      {"biased", 2},    {"naive", 2},    {"trial", 2},
      {"science's", 2}, {"via", 2},     {"diet", 2},      {"lion", 2},     {"violence", 3},
      {"scientist", 3}, {"scientists", 3}, {"experience", 4}, {"serious", 3}, {"previous", 3},
      {"obvious", 3},  {"various", 3},  {"period", 3},    {"material", 4}, {"official", 3},
      {"officials", 3}, {"special", 2}, {"especially", 4}, {"financial", 3}, {"potential", 3}};
  return lex;
}

inline bool is_vowel(char c) {
  return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u' || c == 'y';
}

}  // namespace detail

/// Vowel-group syllable estimate: each run of vowels (y included, except a
/// leading y) is one syllable; a silent final e, and -ed/-es endings that do
/// not form their own syllable, are dropped; every word has at least one.
inline int syllables(std::string_view word) {
  std::string w;
  for (char c : word)
    if (std::isalpha(static_cast<unsigned char>(c)))
      w.push_back(char(std::tolower(static_cast<unsigned char>(c))));
  if (w.empty()) return 1;
  if (auto it = detail::syllable_exceptions().find(w); it != detail::syllable_exceptions().end())
    return it->second;
  int groups = 0;
  bool prev_vowel = false;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const bool v = detail::is_vowel(w[i]) && !(i == 0 && w[i] == 'y');
    if (v && !prev_vowel) ++groups;
    prev_vowel = v;
  }
  const std::size_t n = w.size();
  auto consonant_at = [&](std::size_t i) { return !detail::is_vowel(w[i]); };
  if (n >= 3 && groups > 1) {
    const char last = w[n - 1];
    if (last == 'e' && consonant_at(n - 2)) {
      // final "le" after a consonant is voiced: table, little
      if (!(w[n - 2] == 'l' && n >= 3 && consonant_at(n - 3))) --groups;
    } else if (n >= 4 && w[n - 2] == 'e' && consonant_at(n - 3) && (last == 'd' || last == 's')) {
      const char before = w[n - 3];
      if (last == 'd' && before != 't' && before != 'd') --groups;
      if (last == 's' && std::string_view("sxzcgh").find(before) == std::string_view::npos &&
          !(before == 'l' && consonant_at(n - 4)))
        --groups;
    }
  }
  return std::max(1, groups);
}

inline Counts count_units(std::string_view text) {
  const auto tokens = text::split_whitespace(text);
  Counts c;
  bool open_sentence = false;
  for (auto tok : tokens) {
    const auto word = detail::strip_punct(tok);
    if (!word.empty()) {
      ++c.words;
      c.syllables += syllables(word);
      open_sentence = true;
    }
    const auto last = tok.find_last_not_of("\"')]}’”");
    const char end = last == std::string_view::npos ? '\0' : tok[last];
    if (end == '.' || end == '!' || end == '?') {
      if (end == '.' && detail::abbreviations().contains(detail::lower_ascii(tok.substr(0, last + 1))))
        continue;
      if (open_sentence) ++c.sentences;
      open_sentence = false;
    }
  }
  if (c.words == 0) throw Error(ErrorCode::EmptyText, "text has no words");
  if (open_sentence) ++c.sentences;
  return c;
}

inline double reading_ease(const Counts& c) {
  return 206.835 - 1.015 * (double(c.words) / c.sentences) -
         84.6 * (double(c.syllables) / c.words);
}

inline double fk_grade(const Counts& c) {
  return 0.39 * (double(c.words) / c.sentences) + 11.8 * (double(c.syllables) / c.words) - 15.59;
}

// ---------------------------------------------------------------------------
// Formality

enum class Pos { Noun, Adjective, Preposition, Article, Pronoun, Verb, Adverb, Interjection, Other };

namespace detail {

inline const std::unordered_map<std::string, Pos>& closed_class() {
  static const std::unordered_map<std::string, Pos> lex = [] {
    std::unordered_map<std::string, Pos> m;
    auto add = [&](Pos p, std::initializer_list<const char*> words) {
      for (auto w : words) m.emplace(w, p);
    };
    add(Pos::Article, {"a", "an", "the"});
    add(Pos::Preposition,
        {"of",     "in",      "on",      "at",     "by",     "for",    "with",   "about",
         "against", "between", "into",   "through", "during", "before", "after",  "above",
         "below",  "to",      "from",    "up",     "down",   "over",   "under",  "upon",
         "within", "without", "among",   "across", "behind", "beyond", "despite", "towards",
         "toward", "regarding", "concerning", "pursuant", "per", "via",  "onto",   "throughout",
         "notwithstanding", "amid", "beneath", "beside", "besides", "near", "off", "since",
         "until", "unto", "versus", "whereby", "thereof", "herein", "therein"});
    add(Pos::Pronoun,
        {"i",      "me",      "my",     "mine",   "myself", "you",     "your",   "yours",
         "yourself", "he",    "him",    "his",    "himself", "she",    "her",    "hers",
         "herself", "it",     "its",    "itself", "we",     "us",      "our",    "ours",
         "ourselves", "they", "them",   "their",  "theirs", "themselves", "who", "whom",
         "whose",  "someone", "anyone", "everyone", "nobody", "somebody", "anybody",
         "everybody", "something", "anything", "everything", "nothing", "ya", "u", "y'all"});
    add(Pos::Verb,
        {"is",    "are",   "was",   "were",  "be",     "been",   "am",     "do",    "does",
         "did",   "have",  "has",   "had",   "will",   "would",  "can",    "could", "should",
         "may",   "might", "must",  "shall", "get",    "gets",   "got",    "go",    "goes",
         "went",  "gone",  "know",  "knows", "knew",   "think",  "thinks", "thought", "say",
         "says",  "said",  "make",  "makes", "made",   "see",    "sees",   "saw",   "seen",
         "come",  "comes", "came",  "take",  "takes",  "took",   "want",   "wants", "look",
         "looks", "give",  "gives", "gave",  "tell",   "tells",  "told",   "feel",  "feels",
         "felt",  "seem",  "seems", "let",   "lets",   "put",    "keep",   "keeps", "believe",
         "believes", "mean", "means", "need", "needs", "show",   "shows",  "find",  "finds",
         "gonna", "wanna", "gotta", "ain't", "isn't", "aren't", "wasn't", "weren't", "don't",
         "doesn't", "didn't", "won't", "can't", "couldn't", "shouldn't", "wouldn't", "haven't",
         "hasn't", "hadn't", "spread", "claim", "claims", "share", "shares", "trust"});
    add(Pos::Adverb,
        {"not",    "very",    "really", "just",   "so",     "too",    "also",   "never",
         "always", "often",   "here",   "there",  "now",    "then",   "still",  "even",
         "already", "again",  "ever",   "soon",   "almost", "quite",  "rather", "maybe",
         "perhaps", "totally", "literally", "basically", "anyway", "yet", "once", "instead",
         "away",   "back",    "well",   "pretty", "super",  "kinda",  "sorta",  "hardly",
         "thus",   "hence",   "therefore", "however", "moreover", "furthermore", "nevertheless",
         "only",   "why",     "how",    "where",  "when"});
    add(Pos::Interjection,
        {"oh",  "wow", "hey", "lol", "omg", "ugh", "yeah", "yep", "nope", "haha", "hah", "ha",
         "whoa", "ok", "okay", "dude", "duh", "huh", "yikes", "oops", "gosh", "meh", "lmao",
         "bruh", "yo", "ah", "eh", "hmm", "um", "uh", "nah", "wtf", "smh"});
    add(Pos::Other,
        {"and", "or", "but", "nor", "if", "because", "although", "though", "while", "whereas",
         "unless", "whether", "than", "that", "this", "these", "those", "which", "what",
         "some", "any", "no", "each", "all", "both", "either", "neither", "such", "other",
         "another", "many", "much", "more", "most", "few", "several", "as"});
    return m;
  }();
  return lex;
}

inline bool ends_with(std::string_view w, std::string_view suffix) {
  return w.size() > suffix.size() + 1 && w.substr(w.size() - suffix.size()) == suffix;
}

}  // namespace detail

/// Rule-based part-of-speech guess for one lowercase word: closed-class
/// lexicons, then derivational suffixes, then noun.
inline Pos tag_word(std::string_view word) {
  const std::string w = detail::lower_ascii(word);
  if (auto it = detail::closed_class().find(w); it != detail::closed_class().end()) return it->second;
  if (!w.empty() && std::all_of(w.begin(), w.end(), [](char c) {
        return std::isdigit(static_cast<unsigned char>(c)) || c == ',' || c == '.' || c == '%';
      }))
    return Pos::Noun;
  if (const auto apos = w.find('\''); apos != std::string::npos) {
    const auto tail = std::string_view(w).substr(apos);
    if (tail == "'m" || tail == "'re" || tail == "'ve" || tail == "'ll" || tail == "'d")
      return Pos::Pronoun;  // I'm, you're, we've: subject pronoun dominates
    if (tail == "n't") return Pos::Verb;
  }
  for (auto s : {"tion", "sion", "ment", "ness", "ity", "ance", "ence", "ship", "ism", "ist",
                 "ure", "dom", "hood", "ogy"})
    if (detail::ends_with(w, s)) return Pos::Noun;
  if (detail::ends_with(w, "ly")) return Pos::Adverb;
  for (auto s : {"ous", "ful", "ive", "able", "ible", "al", "ic", "less", "ish", "ary", "ian",
                 "ant", "ent"})
    if (detail::ends_with(w, s)) return Pos::Adjective;
  for (auto s : {"ing", "ed", "ize", "ise", "ify", "ates", "ate"})
    if (detail::ends_with(w, s)) return Pos::Verb;
  return Pos::Noun;
}

/// Heylighen-Dewaele F = (noun + adj + prep + art - pron - verb - adv - intj
/// + 100) / 2 over percentage frequencies, clamped to 0..100.
inline double heylighen_dewaele(std::string_view text) {
  int total = 0;
  std::map<Pos, int> n;
  for (auto tok : text::split_whitespace(text)) {
    const auto word = detail::strip_punct(tok);
    if (word.empty()) continue;
    ++total;
    ++n[tag_word(word)];
  }
  if (total == 0) throw Error(ErrorCode::EmptyText, "text has no words");
  auto pct = [&](Pos p) { return 100.0 * n[p] / total; };
  const double f = (pct(Pos::Noun) + pct(Pos::Adjective) + pct(Pos::Preposition) +
                    pct(Pos::Article) - pct(Pos::Pronoun) - pct(Pos::Verb) - pct(Pos::Adverb) -
                    pct(Pos::Interjection) + 100.0) /
                   2.0;
  return std::clamp(f, 0.0, 100.0);
}

using FormalityScorer = std::function<double(std::string_view)>;

inline constexpr std::string_view kDefaultScorer = "heylighen-dewaele";

/// Named scorers. An external model can be registered under its own name.
class ScorerRegistry {
 public:
  static ScorerRegistry& instance() {
    static ScorerRegistry r;
    return r;
  }

  void add(std::string name, FormalityScorer fn) {
    std::lock_guard lock(mutex_);
    scorers_[std::move(name)] = std::move(fn);
  }

  FormalityScorer get(std::string_view name) const {
    std::lock_guard lock(mutex_);
    auto it = scorers_.find(std::string(name));
    if (it == scorers_.end())
      throw Error(ErrorCode::ScorerUnavailable, "no formality scorer named '" + std::string(name) + "'");
    return it->second;
  }

 private:
  ScorerRegistry() { scorers_.emplace(std::string(kDefaultScorer), heylighen_dewaele); }
  mutable std::mutex mutex_;
  std::map<std::string, FormalityScorer> scorers_;
};

inline double formality(std::string_view text, std::string_view scorer = kDefaultScorer) {
  return ScorerRegistry::instance().get(scorer)(text);
}

struct TextMetrics {
  int words = 0;
  int sentences = 0;
  int syllables = 0;
  int length_words = 0;
  double reading_ease = 0;
  double fk_grade = 0;
  double formality = 0;
};

inline TextMetrics measure(std::string_view text, std::string_view scorer = kDefaultScorer) {
  const auto c = count_units(text);
  TextMetrics m;
  m.words = c.words;
  m.sentences = c.sentences;
  m.syllables = c.syllables;
  m.length_words = c.words;
  m.reading_ease = lingua::reading_ease(c);
  m.fk_grade = lingua::fk_grade(c);
  m.formality = lingua::formality(text, scorer);
  return m;
}

// ---------------------------------------------------------------------------
// Group comparison

struct MetricSummary {
  double mean = 0;
  std::optional<double> p;  // vs the reference group
  bool starred = false;
};

struct GroupRow {
  std::string group;
  std::size_t n = 0;
  MetricSummary length;
  MetricSummary readability;  // Flesch reading ease
  MetricSummary grade;        // Flesch-Kincaid grade
  MetricSummary formality;
};

struct GroupComparison {
  std::string reference;
  double alpha = 0.05;
  std::vector<GroupRow> rows;
};

struct CompareOptions {
  std::string reference = "g1";
  double alpha = 0.05;
  std::string scorer = std::string(kDefaultScorer);
  std::vector<std::string> order;  // row order; default: reference then sorted
};

/// Mean metrics per group and a two-sided Student t-test of every group
/// against the reference group; p < alpha is starred.
inline GroupComparison group_comparison(const std::map<std::string, std::vector<std::string>>& groups,
                                        const CompareOptions& opt = {}) {
  if (!groups.contains(opt.reference))
    throw Error(ErrorCode::EmptySelection, "reference group '" + opt.reference + "' has no texts");
  std::vector<std::string> order = opt.order;
  if (order.empty()) {
    order.push_back(opt.reference);
    for (const auto& [g, texts] : groups)
      if (g != opt.reference) order.push_back(g);
  }
  struct Columns {
    std::vector<double> length, ease, grade, formal;
  };
  std::map<std::string, Columns> cols;
  for (const auto& g : order) {
    auto it = groups.find(g);
    if (it == groups.end() || it->second.size() < 2)
      throw Error(ErrorCode::GroupTooSmall, "group '" + g + "' needs at least 2 texts");
    auto& c = cols[g];
    for (const auto& t : it->second) {
      const auto m = measure(t, opt.scorer);
      c.length.push_back(m.length_words);
      c.ease.push_back(m.reading_ease);
      c.grade.push_back(m.fk_grade);
      c.formal.push_back(m.formality);
    }
  }
  GroupComparison out{opt.reference, opt.alpha, {}};
  const auto& ref = cols.at(opt.reference);
  auto summarize = [&](const std::vector<double>& v, const std::vector<double>& r, bool is_ref) {
    MetricSummary s{stats::mean(v), std::nullopt, false};
    if (!is_ref) {
      s.p = stats::student_t_test(v, r).p;
      s.starred = *s.p < opt.alpha;
    }
    return s;
  };
  for (const auto& g : order) {
    const auto& c = cols.at(g);
    const bool is_ref = g == opt.reference;
    out.rows.push_back({g, c.length.size(), summarize(c.length, ref.length, is_ref),
                        summarize(c.ease, ref.ease, is_ref), summarize(c.grade, ref.grade, is_ref),
                        summarize(c.formal, ref.formal, is_ref)});
  }
  return out;
}

/// Reads {"group": ..., "text": ...} lines.
inline std::map<std::string, std::vector<std::string>> read_grouped_texts(std::istream& in) {
  std::map<std::string, std::vector<std::string>> groups;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = json::parse(line);
      groups[j.at("group").get<std::string>()].push_back(j.at("text").get<std::string>());
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ParseError, e.what(), "line " + std::to_string(line_no));
    }
  }
  return groups;
}

inline std::string format_comparison(const GroupComparison& cmp) {
  auto cell = [](const MetricSummary& m) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f%s", m.mean, m.starred ? "*" : "");
    return std::string(buf);
  };
  std::ostringstream out;
  out << std::left << std::setw(10) << "Group" << std::right << std::setw(6) << "n"
      << std::setw(14) << "Avg. length" << std::setw(18) << "Avg. readability" << std::setw(12)
      << "FK grade" << std::setw(16) << "Avg. formality" << "\n";
  for (const auto& r : cmp.rows)
    out << std::left << std::setw(10) << r.group << std::right << std::setw(6) << r.n
        << std::setw(14) << cell(r.length) << std::setw(18) << cell(r.readability)
        << std::setw(12) << cell(r.grade) << std::setw(16) << cell(r.formality) << "\n";
  out << "* p < " << cmp.alpha << " vs " << cmp.reference << " (two-sided t-test)\n";
  return out.str();
}

inline json to_json(const GroupComparison& cmp) {
  auto metric = [](const MetricSummary& m) {
    return json{{"mean", m.mean}, {"p", m.p ? json(*m.p) : json(nullptr)}, {"starred", m.starred}};
  };
  json rows = json::array();
  for (const auto& r : cmp.rows)
    rows.push_back({{"group", r.group},
                    {"n", r.n},
                    {"length", metric(r.length)},
                    {"readability", metric(r.readability)},
                    {"fk_grade", metric(r.grade)},
                    {"formality", metric(r.formality)}});
  return json{{"reference", cmp.reference}, {"alpha", cmp.alpha}, {"rows", rows}};
}

}  // namespace misinfo::lingua
