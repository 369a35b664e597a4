#pragma once

#include <array>
#include <cstddef>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "error.hpp"
#include "text.hpp"

namespace metalvis::corpus {

enum class Status { active, inactive, unknown };

inline std::string_view to_string(Status s) {
  switch (s) {
    case Status::active: return "active";
    case Status::inactive: return "inactive";
    case Status::unknown: break;
  }
  return "unknown";
}

// Case-insensitive. Metal-archives uses several spellings for bands that
// stopped; anything not listed here is unknown.
inline Status parse_status(std::string_view raw) {
  const std::string s = text::squeeze(text::lower(raw));
  if (s == "active") return Status::active;
  static const std::array<std::string_view, 6> inactive = {
      "inactive", "split-up", "split up", "on hold", "changed name", "disbanded"};
  for (auto v : inactive)
    if (s == v) return Status::inactive;
  return Status::unknown;
}

struct BandRecord {
  std::string id;
  std::string name;
  std::string genre_raw;
  std::set<std::string> genres;
  std::set<std::string> themes;
  std::optional<std::string> label;
  Status status = Status::unknown;
  std::optional<std::string> country;
  std::string logo_path;

  bool operator==(const BandRecord&) const = default;
};

namespace detail {

// One slash-group such as "Death/Thrash Metal". Single-word tokens borrow
// the terminal word of the next multi-word token in the same group.
inline void expand_slash_group(std::string_view group, std::set<std::string>& out) {
  std::vector<std::vector<std::string>> tokens;
  std::size_t start = 0;
  while (start <= group.size()) {
    auto end = group.find('/', start);
    if (end == std::string_view::npos) end = group.size();
    auto words = text::split_words(group.substr(start, end - start));
    if (!words.empty()) tokens.push_back(std::move(words));
    start = end + 1;
  }
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    auto words = tokens[i];
    if (words.size() == 1) {
      for (std::size_t j = i + 1; j < tokens.size(); ++j) {
        if (tokens[j].size() < 2) continue;
        const auto& terminal = tokens[j].back();
        if (words.front() != terminal) words.push_back(terminal);
        break;
      }
    }
    std::string tag;
    for (const auto& w : words) {
      if (!tag.empty()) tag.push_back(' ');
      tag += w;
    }
    out.insert(std::move(tag));
  }
}

}  // namespace detail

// Splits a raw genre string into normalized tags: top-level ',' or ';'
// separate segments, parenthesized qualifiers are dropped, and '/' splits
// a segment into alternatives sharing its terminal word.
inline std::set<std::string> parse_genre_string(std::string_view raw) {
  std::set<std::string> tags;
  const std::string lowered = text::lower(raw);
  std::string segment;
  int depth = 0;
  const auto flush = [&] {
    detail::expand_slash_group(segment, tags);
    segment.clear();
  };
  for (char c : lowered) {
    if (c == '(') {
      ++depth;
    } else if (c == ')') {
      if (depth > 0) --depth;
    } else if (depth > 0) {
      continue;
    } else if (c == ',' || c == ';') {
      flush();
    } else {
      segment.push_back(c);
    }
  }
  flush();
  return tags;
}

namespace detail {

inline std::optional<std::string> optional_string(const nlohmann::json& obj, const char* key,
                                                  std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string())
    throw Error("manifest line " + std::to_string(line) + ": '" + key + "' must be a string or null");
  return it->get<std::string>();
}

inline std::string required_string(const nlohmann::json& obj, const char* key, std::size_t line) {
  auto value = optional_string(obj, key, line);
  if (!value)
    throw Error("manifest line " + std::to_string(line) + ": missing string field '" + key + "'");
  return *value;
}

}  // namespace detail

inline BandRecord record_from_json(const nlohmann::json& obj, std::size_t line) {
  if (!obj.is_object())
    throw Error("manifest line " + std::to_string(line) + ": expected a JSON object");
  BandRecord r;
  r.id = detail::required_string(obj, "id", line);
  if (r.id.empty()) throw Error("manifest line " + std::to_string(line) + ": empty id");
  r.name = detail::required_string(obj, "name", line);
  r.genre_raw = detail::optional_string(obj, "genre", line).value_or("");
  r.genres = parse_genre_string(r.genre_raw);
  if (auto it = obj.find("themes"); it != obj.end() && !it->is_null()) {
    if (!it->is_array())
      throw Error("manifest line " + std::to_string(line) + ": 'themes' must be an array");
    for (const auto& t : *it) {
      if (!t.is_string())
        throw Error("manifest line " + std::to_string(line) + ": non-string theme");
      auto norm = text::squeeze(text::lower(t.get<std::string>()));
      if (!norm.empty()) r.themes.insert(std::move(norm));
    }
  }
  r.label = detail::optional_string(obj, "label", line);
  r.status = parse_status(detail::optional_string(obj, "status", line).value_or(""));
  r.country = detail::optional_string(obj, "country", line);
  r.logo_path = detail::optional_string(obj, "logo", line).value_or("");
  return r;
}

inline nlohmann::json record_to_json(const BandRecord& r) {
  nlohmann::json themes = nlohmann::json::array();
  for (const auto& t : r.themes) themes.push_back(t);
  return {{"id", r.id},
          {"name", r.name},
          {"genre", r.genre_raw},
          {"themes", std::move(themes)},
          {"label", r.label ? nlohmann::json(*r.label) : nlohmann::json(nullptr)},
          {"status", std::string(to_string(r.status))},
          {"country", r.country ? nlohmann::json(*r.country) : nlohmann::json(nullptr)},
          {"logo", r.logo_path}};
}

// JSON-lines manifest, one band per non-blank line. Errors carry the
// 1-based line number.
inline std::vector<BandRecord> parse_manifest(std::istream& in) {
  std::vector<BandRecord> records;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error("manifest line " + std::to_string(line_no) + ": malformed JSON (" + e.what() + ")");
    }
    auto record = record_from_json(obj, line_no);
    if (!seen.insert(record.id).second)
      throw Error("manifest line " + std::to_string(line_no) + ": duplicate id '" + record.id + "'");
    records.push_back(std::move(record));
  }
  return records;
}

inline void write_manifest(std::ostream& out, const std::vector<BandRecord>& records) {
  for (const auto& r : records) out << record_to_json(r).dump() << '\n';
}

// ---------------------------------------------------------------------------
// Filtering

inline constexpr std::array<std::string_view, 4> kFilterRules = {
    "inactive", "unsigned", "no_themes", "single_band_label"};

struct FilterReport {
  std::size_t total_in = 0;
  std::size_t kept = 0;
  std::map<std::string, std::size_t> dropped_by_rule;

  bool operator==(const FilterReport&) const = default;
};

inline nlohmann::json to_json(const FilterReport& report) {
  nlohmann::json dropped = nlohmann::json::object();
  for (auto rule : kFilterRules) {
    auto it = report.dropped_by_rule.find(std::string(rule));
    dropped[std::string(rule)] = it == report.dropped_by_rule.end() ? 0 : it->second;
  }
  return {{"total_in", report.total_in}, {"kept", report.kept}, {"dropped_by_rule", dropped}};
}

struct FilterResult {
  std::vector<BandRecord> kept;
  FilterReport report;
};

inline bool is_unsigned_label(const std::optional<std::string>& label) {
  return !label || text::lower(text::trim(*label)) == "unsigned/independent";
}

// Drops records by the first failing rule, in kFilterRules order. Label
// membership is counted over the whole input, case-insensitively.
inline FilterResult apply_filters(const std::vector<BandRecord>& records) {
  std::unordered_map<std::string, std::size_t> label_counts;
  for (const auto& r : records)
    if (r.label) ++label_counts[text::lower(text::trim(*r.label))];

  FilterResult result;
  result.report.total_in = records.size();
  for (auto rule : kFilterRules) result.report.dropped_by_rule[std::string(rule)] = 0;

  for (const auto& r : records) {
    std::string_view failed;
    if (r.status != Status::active) {
      failed = kFilterRules[0];
    } else if (is_unsigned_label(r.label)) {
      failed = kFilterRules[1];
    } else if (r.themes.empty()) {
      failed = kFilterRules[2];
    } else if (label_counts[text::lower(text::trim(*r.label))] < 2) {
      failed = kFilterRules[3];
    }
    if (failed.empty()) {
      result.kept.push_back(r);
    } else {
      ++result.report.dropped_by_rule[std::string(failed)];
    }
  }
  result.report.kept = result.kept.size();
  return result;
}

// ---------------------------------------------------------------------------
// Vocabulary

struct TagVocabulary {
  std::vector<std::string> tags;
  std::vector<std::size_t> frequencies;

  std::size_t size() const { return tags.size(); }

  // Position of tag, or size() when absent.
  std::size_t index_of(std::string_view tag) const {
    for (std::size_t i = 0; i < tags.size(); ++i)
      if (tags[i] == tag) return i;
    return tags.size();
  }

  bool operator==(const TagVocabulary&) const = default;
};

inline TagVocabulary build_vocabulary(const std::vector<BandRecord>& records, std::size_t k) {
  if (k < 1) throw Error("vocabulary size must be at least 1");
  std::map<std::string, std::size_t> counts;
  for (const auto& r : records)
    for (const auto& g : r.genres) ++counts[g];

  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > k) ranked.resize(k);

  TagVocabulary vocab;
  for (auto& [tag, n] : ranked) {
    vocab.tags.push_back(tag);
    vocab.frequencies.push_back(n);
  }
  return vocab;
}

inline std::vector<double> tag_vector(const BandRecord& record, const TagVocabulary& vocab) {
  if (vocab.tags.empty()) throw Error("tag_vector needs a non-empty vocabulary");
  std::vector<double> v(vocab.size(), 0.0);
  for (std::size_t i = 0; i < vocab.size(); ++i)
    if (record.genres.count(vocab.tags[i])) v[i] = 1.0;
  return v;
}

// First tag of the record in vocabulary order, empty when none match.
inline std::string primary_genre(const BandRecord& record, const TagVocabulary& vocab) {
  for (const auto& t : vocab.tags)
    if (record.genres.count(t)) return t;
  return {};
}

}  // namespace metalvis::corpus
