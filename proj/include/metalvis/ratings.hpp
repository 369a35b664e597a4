#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "error.hpp"
#include "text.hpp"

// The 18-dimension logo design space and the statistics used to compare
// raters and dimensions.
namespace metalvis::ratings {

enum class DimensionGroup { bertin, letter_style, whole_logo, graphics };

inline std::string_view to_string(DimensionGroup g) {
  switch (g) {
    case DimensionGroup::bertin: return "bertin";
    case DimensionGroup::letter_style: return "letter_style";
    case DimensionGroup::whole_logo: return "whole_logo";
    case DimensionGroup::graphics: break;
  }
  return "graphics";
}

struct DimensionDef {
  std::string_view name;
  DimensionGroup group;
  std::string_view prompt;
};

inline constexpr std::size_t kDimensionCount = 18;

inline constexpr std::array<DimensionDef, kDimensionCount> kDimensions = {{
    {"Thickness", DimensionGroup::bertin, "How thick are the letters?"},
    {"Size", DimensionGroup::bertin, "How much variation is there in letter size?"},
    {"Texture", DimensionGroup::bertin, "How much texture is there in the letter rendering?"},
    {"Orientation", DimensionGroup::bertin, "How much variation is there from standard vertical letter orientation?"},
    {"Color", DimensionGroup::bertin, "How many colors (hues) does the logo have in terms of color range?"},
    {"Novelty", DimensionGroup::letter_style, "How original is the font used in the letters of the logo?"},
    {"Angularity", DimensionGroup::letter_style, "How angular are the outlines of the letters?"},
    {"Constraints", DimensionGroup::letter_style, "How fixed are the angles of the letter segments?"},
    {"Sharpness", DimensionGroup::letter_style, "How many prickly and sharp elements do the letters have?"},
    {"Tightness", DimensionGroup::letter_style, "How tight, clean, and precise are the letters?"},
    {"Symmetry", DimensionGroup::whole_logo, "To what degree does the logo have vertical axis symmetry?"},
    {"Space", DimensionGroup::whole_logo, "How much negative space is left between letters?"},
    {"Connectivity", DimensionGroup::whole_logo, "How connected are the letters?"},
    {"Dimensionality", DimensionGroup::whole_logo, "How 3D does the logo look?"},
    {"Deviation", DimensionGroup::whole_logo, "How much does the lettering deviate from the baseline?"},
    {"Congruence", DimensionGroup::graphics, "How congruent and meaningful are any graphical elements with respect to band name or genre?"},
    {"Abstraction", DimensionGroup::graphics, "How abstract are any graphical elements?"},
    {"Integrity", DimensionGroup::graphics, "How fully are graphical elements integrated into the logo?"},
}};

// Case-insensitive; "Originality" is accepted as an alias of Novelty.
inline std::optional<std::size_t> dimension_index(std::string_view name) {
  const std::string key = text::lower(text::trim(name));
  if (key == "originality") return 5;
  for (std::size_t i = 0; i < kDimensions.size(); ++i)
    if (text::lower(kDimensions[i].name) == key) return i;
  return std::nullopt;
}

using Profile = std::array<double, kDimensionCount>;

// Complete rater x logo x dimension table of 1..5 scores.
class RatingTable {
 public:
  RatingTable(std::vector<std::string> raters, std::vector<std::string> logos)
      : raters_(std::move(raters)), logos_(std::move(logos)) {
    std::sort(raters_.begin(), raters_.end());
    std::sort(logos_.begin(), logos_.end());
    if (std::adjacent_find(raters_.begin(), raters_.end()) != raters_.end()) throw Error("duplicate rater id");
    if (std::adjacent_find(logos_.begin(), logos_.end()) != logos_.end()) throw Error("duplicate logo id");
    scores_.assign(raters_.size() * logos_.size() * kDimensionCount, 0);
  }

  const std::vector<std::string>& raters() const { return raters_; }
  const std::vector<std::string>& logos() const { return logos_; }

  std::optional<std::size_t> rater_index(std::string_view id) const { return find(raters_, id); }
  std::optional<std::size_t> logo_index(std::string_view id) const { return find(logos_, id); }

  int score(std::size_t rater, std::size_t logo, std::size_t dim) const { return scores_[slot(rater, logo, dim)]; }

  void set(std::size_t rater, std::size_t logo, std::size_t dim, int value) {
    if (value < 1 || value > 5)
      throw Error("score " + std::to_string(value) + " out of range 1..5 at (" + raters_[rater] + ", " +
                  logos_[logo] + ", " + std::string(kDimensions[dim].name) + ")");
    scores_[slot(rater, logo, dim)] = value;
  }

  // Optional per-logo intended genre; carried along, unused by the statistics.
  std::map<std::string, std::string> intended_genre;

 private:
  static std::optional<std::size_t> find(const std::vector<std::string>& v, std::string_view id) {
    auto it = std::lower_bound(v.begin(), v.end(), id);
    if (it == v.end() || *it != id) return std::nullopt;
    return static_cast<std::size_t>(it - v.begin());
  }

  std::size_t slot(std::size_t rater, std::size_t logo, std::size_t dim) const {
    return (rater * logos_.size() + logo) * kDimensionCount + dim;
  }

  std::vector<std::string> raters_;
  std::vector<std::string> logos_;
  std::vector<int> scores_;
};

namespace detail {

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        current.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        current.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back(text::trim(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  fields.emplace_back(text::trim(current));
  return fields;
}

}  // namespace detail

// CSV with header rater,logo,dimension,score and an optional trailing
// intended_genre column. Every (rater, logo, dimension) cell of the
// cross-product must appear exactly once.
inline RatingTable load_ratings(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty()) continue;
    header = detail::split_csv_line(line);
    break;
  }
  for (auto& h : header) h = text::lower(h);
  const bool has_genre = header.size() == 5 && header[4] == "intended_genre";
  if (header.size() < 4 || header[0] != "rater" || header[1] != "logo" || header[2] != "dimension" ||
      header[3] != "score" || (header.size() == 5 && !has_genre) || header.size() > 5)
    throw Error("ratings header must be rater,logo,dimension,score[,intended_genre]");

  struct Row {
    std::string rater, logo;
    std::size_t dim;
    int score;
    std::size_t line;
  };
  std::vector<Row> rows;
  std::set<std::string> raters, logos;
  std::map<std::string, std::string> genres;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != header.size())
      throw Error("ratings line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                  " fields");
    const auto dim = dimension_index(f[2]);
    if (!dim) throw Error("ratings line " + std::to_string(line_no) + ": unknown dimension '" + f[2] + "'");
    int score = 0;
    std::size_t used = 0;
    try {
      score = std::stoi(f[3], &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != f[3].size())
      throw Error("ratings line " + std::to_string(line_no) + ": score '" + f[3] + "' is not an integer");
    if (score < 1 || score > 5)
      throw Error("ratings line " + std::to_string(line_no) + ": score " + std::to_string(score) +
                  " out of range 1..5 at (" + f[0] + ", " + f[1] + ", " + std::string(kDimensions[*dim].name) + ")");
    if (f[0].empty() || f[1].empty())
      throw Error("ratings line " + std::to_string(line_no) + ": empty rater or logo");
    if (has_genre && !f[4].empty()) genres[f[1]] = f[4];
    raters.insert(f[0]);
    logos.insert(f[1]);
    rows.push_back({f[0], f[1], *dim, score, line_no});
  }
  if (rows.empty()) throw Error("ratings table is empty");

  RatingTable table({raters.begin(), raters.end()}, {logos.begin(), logos.end()});
  table.intended_genre = std::move(genres);
  std::vector<bool> filled(raters.size() * logos.size() * kDimensionCount, false);
  for (const auto& r : rows) {
    const auto ri = *table.rater_index(r.rater);
    const auto li = *table.logo_index(r.logo);
    const std::size_t key = (ri * logos.size() + li) * kDimensionCount + r.dim;
    if (filled[key])
      throw Error("ratings line " + std::to_string(r.line) + ": duplicate cell (" + r.rater + ", " + r.logo + ", " +
                  std::string(kDimensions[r.dim].name) + ")");
    filled[key] = true;
    table.set(ri, li, r.dim, r.score);
  }
  std::string missing;
  std::size_t missing_count = 0;
  for (std::size_t ri = 0; ri < table.raters().size(); ++ri)
    for (std::size_t li = 0; li < table.logos().size(); ++li)
      for (std::size_t d = 0; d < kDimensionCount; ++d)
        if (!filled[(ri * logos.size() + li) * kDimensionCount + d]) {
          if (++missing_count <= 20)
            missing += " (" + table.raters()[ri] + ", " + table.logos()[li] + ", " + std::string(kDimensions[d].name) + ")";
        }
  if (missing_count > 0)
    throw Error("ratings table incomplete, " + std::to_string(missing_count) + " missing cell(s):" + missing +
                (missing_count > 20 ? " ..." : ""));
  return table;
}

// ---------------------------------------------------------------------------
// Statistics. Variances and standard deviations use the n-1 divisor.

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double sample_variance(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

inline double sample_sd(const std::vector<double>& v) { return std::sqrt(sample_variance(v)); }

struct DimensionSummary {
  double mean = 0.0;
  double sd = 0.0;
};

using LogoProfile = std::array<DimensionSummary, kDimensionCount>;

inline LogoProfile logo_profile(const RatingTable& table, std::string_view logo) {
  const auto li = table.logo_index(logo);
  if (!li) throw Error("unknown logo '" + std::string(logo) + "'");
  LogoProfile profile;
  std::vector<double> column(table.raters().size());
  for (std::size_t d = 0; d < kDimensionCount; ++d) {
    for (std::size_t r = 0; r < column.size(); ++r) column[r] = table.score(r, *li, d);
    profile[d] = {mean(column), sample_sd(column)};
  }
  return profile;
}

struct LogoDisagreement {
  std::string logo;
  double score;  // mean over dimensions of the rater sd
};

inline std::vector<LogoDisagreement> disagreement_ranking(const RatingTable& table) {
  if (table.raters().size() < 2) throw Error("disagreement ranking needs at least two raters");
  std::vector<LogoDisagreement> out;
  for (const auto& logo : table.logos()) {
    const auto profile = logo_profile(table, logo);
    double s = 0.0;
    for (const auto& d : profile) s += d.sd;
    out.push_back({logo, s / static_cast<double>(kDimensionCount)});
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.score > b.score; });
  return out;
}

// Bimodality coefficient from bias-corrected sample skewness and excess
// kurtosis. Undefined for n < 4 or zero variance.
inline std::optional<double> bimodality_coefficient(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  if (v.size() < 4) return std::nullopt;
  const double m = mean(v);
  double m2 = 0, m3 = 0, m4 = 0;
  for (double x : v) {
    const double d = x - m;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  if (m2 <= 0.0) return std::nullopt;
  const double g1 = std::sqrt(n * (n - 1.0)) / (n - 2.0) * m3 / std::pow(m2, 1.5);
  const double g2 = (n - 1.0) / ((n - 2.0) * (n - 3.0)) * ((n + 1.0) * (m4 / (m2 * m2) - 3.0) + 6.0);
  return (g1 * g1 + 1.0) / (g2 + 3.0 * (n - 1.0) * (n - 1.0) / ((n - 2.0) * (n - 3.0)));
}

inline constexpr double kBimodalThreshold = 5.0 / 9.0;

struct DimensionSpread {
  double discriminability = 0.0;
  std::optional<double> bimodality;
  std::optional<bool> bimodal;
};

inline std::vector<double> logo_means(const RatingTable& table, std::size_t dim) {
  std::vector<double> means;
  std::vector<double> column(table.raters().size());
  for (std::size_t l = 0; l < table.logos().size(); ++l) {
    for (std::size_t r = 0; r < column.size(); ++r) column[r] = table.score(r, l, dim);
    means.push_back(mean(column));
  }
  return means;
}

inline std::array<DimensionSpread, kDimensionCount> dimension_spread(const RatingTable& table) {
  if (table.logos().size() < 3) throw Error("dimension spread needs at least three logos");
  std::array<DimensionSpread, kDimensionCount> out;
  for (std::size_t d = 0; d < kDimensionCount; ++d) {
    const auto means = logo_means(table, d);
    out[d].discriminability = sample_variance(means);
    out[d].bimodality = bimodality_coefficient(means);
    if (out[d].bimodality) out[d].bimodal = *out[d].bimodality > kBimodalThreshold;
  }
  return out;
}

// Per dimension: mean over logos of |rater score - mean of the other raters|.
inline Profile rater_deviation(const RatingTable& table, std::string_view rater) {
  if (table.raters().size() < 2) throw Error("rater deviation needs at least two raters");
  const auto ri = table.rater_index(rater);
  if (!ri) throw Error("unknown rater '" + std::string(rater) + "'");
  const std::size_t others = table.raters().size() - 1;
  Profile out{};
  for (std::size_t d = 0; d < kDimensionCount; ++d) {
    double total = 0.0;
    for (std::size_t l = 0; l < table.logos().size(); ++l) {
      double rest = 0.0;
      for (std::size_t r = 0; r < table.raters().size(); ++r)
        if (r != *ri) rest += table.score(r, l, d);
      total += std::abs(table.score(*ri, l, d) - rest / static_cast<double>(others));
    }
    out[d] = total / static_cast<double>(table.logos().size());
  }
  return out;
}

// JSON report keyed by dimension and logo.
inline nlohmann::json stats_report(const RatingTable& table) {
  nlohmann::json report;
  report["raters"] = table.raters();
  report["logos"] = table.logos();

  nlohmann::json profiles = nlohmann::json::object();
  for (const auto& logo : table.logos()) {
    const auto p = logo_profile(table, logo);
    nlohmann::json dims = nlohmann::json::object();
    for (std::size_t d = 0; d < kDimensionCount; ++d)
      dims[std::string(kDimensions[d].name)] = {{"mean", p[d].mean}, {"sd", p[d].sd}};
    profiles[logo] = std::move(dims);
  }
  report["profiles"] = std::move(profiles);

  if (table.raters().size() >= 2) {
    nlohmann::json ranking = nlohmann::json::array();
    for (const auto& e : disagreement_ranking(table)) ranking.push_back({{"logo", e.logo}, {"score", e.score}});
    report["disagreement_ranking"] = std::move(ranking);
    nlohmann::json deviation = nlohmann::json::object();
    for (const auto& rater : table.raters()) {
      const auto dev = rater_deviation(table, rater);
      nlohmann::json dims = nlohmann::json::object();
      for (std::size_t d = 0; d < kDimensionCount; ++d) dims[std::string(kDimensions[d].name)] = dev[d];
      deviation[rater] = std::move(dims);
    }
    report["rater_deviation"] = std::move(deviation);
  }

  if (table.logos().size() >= 3) {
    const auto spread = dimension_spread(table);
    nlohmann::json dims = nlohmann::json::object();
    for (std::size_t d = 0; d < kDimensionCount; ++d) {
      nlohmann::json entry = {{"discriminability", spread[d].discriminability}};
      entry["bimodality_coefficient"] = spread[d].bimodality ? nlohmann::json(*spread[d].bimodality) : nlohmann::json(nullptr);
      entry["bimodal"] = spread[d].bimodal ? nlohmann::json(*spread[d].bimodal) : nlohmann::json(nullptr);
      dims[std::string(kDimensions[d].name)] = std::move(entry);
    }
    report["dimension_spread"] = std::move(dims);
  }
  return report;
}

}  // namespace metalvis::ratings
