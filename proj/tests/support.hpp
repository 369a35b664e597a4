#pragma once

// Test-side oracles. Nothing here calls into the code under test except
// for plain data types.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "metalvis/embed.hpp"

namespace testsupport {

namespace fs = std::filesystem;

#ifndef METALVIS_SOURCE_DIR
#define METALVIS_SOURCE_DIR "."
#endif

inline fs::path source_dir() { return METALVIS_SOURCE_DIR; }

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    std::random_device rd;
    path_ = fs::temp_directory_path() /
            ("metalvis-" + tag + "-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  fs::path path_;
};

// ---------------------------------------------------------------------------
// JSON schema subset: type, const, enum, required, properties,
// additionalProperties(false), items, oneOf, minimum, maximum,
// exclusiveMinimum, minLength, pattern.

inline bool type_matches(const nlohmann::json& v, const std::string& t) {
  if (t == "object") return v.is_object();
  if (t == "array") return v.is_array();
  if (t == "string") return v.is_string();
  if (t == "integer") return v.is_number_integer();
  if (t == "number") return v.is_number();
  if (t == "boolean") return v.is_boolean();
  if (t == "null") return v.is_null();
  return false;
}

inline void validate_schema(const nlohmann::json& schema, const nlohmann::json& v, const std::string& where,
                            std::vector<std::string>& errors) {
  if (errors.size() > 20) return;
  const auto fail = [&](const std::string& what) { errors.push_back(where + ": " + what); };
  if (schema.contains("type")) {
    const auto& t = schema["type"];
    bool ok = false;
    if (t.is_string()) ok = type_matches(v, t.get<std::string>());
    else
      for (const auto& x : t) ok = ok || type_matches(v, x.get<std::string>());
    if (!ok) return fail("type mismatch, expected " + t.dump());
  }
  if (schema.contains("const") && v != schema["const"]) fail("expected const " + schema["const"].dump());
  if (schema.contains("enum") &&
      std::find(schema["enum"].begin(), schema["enum"].end(), v) == schema["enum"].end())
    fail("value " + v.dump() + " not in enum");
  if (schema.contains("oneOf")) {
    int matches = 0;
    for (const auto& sub : schema["oneOf"]) {
      std::vector<std::string> sub_errors;
      validate_schema(sub, v, where, sub_errors);
      if (sub_errors.empty()) ++matches;
    }
    if (matches != 1) fail("oneOf matched " + std::to_string(matches) + " branches");
  }
  if (v.is_number()) {
    const double x = v.get<double>();
    if (schema.contains("minimum") && x < schema["minimum"].get<double>()) fail("below minimum");
    if (schema.contains("maximum") && x > schema["maximum"].get<double>()) fail("above maximum");
    if (schema.contains("exclusiveMinimum") && x <= schema["exclusiveMinimum"].get<double>())
      fail("not above exclusiveMinimum");
  }
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (schema.contains("minLength") && s.size() < schema["minLength"].get<std::size_t>()) fail("too short");
    if (schema.contains("pattern") && !std::regex_search(s, std::regex(schema["pattern"].get<std::string>())))
      fail("'" + s + "' does not match pattern");
  }
  if (v.is_object()) {
    if (schema.contains("required"))
      for (const auto& key : schema["required"])
        if (!v.contains(key.get<std::string>())) fail("missing required " + key.get<std::string>());
    const auto props = schema.value("properties", nlohmann::json::object());
    for (const auto& [key, value] : v.items()) {
      if (props.contains(key)) {
        validate_schema(props[key], value, where + "." + key, errors);
      } else if (schema.contains("additionalProperties") && schema["additionalProperties"] == false) {
        fail("unexpected property " + key);
      }
    }
  }
  if (v.is_array() && schema.contains("items"))
    for (std::size_t i = 0; i < v.size(); ++i)
      validate_schema(schema["items"], v[i], where + "[" + std::to_string(i) + "]", errors);
}

inline std::vector<std::string> validate_map_document(const nlohmann::json& doc) {
  const auto schema = nlohmann::json::parse(slurp(source_dir() / "schema" / "map_document.schema.json"));
  std::vector<std::string> errors;
  validate_schema(schema, doc, "$", errors);
  return errors;
}

// ---------------------------------------------------------------------------
// Silhouette over 2-D points with Euclidean distance, mean over all points.

inline double silhouette(const std::vector<std::array<double, 2>>& pts, const std::vector<std::size_t>& labels) {
  const std::size_t n = pts.size();
  std::size_t n_labels = 0;
  for (auto l : labels) n_labels = std::max(n_labels, l + 1);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> sum(n_labels, 0.0);
    std::vector<std::size_t> count(n_labels, 0);
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      sum[labels[j]] += std::hypot(pts[i][0] - pts[j][0], pts[i][1] - pts[j][1]);
      ++count[labels[j]];
    }
    if (count[labels[i]] == 0) continue;  // singleton cluster scores 0
    const double a = sum[labels[i]] / static_cast<double>(count[labels[i]]);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < n_labels; ++c)
      if (c != labels[i] && count[c] > 0) b = std::min(b, sum[c] / static_cast<double>(count[c]));
    total += (b - a) / std::max(a, b);
  }
  return total / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Fuzzy cross-entropy between the high-dimensional memberships and the
// low-dimensional curve, evaluated on a fixed pair set: 1000 pairs drawn
// from the graph's edges and 1000 uniformly random pairs.

struct PairSet {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<double> weights;
};

inline PairSet sample_pairs(const metalvis::embed::FuzzyGraph& graph, std::uint32_t seed = 2024) {
  std::mt19937 gen(seed);
  std::map<std::pair<std::size_t, std::size_t>, double> w;
  for (const auto& e : graph.edges) w[{e.i, e.j}] = e.weight;
  PairSet out;
  std::uniform_int_distribution<std::size_t> pick_edge(0, graph.edges.size() - 1);
  for (int s = 0; s < 1000; ++s) {
    const auto& e = graph.edges[pick_edge(gen)];
    out.pairs.emplace_back(e.i, e.j);
    out.weights.push_back(e.weight);
  }
  std::uniform_int_distribution<std::size_t> pick_node(0, graph.size() - 1);
  while (out.pairs.size() < 2000) {
    std::size_t i = pick_node(gen), j = pick_node(gen);
    if (i == j) continue;
    if (i > j) std::swap(i, j);
    auto it = w.find({i, j});
    out.pairs.emplace_back(i, j);
    out.weights.push_back(it == w.end() ? 0.0 : it->second);
  }
  return out;
}

inline double fuzzy_cross_entropy(const PairSet& set, const std::vector<std::array<double, 2>>& y, double a,
                                  double b) {
  constexpr double eps = 1e-4;
  double loss = 0.0;
  for (std::size_t p = 0; p < set.pairs.size(); ++p) {
    const auto [i, j] = set.pairs[p];
    const double d = std::hypot(y[i][0] - y[j][0], y[i][1] - y[j][1]);
    const double v = 1.0 / (1.0 + a * std::pow(d, 2.0 * b));
    const double w = set.weights[p];
    loss += -(w * std::log(std::max(v, eps)) + (1.0 - w) * std::log(std::max(1.0 - v, eps)));
  }
  return loss / static_cast<double>(set.pairs.size());
}

}  // namespace testsupport
