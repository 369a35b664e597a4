#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <string>
#include <string_view>

#include "embed.hpp"
#include "error.hpp"
#include "features.hpp"
#include "metrics.hpp"
#include "text.hpp"

namespace metalvis {

struct PipelineConfig {
  std::string name = "map";
  std::filesystem::path manifest;
  std::filesystem::path image_root;
  std::filesystem::path latents;
  features::FeatureKind feature_kind = features::FeatureKind::histogram;
  std::optional<metrics::Metric> metric;  // defaults per feature kind
  std::size_t vocab_size = 51;
  int histogram_bins = 4;
  int thumbnail_side = 64;
  bool apply_filters = true;
  embed::EmbedParams embed;
  double occupancy = 1.0;
  int background_resolution = 64;
  int background_k = 10;
  std::filesystem::path out = "out";
  std::filesystem::path maps_dir;  // serve; defaults to <out>/maps
  std::filesystem::path ui_root;
  std::string host = "127.0.0.1";
  int port = 8080;

  metrics::Metric resolved_metric() const { return metric.value_or(metrics::default_metric(feature_kind)); }
  std::filesystem::path resolved_maps_dir() const { return maps_dir.empty() ? out / "maps" : maps_dir; }
};

namespace detail {

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size())
    throw Error("config key '" + std::string(key) + "': cannot parse '" + std::string(value) + "'");
  return out;
}

inline bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true") return true;
  if (value == "false") return false;
  throw Error("config key '" + std::string(key) + "': expected true or false");
}

}  // namespace detail

// Sets one key. Used by the config file reader and by CLI overrides.
inline void set_config_value(PipelineConfig& c, std::string_view key, std::string_view value) {
  using detail::parse_number;
  if (key == "name") c.name = value;
  else if (key == "manifest") c.manifest = value;
  else if (key == "image_root") c.image_root = value;
  else if (key == "latents") c.latents = value;
  else if (key == "feature_kind") c.feature_kind = features::parse_feature_kind(value);
  else if (key == "metric") c.metric = metrics::parse_metric(value);
  else if (key == "vocab_size") c.vocab_size = parse_number<std::size_t>(key, value);
  else if (key == "histogram_bins") c.histogram_bins = parse_number<int>(key, value);
  else if (key == "thumbnail_side") c.thumbnail_side = parse_number<int>(key, value);
  else if (key == "apply_filters") c.apply_filters = detail::parse_bool(key, value);
  else if (key == "k") c.embed.k = parse_number<std::size_t>(key, value);
  else if (key == "min_dist") c.embed.min_dist = parse_number<double>(key, value);
  else if (key == "spread") c.embed.spread = parse_number<double>(key, value);
  else if (key == "n_epochs") c.embed.n_epochs = parse_number<std::size_t>(key, value);
  else if (key == "negative_samples") c.embed.negative_samples = parse_number<std::size_t>(key, value);
  else if (key == "initial_lr") c.embed.initial_lr = parse_number<double>(key, value);
  else if (key == "seed") c.embed.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "a") c.embed.a = parse_number<double>(key, value);
  else if (key == "b") c.embed.b = parse_number<double>(key, value);
  else if (key == "occupancy") c.occupancy = parse_number<double>(key, value);
  else if (key == "background_resolution") c.background_resolution = parse_number<int>(key, value);
  else if (key == "background_k") c.background_k = parse_number<int>(key, value);
  else if (key == "out") c.out = value;
  else if (key == "maps_dir") c.maps_dir = value;
  else if (key == "ui_root") c.ui_root = value;
  else if (key == "host") c.host = value;
  else if (key == "port") c.port = parse_number<int>(key, value);
  else throw Error("unknown config key '" + std::string(key) + "'");
}

// TOML-style "key = value" lines. '#' starts a comment outside quotes,
// [section] headers are ignored, values may be double-quoted.
inline PipelineConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = {}) {
  PipelineConfig c;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = text::trim(line);
    if (view.empty() || view.front() == '#' || view.front() == '[') continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) throw Error("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key(text::trim(view.substr(0, eq)));
    std::string_view rest = text::trim(view.substr(eq + 1));
    std::string value;
    if (!rest.empty() && rest.front() == '"') {
      const auto close = rest.find('"', 1);
      if (close == std::string_view::npos)
        throw Error("config line " + std::to_string(line_no) + ": unterminated string");
      value = rest.substr(1, close - 1);
    } else {
      value = text::trim(rest.substr(0, rest.find('#')));
    }
    try {
      set_config_value(c, key, value);
    } catch (const Error& e) {
      throw Error("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  // relative paths in a config file are relative to the file
  if (!base_dir.empty()) {
    for (auto* p : {&c.manifest, &c.image_root, &c.latents, &c.out, &c.maps_dir, &c.ui_root})
      if (!p->empty() && p->is_relative()) *p = base_dir / *p;
  }
  return c;
}

inline PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  return parse_config(in, path.parent_path());
}

}  // namespace metalvis
