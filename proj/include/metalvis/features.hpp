#pragma once

#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"
#include "image.hpp"
#include "text.hpp"

namespace metalvis::features {

enum class FeatureKind { histogram, thumbnail, latent, tag };

inline std::string_view to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::histogram: return "histogram";
    case FeatureKind::thumbnail: return "thumbnail";
    case FeatureKind::latent: return "latent";
    case FeatureKind::tag: break;
  }
  return "tag";
}

inline FeatureKind parse_feature_kind(std::string_view s) {
  if (s == "histogram") return FeatureKind::histogram;
  if (s == "thumbnail") return FeatureKind::thumbnail;
  if (s == "latent") return FeatureKind::latent;
  if (s == "tag") return FeatureKind::tag;
  throw Error("unknown feature kind '" + std::string(s) + "'");
}

// A family of equal-length vectors keyed by item id. Iteration order is
// id order, which is the node order of every downstream graph.
class FeatureSet {
 public:
  FeatureSet(FeatureKind kind, std::size_t dim) : kind_(kind), dim_(dim) {
    if (dim < 1) throw Error("feature dimension must be at least 1");
  }

  FeatureKind kind() const { return kind_; }
  std::size_t dim() const { return dim_; }
  std::size_t size() const { return vectors_.size(); }
  bool empty() const { return vectors_.empty(); }

  void add(std::string id, std::vector<double> v) {
    if (v.size() != dim_)
      throw Error("feature vector for '" + id + "' has length " + std::to_string(v.size()) +
                  ", expected " + std::to_string(dim_));
    if (!vectors_.emplace(id, std::move(v)).second) throw Error("duplicate feature id '" + id + "'");
  }

  const std::vector<double>& at(const std::string& id) const {
    auto it = vectors_.find(id);
    if (it == vectors_.end()) throw Error("no feature vector for '" + id + "'");
    return it->second;
  }

  bool contains(const std::string& id) const { return vectors_.count(id) != 0; }

  const std::map<std::string, std::vector<double>>& vectors() const { return vectors_; }

  std::vector<std::string> ids() const {
    std::vector<std::string> out;
    out.reserve(vectors_.size());
    for (const auto& [id, v] : vectors_) out.push_back(id);
    return out;
  }

  bool operator==(const FeatureSet&) const = default;

 private:
  FeatureKind kind_;
  std::size_t dim_;
  std::map<std::string, std::vector<double>> vectors_;
};

// Joint RGB histogram over opaque pixels (alpha >= 128), L1-normalized.
// Bin index is r*bins^2 + g*bins + b with channel bin floor(v*bins/256).
inline std::vector<double> color_histogram(const RasterImage& image, int bins_per_channel = 4) {
  if (!image.valid()) throw Error("invalid image");
  if (bins_per_channel < 2 || bins_per_channel > 16)
    throw Error("bins_per_channel must be in [2, 16]");
  const std::size_t bins = static_cast<std::size_t>(bins_per_channel);
  std::vector<std::size_t> counts(bins * bins * bins, 0);
  std::size_t total = 0;
  const auto px = image.pixels();
  for (std::size_t i = 0; i < px.size(); i += 4) {
    if (px[i + 3] < 128) continue;
    const std::size_t r = px[i] * bins / 256;
    const std::size_t g = px[i + 1] * bins / 256;
    const std::size_t b = px[i + 2] * bins / 256;
    ++counts[r * bins * bins + g * bins + b];
    ++total;
  }
  if (total == 0) throw Error("empty image: every pixel is transparent");
  std::vector<double> hist(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i)
    hist[i] = static_cast<double>(counts[i]) / static_cast<double>(total);
  return hist;
}

inline double luminance(double r, double g, double b) { return 0.299 * r + 0.587 * g + 0.114 * b; }

// Greyscale thumbnail in [0,1]: composite over white, letterbox onto a
// white square, then bilinear resample to side x side. Row-major.
inline std::vector<double> grey_thumbnail(const RasterImage& image, int side = 64) {
  if (!image.valid()) throw Error("invalid image");
  if (side < 1) throw Error("thumbnail side must be positive");
  const int canvas = std::max(image.width(), image.height());
  const int ox = (canvas - image.width()) / 2;
  const int oy = (canvas - image.height()) / 2;
  std::vector<double> plane(static_cast<std::size_t>(canvas) * canvas, 1.0);
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      auto px = image.at(x, y);
      const double a = px[3] / 255.0;
      const double lum = luminance(px[0], px[1], px[2]) / 255.0;
      plane[static_cast<std::size_t>(y + oy) * canvas + (x + ox)] = a * lum + (1.0 - a);
    }
  }
  auto out = resample_plane(plane, canvas, canvas, side, side);
  for (auto& v : out) v = std::clamp(v, 0.0, 1.0);
  return out;
}

// Parses the whitespace-separated "id v1 v2 ... vd" text format. Used for
// externally produced latents and for every feature file the CLI writes.
// Blank lines and '#' comments are skipped; a leading "# kind=<kind>"
// comment overrides the kind argument.
inline FeatureSet load_feature_text(std::istream& in, FeatureKind kind) {
  std::optional<FeatureSet> set;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto trimmed = text::trim(line);
    if (trimmed.empty()) continue;
    if (trimmed.front() == '#') {
      constexpr std::string_view tag = "# kind=";
      if (!set && trimmed.substr(0, tag.size()) == tag)
        kind = parse_feature_kind(text::trim(trimmed.substr(tag.size())));
      continue;
    }
    std::istringstream tokens{std::string(trimmed)};
    std::string id;
    tokens >> id;
    std::vector<double> values;
    std::string tok;
    while (tokens >> tok) {
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v))
        throw Error("line " + std::to_string(line_no) + ": non-numeric token '" + tok + "'");
      values.push_back(v);
    }
    if (values.empty()) throw Error("line " + std::to_string(line_no) + ": no values after id");
    if (!set) set.emplace(kind, values.size());
    if (values.size() != set->dim())
      throw Error("line " + std::to_string(line_no) + ": ragged dimension " + std::to_string(values.size()) +
                  " (expected " + std::to_string(set->dim()) + ")");
    try {
      set->add(id, std::move(values));
    } catch (const Error& e) {
      throw Error("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!set) throw Error("feature file is empty; dimension undefined");
  return std::move(*set);
}

inline FeatureSet load_latents(std::istream& in) { return load_feature_text(in, FeatureKind::latent); }

inline void write_feature_text(std::ostream& out, const FeatureSet& set) {
  char buf[32];
  out << "# kind=" << to_string(set.kind()) << '\n';
  for (const auto& [id, v] : set.vectors()) {
    out << id;
    for (double x : v) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
      out << ' ' << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
    }
    out << '\n';
  }
}

}  // namespace metalvis::features
