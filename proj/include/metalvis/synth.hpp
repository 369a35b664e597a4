#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "error.hpp"
#include "image.hpp"
#include "random.hpp"

// Deterministic fixture corpora: each class draws logos with its own
// palette and stroke style and carries its own genre tag.
namespace metalvis::synth {

struct ClassStyle {
  std::string genre;  // raw genre string, e.g. "Black Metal"
  std::array<std::uint8_t, 3> primary;
  std::array<std::uint8_t, 3> secondary;
  double secondary_share = 0.2;  // fraction of strokes in the secondary colour, at least one if > 0
  double stroke_width = 3.0;
  int strokes = 6;
  int segments_per_stroke = 3;
  double max_turn = 1.5;  // radians; high values give jagged strokes
};

struct SynthSpec {
  std::vector<ClassStyle> classes;
  std::size_t items_per_class = 10;
  int width = 96;
  int height = 48;
  int color_jitter = 20;

  void validate() const {
    if (classes.size() < 2) throw Error("synth: need at least two classes");
    if (items_per_class < 2) throw Error("synth: need at least two items per class");
    if (width < 8 || height < 8) throw Error("synth: canvas must be at least 8x8");
    if (color_jitter < 0 || color_jitter > 31) throw Error("synth: color_jitter must be in [0, 31]");
    for (const auto& c : classes) {
      if (corpus::parse_genre_string(c.genre).empty()) throw Error("synth: class without genre");
      if (c.strokes < 1 || c.segments_per_stroke < 1 || !(c.stroke_width > 0.0))
        throw Error("synth: invalid stroke style for '" + c.genre + "'");
      if (c.secondary_share < 0.0 || c.secondary_share > 1.0)
        throw Error("synth: secondary_share must be in [0, 1]");
    }
    for (std::size_t i = 0; i < classes.size(); ++i)
      for (std::size_t j = i + 1; j < classes.size(); ++j)
        if (corpus::parse_genre_string(classes[i].genre) == corpus::parse_genre_string(classes[j].genre))
          throw Error("synth: classes must have distinct genres");
  }
};

// Built-in styles. Primary colours sit at histogram bin centres so the
// jitter never moves them across a 4-per-channel bin boundary.
inline std::vector<ClassStyle> default_styles() {
  return {
      {"Black Metal", {224, 224, 224}, {96, 96, 96}, 0.15, 2.0, 9, 5, 2.6},
      {"Death Metal", {224, 32, 32}, {96, 32, 32}, 0.2, 4.0, 6, 4, 1.2},
      {"Thrash Metal", {32, 96, 224}, {32, 32, 96}, 0.2, 5.0, 5, 2, 0.4},
      {"Heavy Metal", {224, 160, 32}, {160, 96, 32}, 0.25, 6.0, 4, 1, 0.2},
      {"Doom Metal", {96, 32, 160}, {32, 32, 32}, 0.2, 7.0, 3, 2, 0.3},
      {"Power Metal", {32, 160, 96}, {224, 224, 96}, 0.2, 4.0, 5, 3, 0.6},
      {"Folk Metal", {160, 96, 32}, {32, 96, 32}, 0.25, 3.0, 6, 3, 0.9},
      {"Grindcore", {224, 96, 160}, {32, 32, 32}, 0.2, 2.0, 10, 6, 3.0},
  };
}

inline SynthSpec default_spec(std::size_t classes, std::size_t items_per_class) {
  const auto styles = default_styles();
  if (classes < 2 || classes > styles.size())
    throw Error("synth: class count must be in [2, " + std::to_string(styles.size()) + "]");
  SynthSpec spec;
  spec.classes.assign(styles.begin(), styles.begin() + static_cast<std::ptrdiff_t>(classes));
  spec.items_per_class = items_per_class;
  return spec;
}

struct SynthCorpus {
  std::vector<corpus::BandRecord> records;
  std::vector<RasterImage> images;  // parallel to records
  std::vector<std::size_t> classes;  // class index per record
};

namespace detail {

inline std::uint8_t jitter(std::uint8_t v, int amount, Rng& rng) {
  const int delta = static_cast<int>(rng.below(static_cast<std::uint64_t>(2 * amount + 1))) - amount;
  return static_cast<std::uint8_t>(std::clamp(static_cast<int>(v) + delta, 0, 255));
}

inline void stamp_segment(RasterImage& img, double x0, double y0, double x1, double y1, double width,
                          std::array<std::uint8_t, 3> color) {
  const double r = width / 2.0;
  const int min_x = std::max(0, static_cast<int>(std::floor(std::min(x0, x1) - r)));
  const int max_x = std::min(img.width() - 1, static_cast<int>(std::ceil(std::max(x0, x1) + r)));
  const int min_y = std::max(0, static_cast<int>(std::floor(std::min(y0, y1) - r)));
  const int max_y = std::min(img.height() - 1, static_cast<int>(std::ceil(std::max(y0, y1) + r)));
  const double vx = x1 - x0, vy = y1 - y0;
  const double len2 = vx * vx + vy * vy;
  for (int y = min_y; y <= max_y; ++y)
    for (int x = min_x; x <= max_x; ++x) {
      const double px = x + 0.5 - x0, py = y + 0.5 - y0;
      const double t = len2 > 0.0 ? std::clamp((px * vx + py * vy) / len2, 0.0, 1.0) : 0.0;
      const double dx = px - t * vx, dy = py - t * vy;
      if (dx * dx + dy * dy <= r * r) {
        auto p = img.at(x, y);
        p[0] = color[0];
        p[1] = color[1];
        p[2] = color[2];
        p[3] = 255;
      }
    }
}

inline std::string band_name(Rng& rng) {
  static constexpr std::array<const char*, 16> first = {"Grim", "Iron", "Frost", "Necro", "Blood", "Storm",
                                                        "Dread", "Ash",  "Void",  "Black", "Wolf",  "Thorn",
                                                        "Crypt", "Doom", "Hell",  "Night"};
  static constexpr std::array<const char*, 12> second = {"moor", "fang",  "throne", "veil",  "hammer", "gate",
                                                         "wind", "spire", "cult",   "forge", "grave",  "reign"};
  std::string name = first[rng.below(first.size())];
  name += second[rng.below(second.size())];
  return name;
}

}  // namespace detail

// Draw order per item: name, then per stroke: colour choice, jittered
// colour, start point, then per segment a heading and length.
inline SynthCorpus synth_corpus(const SynthSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  SynthCorpus out;
  for (std::size_t c = 0; c < spec.classes.size(); ++c) {
    const auto& style = spec.classes[c];
    for (std::size_t i = 0; i < spec.items_per_class; ++i) {
      char id[32];
      std::snprintf(id, sizeof id, "synth-%02zu-%04zu", c, i);
      corpus::BandRecord r;
      r.id = id;
      r.name = detail::band_name(rng);
      r.genre_raw = style.genre;
      r.genres = corpus::parse_genre_string(style.genre);
      r.themes = {"synthetic", "style " + std::to_string(c)};
      r.label = "Synthetic Records " + std::to_string(c);
      r.status = corpus::Status::active;
      r.logo_path = "images/" + r.id + ".png";

      RasterImage img(spec.width, spec.height,
                      std::vector<std::uint8_t>(4u * static_cast<std::size_t>(spec.width) * spec.height, 0));
      // every logo mixes both colours, so a class never splits into
      // primary-only duplicates
      std::vector<bool> secondary_stroke(static_cast<std::size_t>(style.strokes), false);
      const long n_secondary =
          style.secondary_share > 0.0 ? std::max(1L, std::lround(style.secondary_share * style.strokes)) : 0L;
      std::vector<std::size_t> slots(secondary_stroke.size());
      std::iota(slots.begin(), slots.end(), 0);
      for (long m = 0; m < n_secondary; ++m) {
        const auto pick = static_cast<std::size_t>(m) + static_cast<std::size_t>(rng.below(slots.size() - m));
        std::swap(slots[static_cast<std::size_t>(m)], slots[pick]);
        secondary_stroke[slots[static_cast<std::size_t>(m)]] = true;
      }
      for (int s = 0; s < style.strokes; ++s) {
        const bool secondary = secondary_stroke[static_cast<std::size_t>(s)];
        auto color = secondary ? style.secondary : style.primary;
        for (auto& ch : color) ch = detail::jitter(ch, spec.color_jitter, rng);
        double x = rng.uniform(0.1, 0.9) * spec.width;
        double y = rng.uniform(0.2, 0.8) * spec.height;
        double heading = rng.uniform(0.0, 2.0 * 3.141592653589793);
        for (int seg = 0; seg < style.segments_per_stroke; ++seg) {
          heading += rng.uniform(-style.max_turn, style.max_turn);
          const double len = rng.uniform(0.15, 0.35) * spec.width;
          const double nx = std::clamp(x + std::cos(heading) * len, 1.0, spec.width - 2.0);
          const double ny = std::clamp(y + std::sin(heading) * len, 1.0, spec.height - 2.0);
          detail::stamp_segment(img, x, y, nx, ny, style.stroke_width, color);
          x = nx;
          y = ny;
        }
      }
      out.records.push_back(std::move(r));
      out.images.push_back(std::move(img));
      out.classes.push_back(c);
    }
  }
  return out;
}

}  // namespace metalvis::synth
