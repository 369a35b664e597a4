#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include <nlohmann/json.hpp>

#include "corpus.hpp"
#include "embed.hpp"
#include "error.hpp"
#include "gridify.hpp"
#include "image.hpp"

namespace metalvis::atlas {

inline constexpr int kSchemaVersion = 1;
inline constexpr std::string_view kBackgroundMethod = "knn-majority-proximity";
inline constexpr std::string_view kInitMethod = "uniform";

// ---------------------------------------------------------------------------
// Colours

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;

  bool operator==(const Rgb&) const = default;
};

inline std::string to_hex(Rgb c) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c.r, c.g, c.b);
  return buf;
}

inline Rgb parse_hex(std::string_view s) {
  const auto nibble = [&](char ch) -> int {
    if (ch >= '0' && ch <= '9') return ch - '0';
    if (ch >= 'a' && ch <= 'f') return ch - 'a' + 10;
    if (ch >= 'A' && ch <= 'F') return ch - 'A' + 10;
    throw Error("bad colour '" + std::string(s) + "'");
  };
  if (s.size() != 7 || s[0] != '#') throw Error("bad colour '" + std::string(s) + "'");
  const auto byte = [&](std::size_t i) {
    return static_cast<std::uint8_t>(nibble(s[i]) * 16 + nibble(s[i + 1]));
  };
  return {byte(1), byte(3), byte(5)};
}

// The four genres with a fixed colour; background colours of the map.
inline const std::map<std::string, Rgb, std::less<>>& named_genre_colors() {
  static const std::map<std::string, Rgb, std::less<>> colors = {
      {"black metal", {0xff, 0xff, 0xff}},
      {"death metal", {0xd6, 0x1f, 0x1f}},
      {"thrash metal", {0x1f, 0x4e, 0xd6}},
      {"heavy metal", {0xd4, 0xaf, 0x37}},
  };
  return colors;
}

// Categorical palette for every other genre, assigned in vocabulary order
// and cycled. None of these collide with the named colours.
inline constexpr std::array<Rgb, 10> kOtherPalette = {{
    {0x2c, 0xa0, 0x2c},
    {0x94, 0x67, 0xbd},
    {0xff, 0x7f, 0x0e},
    {0x8c, 0x56, 0x4b},
    {0xe3, 0x77, 0xc2},
    {0x17, 0xbe, 0xcf},
    {0xbc, 0xbd, 0x22},
    {0x7f, 0x7f, 0x7f},
    {0x39, 0x3b, 0x79},
    {0x63, 0x79, 0x39},
}};

// genre_order is the vocabulary order; genres outside it go after it, sorted.
inline Rgb genre_color(std::string_view genre, const std::vector<std::string>& genre_order) {
  const auto& named = named_genre_colors();
  if (auto it = named.find(genre); it != named.end()) return it->second;
  std::size_t slot = 0;
  for (const auto& g : genre_order) {
    if (g == genre) return kOtherPalette[slot % kOtherPalette.size()];
    if (!named.count(g)) ++slot;
  }
  // outside the vocabulary: stable hash into the palette
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : genre) h = (h ^ c) * 1099511628211ull;
  return kOtherPalette[h % kOtherPalette.size()];
}

// ---------------------------------------------------------------------------
// Document model

struct LegendEntry {
  std::string genre;
  Rgb color;

  bool operator==(const LegendEntry&) const = default;
};

// Row-major cells; row index grows with layout y, column with layout x.
// Each cell indexes into legend, or is -1 for no genre.
struct BackgroundRaster {
  int width = 0;
  int height = 0;
  int k = 0;
  std::vector<LegendEntry> legend;
  std::vector<int> cells;

  std::string genre_at(int cx, int cy) const {
    const int v = cells.at(static_cast<std::size_t>(cy) * width + cx);
    return v < 0 ? std::string() : legend.at(static_cast<std::size_t>(v)).genre;
  }
  std::optional<Rgb> color_at(int cx, int cy) const {
    const int v = cells.at(static_cast<std::size_t>(cy) * width + cx);
    if (v < 0) return std::nullopt;
    return legend.at(static_cast<std::size_t>(v)).color;
  }

  bool operator==(const BackgroundRaster&) const = default;
};

struct MapItem {
  std::string id;
  std::string name;
  std::vector<std::string> genres;
  std::vector<std::string> themes;
  std::string status;
  std::optional<std::string> label;
  double x = 0.0;
  double y = 0.0;
  std::int64_t gx = 0;
  std::int64_t gy = 0;
  std::string thumb;

  bool operator==(const MapItem&) const = default;
};

struct Provenance {
  std::string feature_kind;
  std::string metric;
  embed::EmbedParams embed;  // a and b always set
  std::string init{kInitMethod};
  unsigned grid_level = 0;
  std::string curve{gridify::kCurve};
  std::string collision_policy{gridify::kCollisionPolicy};
  std::string background_method{kBackgroundMethod};

  bool operator==(const Provenance&) const = default;
};

struct MapDocument {
  int schema_version = kSchemaVersion;
  std::string name;
  std::vector<MapItem> items;
  Provenance provenance;
  std::optional<BackgroundRaster> background;

  const MapItem* find(std::string_view id) const {
    auto it = std::lower_bound(items.begin(), items.end(), id,
                               [](const MapItem& item, std::string_view key) { return item.id < key; });
    return it != items.end() && it->id == id ? &*it : nullptr;
  }

  bool operator==(const MapDocument&) const = default;
};

// File name under thumbs/ for an item id; bytes outside [A-Za-z0-9.-]
// are written as _XX hex escapes so distinct ids never collide.
inline std::string thumb_filename(std::string_view id) {
  std::string out;
  for (unsigned char c : id) {
    if (std::isalnum(c) || c == '.' || c == '-') {
      out.push_back(static_cast<char>(c));
    } else {
      char buf[4];
      std::snprintf(buf, sizeof buf, "_%02x", c);
      out += buf;
    }
  }
  return out + ".png";
}

inline std::string thumb_reference(std::string_view id) { return "thumbs/" + thumb_filename(id); }

// ---------------------------------------------------------------------------
// Validation

inline void check_invariants(const MapDocument& doc) {
  if (doc.schema_version != kSchemaVersion)
    throw Error("unsupported schema_version " + std::to_string(doc.schema_version));
  if (doc.name.empty()) throw Error("map name is empty");
  const auto& p = doc.provenance;
  if (p.feature_kind.empty() || p.metric.empty() || p.curve.empty() || p.collision_policy.empty() ||
      p.init.empty() || p.background_method.empty())
    throw Error("map provenance is incomplete");
  if (!p.embed.a || !p.embed.b) throw Error("map provenance lacks curve parameters a, b");
  p.embed.validate();
  if (p.grid_level > 15) throw Error("grid level out of range");

  const std::int64_t side = std::int64_t{1} << p.grid_level;
  std::set<std::pair<std::int64_t, std::int64_t>> cells;
  for (std::size_t i = 0; i < doc.items.size(); ++i) {
    const auto& item = doc.items[i];
    if (item.id.empty()) throw Error("item with empty id");
    if (i > 0 && !(doc.items[i - 1].id < item.id))
      throw Error("items not strictly ordered by id at '" + item.id + "'");
    if (!std::isfinite(item.x) || !std::isfinite(item.y))
      throw Error("item '" + item.id + "' has non-finite coordinates");
    if (item.gx < 0 || item.gy < 0 || item.gx >= side || item.gy >= side)
      throw Error("item '" + item.id + "' grid cell out of range");
    if (!cells.insert({item.gx, item.gy}).second)
      throw Error("duplicate grid cell (" + std::to_string(item.gx) + ", " + std::to_string(item.gy) +
                  ") at item '" + item.id + "'");
  }
  if (doc.background) {
    const auto& bg = *doc.background;
    if (bg.width < 1 || bg.height < 1) throw Error("background raster must be at least 1x1");
    if (bg.cells.size() != static_cast<std::size_t>(bg.width) * static_cast<std::size_t>(bg.height))
      throw Error("background cell count does not match its dimensions");
    for (int v : bg.cells)
      if (v < -1 || v >= static_cast<int>(bg.legend.size())) throw Error("background cell has no legend entry");
  }
}

// ---------------------------------------------------------------------------
// Assembly

// Joins per-id records, coordinates and cells; items come out in id order.
inline MapDocument assemble_map(std::string name, const std::vector<corpus::BandRecord>& records,
                                const embed::Layout2D& layout, const gridify::GridAssignment& grid,
                                Provenance provenance) {
  std::map<std::string, const corpus::BandRecord*> by_id;
  for (const auto& r : records) by_id[r.id] = &r;
  std::map<std::string, std::array<double, 2>> coords;
  for (std::size_t i = 0; i < layout.size(); ++i) coords[layout.ids[i]] = layout.coords[i];

  std::set<std::string> all;
  for (const auto& [id, r] : by_id) all.insert(id);
  for (const auto& [id, c] : coords) all.insert(id);
  for (const auto& [id, c] : grid.cells) all.insert(id);
  std::vector<std::string> mismatched;
  for (const auto& id : all)
    if (!by_id.count(id) || !coords.count(id) || !grid.cells.count(id)) mismatched.push_back(id);
  if (!mismatched.empty()) {
    std::string msg = "id sets of records, layout and grid differ:";
    for (const auto& id : mismatched) msg += " " + id;
    throw Error(msg);
  }

  MapDocument doc;
  doc.name = std::move(name);
  provenance.grid_level = grid.level;
  provenance.curve = grid.curve;
  doc.provenance = std::move(provenance);
  for (const auto& [id, r] : by_id) {
    MapItem item;
    item.id = id;
    item.name = r->name;
    item.genres.assign(r->genres.begin(), r->genres.end());
    item.themes.assign(r->themes.begin(), r->themes.end());
    item.status = std::string(corpus::to_string(r->status));
    item.label = r->label;
    item.x = coords[id][0];
    item.y = coords[id][1];
    item.gx = grid.cells.at(id).x;
    item.gy = grid.cells.at(id).y;
    item.thumb = thumb_reference(id);
    doc.items.push_back(std::move(item));
  }
  return doc;
}

// Each cell centre takes the majority primary genre of its k nearest items
// (ties: lexicographically smallest genre). Items are ranked by id before
// the search, so the result does not depend on input order. Items with an
// empty primary genre do not vote.
inline BackgroundRaster genre_background(const embed::Layout2D& layout,
                                         const std::vector<std::string>& primary_genres,
                                         const std::vector<std::string>& genre_order, int resolution = 64,
                                         int k = 10) {
  if (layout.size() == 0) throw Error("genre_background: empty layout");
  if (primary_genres.size() != layout.size()) throw Error("genre_background: one genre per item required");
  if (resolution < 1) throw Error("genre_background: resolution must be positive");
  if (k < 1) throw Error("genre_background: k must be at least 1");

  std::vector<std::size_t> order(layout.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return layout.ids[a] < layout.ids[b]; });
  struct Voter {
    double x, y;
    const std::string* genre;
  };
  std::vector<Voter> voters;
  for (std::size_t i : order)
    if (!primary_genres[i].empty()) voters.push_back({layout.coords[i][0], layout.coords[i][1], &primary_genres[i]});

  double lo[2] = {layout.coords[0][0], layout.coords[0][1]};
  double hi[2] = {lo[0], lo[1]};
  for (const auto& c : layout.coords)
    for (int a = 0; a < 2; ++a) {
      lo[a] = std::min(lo[a], c[a]);
      hi[a] = std::max(hi[a], c[a]);
    }

  BackgroundRaster raster;
  raster.width = raster.height = resolution;
  raster.k = k;
  raster.cells.assign(static_cast<std::size_t>(resolution) * resolution, -1);
  if (voters.empty()) return raster;

  std::map<std::string, int> cell_genre_ids;
  std::vector<std::string> cell_genres;
  std::vector<std::pair<double, std::size_t>> ranked(voters.size());
  const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(k), voters.size());
  for (int cy = 0; cy < resolution; ++cy) {
    const double y = lo[1] + (cy + 0.5) / resolution * (hi[1] - lo[1]);
    for (int cx = 0; cx < resolution; ++cx) {
      const double x = lo[0] + (cx + 0.5) / resolution * (hi[0] - lo[0]);
      for (std::size_t v = 0; v < voters.size(); ++v) {
        const double dx = voters[v].x - x, dy = voters[v].y - y;
        ranked[v] = {dx * dx + dy * dy, v};
      }
      std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(take), ranked.end());
      std::map<std::string_view, int> votes;
      for (std::size_t m = 0; m < take; ++m) ++votes[*voters[ranked[m].second].genre];
      std::string_view winner;
      int best = 0;
      for (const auto& [genre, count] : votes)  // lexicographic, so ties keep the first
        if (count > best) {
          best = count;
          winner = genre;
        }
      auto [it, inserted] = cell_genre_ids.try_emplace(std::string(winner), static_cast<int>(cell_genres.size()));
      if (inserted) cell_genres.emplace_back(winner);
      raster.cells[static_cast<std::size_t>(cy) * resolution + cx] = it->second;
    }
  }

  // legend in vocabulary order, then any others alphabetically
  std::vector<std::string> legend_order;
  for (const auto& g : genre_order)
    if (cell_genre_ids.count(g)) legend_order.push_back(g);
  for (const auto& [g, id] : cell_genre_ids)
    if (std::find(legend_order.begin(), legend_order.end(), g) == legend_order.end()) legend_order.push_back(g);
  std::vector<int> remap(cell_genres.size());
  for (std::size_t i = 0; i < legend_order.size(); ++i) {
    raster.legend.push_back({legend_order[i], genre_color(legend_order[i], genre_order)});
    remap[static_cast<std::size_t>(cell_genre_ids[legend_order[i]])] = static_cast<int>(i);
  }
  for (int& c : raster.cells) c = remap[static_cast<std::size_t>(c)];
  return raster;
}

// Rows are emitted top-down in image order, i.e. the highest-y row first,
// so the PNG reads like the map. Cells with no genre are transparent.
inline RasterImage render_background(const BackgroundRaster& raster) {
  std::vector<std::uint8_t> px(4u * static_cast<std::size_t>(raster.width) * raster.height, 0);
  for (int cy = 0; cy < raster.height; ++cy)
    for (int cx = 0; cx < raster.width; ++cx) {
      const auto color = raster.color_at(cx, cy);
      if (!color) continue;
      const std::size_t row = static_cast<std::size_t>(raster.height - 1 - cy);
      auto* p = px.data() + 4 * (row * raster.width + cx);
      p[0] = color->r;
      p[1] = color->g;
      p[2] = color->b;
      p[3] = 255;
    }
  return RasterImage(raster.width, raster.height, std::move(px));
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::json to_json(const embed::EmbedParams& p) {
  return {{"k", p.k},
          {"min_dist", p.min_dist},
          {"spread", p.spread},
          {"n_epochs", p.n_epochs},
          {"negative_samples", p.negative_samples},
          {"initial_lr", p.initial_lr},
          {"seed", p.seed},
          {"a", p.a.value_or(0.0)},
          {"b", p.b.value_or(0.0)}};
}

inline nlohmann::json to_json(const MapItem& item) {
  return {{"id", item.id},
          {"name", item.name},
          {"genres", item.genres},
          {"themes", item.themes},
          {"status", item.status},
          {"label", item.label ? nlohmann::json(*item.label) : nlohmann::json(nullptr)},
          {"x", item.x},
          {"y", item.y},
          {"gx", item.gx},
          {"gy", item.gy},
          {"thumb", item.thumb}};
}

inline nlohmann::json to_json(const BackgroundRaster& bg) {
  nlohmann::json legend = nlohmann::json::array();
  for (const auto& e : bg.legend) legend.push_back({{"genre", e.genre}, {"color", to_hex(e.color)}});
  return {{"width", bg.width}, {"height", bg.height}, {"k", bg.k}, {"legend", legend}, {"cells", bg.cells}};
}

inline nlohmann::json to_json(const MapDocument& doc) {
  nlohmann::json items = nlohmann::json::array();
  for (const auto& item : doc.items) items.push_back(to_json(item));
  const auto& p = doc.provenance;
  return {{"schema_version", doc.schema_version},
          {"name", doc.name},
          {"provenance",
           {{"feature_kind", p.feature_kind},
            {"metric", p.metric},
            {"embed", to_json(p.embed)},
            {"init", p.init},
            {"grid_level", p.grid_level},
            {"curve", p.curve},
            {"collision_policy", p.collision_policy},
            {"background_method", p.background_method}}},
          {"items", std::move(items)},
          {"background", doc.background ? to_json(*doc.background) : nlohmann::json(nullptr)}};
}

namespace detail {

inline const nlohmann::json& field(const nlohmann::json& obj, std::string_view key, std::string_view where) {
  if (!obj.is_object()) throw Error(std::string(where) + " must be an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw Error(std::string(where) + " lacks '" + std::string(key) + "'");
  return *it;
}

template <typename T>
T get(const nlohmann::json& obj, std::string_view key, std::string_view where) {
  const auto& v = field(obj, key, where);
  try {
    if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) throw Error("not a number");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw Error("not an integer");
      if constexpr (std::is_unsigned_v<T>)
        if (v.is_number_integer() && !v.is_number_unsigned()) throw Error("negative");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw Error("not a string");
    }
    return v.get<T>();
  } catch (const std::exception& e) {
    throw Error(std::string(where) + "." + std::string(key) + ": " + e.what());
  }
}

inline std::vector<std::string> string_list(const nlohmann::json& obj, std::string_view key, std::string_view where) {
  const auto& v = field(obj, key, where);
  if (!v.is_array()) throw Error(std::string(where) + "." + std::string(key) + " must be an array");
  std::vector<std::string> out;
  for (const auto& s : v) {
    if (!s.is_string()) throw Error(std::string(where) + "." + std::string(key) + " holds a non-string");
    out.push_back(s.get<std::string>());
  }
  return out;
}

}  // namespace detail

inline MapDocument from_json(const nlohmann::json& j) {
  using detail::get;
  MapDocument doc;
  doc.schema_version = get<int>(j, "schema_version", "document");
  if (doc.schema_version != kSchemaVersion)
    throw Error("unsupported schema_version " + std::to_string(doc.schema_version) + " (expected " +
                std::to_string(kSchemaVersion) + ")");
  doc.name = get<std::string>(j, "name", "document");

  const auto& pj = detail::field(j, "provenance", "document");
  auto& p = doc.provenance;
  p.feature_kind = get<std::string>(pj, "feature_kind", "provenance");
  p.metric = get<std::string>(pj, "metric", "provenance");
  p.init = get<std::string>(pj, "init", "provenance");
  p.grid_level = get<unsigned>(pj, "grid_level", "provenance");
  p.curve = get<std::string>(pj, "curve", "provenance");
  p.collision_policy = get<std::string>(pj, "collision_policy", "provenance");
  p.background_method = get<std::string>(pj, "background_method", "provenance");
  const auto& ej = detail::field(pj, "embed", "provenance");
  p.embed.k = get<std::size_t>(ej, "k", "embed");
  p.embed.min_dist = get<double>(ej, "min_dist", "embed");
  p.embed.spread = get<double>(ej, "spread", "embed");
  p.embed.n_epochs = get<std::size_t>(ej, "n_epochs", "embed");
  p.embed.negative_samples = get<std::size_t>(ej, "negative_samples", "embed");
  p.embed.initial_lr = get<double>(ej, "initial_lr", "embed");
  p.embed.seed = get<std::uint64_t>(ej, "seed", "embed");
  p.embed.a = get<double>(ej, "a", "embed");
  p.embed.b = get<double>(ej, "b", "embed");

  const auto& items = detail::field(j, "items", "document");
  if (!items.is_array()) throw Error("document.items must be an array");
  for (const auto& ij : items) {
    MapItem item;
    item.id = get<std::string>(ij, "id", "item");
    const std::string where = "item '" + item.id + "'";
    item.name = get<std::string>(ij, "name", where);
    item.genres = detail::string_list(ij, "genres", where);
    item.themes = detail::string_list(ij, "themes", where);
    item.status = get<std::string>(ij, "status", where);
    const auto& label = detail::field(ij, "label", where);
    if (!label.is_null()) item.label = get<std::string>(ij, "label", where);
    item.x = get<double>(ij, "x", where);
    item.y = get<double>(ij, "y", where);
    item.gx = get<std::int64_t>(ij, "gx", where);
    item.gy = get<std::int64_t>(ij, "gy", where);
    item.thumb = get<std::string>(ij, "thumb", where);
    doc.items.push_back(std::move(item));
  }

  const auto& bj = detail::field(j, "background", "document");
  if (!bj.is_null()) {
    BackgroundRaster bg;
    bg.width = get<int>(bj, "width", "background");
    bg.height = get<int>(bj, "height", "background");
    bg.k = get<int>(bj, "k", "background");
    const auto& legend = detail::field(bj, "legend", "background");
    if (!legend.is_array()) throw Error("background.legend must be an array");
    for (const auto& e : legend)
      bg.legend.push_back({get<std::string>(e, "genre", "legend"), parse_hex(get<std::string>(e, "color", "legend"))});
    const auto& cells = detail::field(bj, "cells", "background");
    if (!cells.is_array()) throw Error("background.cells must be an array");
    for (const auto& c : cells) {
      if (!c.is_number_integer()) throw Error("background.cells holds a non-integer");
      bg.cells.push_back(c.get<int>());
    }
    doc.background = std::move(bg);
  }
  check_invariants(doc);
  return doc;
}

inline std::string export_map(const MapDocument& doc) {
  check_invariants(doc);
  return to_json(doc).dump(1) + "\n";
}

inline MapDocument import_map(std::string_view bytes) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(std::string("map document is not valid JSON: ") + e.what());
  }
  return from_json(j);
}

}  // namespace metalvis::atlas
