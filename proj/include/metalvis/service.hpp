#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "atlas.hpp"
#include "error.hpp"
#include "image.hpp"
#include "text.hpp"

// Read-only HTTP API over map documents loaded once at startup.
namespace metalvis::service {

namespace fs = std::filesystem;

struct Response {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

using Query = std::multimap<std::string, std::string>;

// Shown at / when no UI bundle directory is configured.
inline constexpr std::string_view kFallbackIndex = R"(<!doctype html>
<html><head><meta charset="utf-8"><title>MetalVis</title></head>
<body><h1>MetalVis map service</h1>
<p>No UI bundle is configured. Maps are listed at <a href="/api/maps">/api/maps</a>.</p>
</body></html>
)";

// Exact-tag genre filters (all must match, lowercased) and a
// case-insensitive band-name substring.
struct ItemFilter {
  std::vector<std::string> genres;
  std::string query;

  bool matches(const atlas::MapItem& item) const {
    for (const auto& g : genres)
      if (std::find(item.genres.begin(), item.genres.end(), g) == item.genres.end()) return false;
    return query.empty() || text::lower(item.name).find(query) != std::string::npos;
  }
};

// Throws Error on malformed queries: unknown parameters, empty genre
// values, or more than one q.
inline ItemFilter parse_item_filter(const Query& query) {
  ItemFilter f;
  std::size_t q_count = 0;
  for (const auto& [key, value] : query) {
    if (key == "genre") {
      auto tag = text::squeeze(text::lower(value));
      if (tag.empty()) throw Error("empty genre filter");
      f.genres.push_back(std::move(tag));
    } else if (key == "q") {
      if (++q_count > 1) throw Error("parameter q given more than once");
      f.query = text::lower(text::trim(value));
    } else {
      throw Error("unknown query parameter '" + key + "'");
    }
  }
  return f;
}

class MapService {
 public:
  struct LoadedMap {
    atlas::MapDocument doc;
    fs::path dir;
    std::string body;                        // serialized document
    std::optional<std::string> background;   // PNG bytes
  };

  MapService() = default;

  void add(atlas::MapDocument doc, fs::path dir) {
    const std::string name = doc.name;
    if (maps_.count(name)) throw Error("two map documents named '" + name + "'");
    LoadedMap m;
    m.body = atlas::to_json(doc).dump();
    if (doc.background) {
      const auto png = encode_png(atlas::render_background(*doc.background));
      m.background = std::string(png.begin(), png.end());
    }
    m.doc = std::move(doc);
    m.dir = std::move(dir);
    maps_.emplace(name, std::move(m));
  }

  // Every *.json in dir, validated on import.
  static MapService load_directory(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw Error("map directory " + dir.string() + " does not exist");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
      if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    MapService svc;
    for (const auto& f : files) {
      std::ifstream in(f, std::ios::binary);
      std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
      try {
        svc.add(atlas::import_map(bytes), dir);
      } catch (const Error& e) {
        throw Error(f.string() + ": " + e.what());
      }
    }
    if (svc.maps_.empty()) throw Error("no map documents in " + dir.string());
    return svc;
  }

  void set_ui_root(fs::path root) { ui_root_ = std::move(root); }
  const fs::path& ui_root() const { return ui_root_; }

  const std::map<std::string, LoadedMap>& maps() const { return maps_; }

  Response handle(std::string_view method, std::string_view path, const Query& query = {}) const {
    if (method != "GET" && method != "HEAD") return error(405, "read-only service");
    if (path == "/api/maps") return list_maps();
    if (auto rest = strip_prefix(path, "/api/maps/")) {
      const auto slash = rest->find('/');
      const std::string name(rest->substr(0, slash));
      auto it = maps_.find(name);
      if (it == maps_.end()) return error(404, "no map named '" + name + "'");
      const std::string_view sub = slash == std::string_view::npos ? std::string_view{} : rest->substr(slash);
      if (sub.empty()) return {200, "application/json", it->second.body};
      if (sub == "/items") return items(it->second, query);
      if (sub == "/background") {
        if (!it->second.background) return error(404, "map '" + name + "' has no background");
        return {200, "image/png", *it->second.background};
      }
      return error(404, "unknown map resource");
    }
    if (auto id = strip_prefix(path, "/api/items/")) return item(std::string(*id));
    if (auto id = strip_prefix(path, "/thumbs/")) return thumb(std::string(*id));
    if (path == "/" || path == "/index.html") return index();
    return error(404, "not found");
  }

  // Routes every GET through handle(); static UI files when a root is set.
  void bind(httplib::Server& server) const {
    if (!ui_root_.empty()) server.set_mount_point("/ui", ui_root_.string());
    server.Get(R"(/.*)", [this](const httplib::Request& req, httplib::Response& res) {
      Query q(req.params.begin(), req.params.end());
      const auto r = handle("GET", req.path, q);
      res.status = r.status;
      res.set_content(r.body, r.content_type);
    });
  }

 private:
  static std::optional<std::string_view> strip_prefix(std::string_view s, std::string_view prefix) {
    if (s.substr(0, prefix.size()) != prefix || s.size() == prefix.size()) return std::nullopt;
    return s.substr(prefix.size());
  }

  static Response error(int status, const std::string& message) {
    return {status, "application/json", nlohmann::json{{"error", message}}.dump()};
  }

  Response list_maps() const {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& [name, m] : maps_)
      list.push_back({{"name", name},
                      {"items", m.doc.items.size()},
                      {"feature_kind", m.doc.provenance.feature_kind},
                      {"metric", m.doc.provenance.metric},
                      {"grid_level", m.doc.provenance.grid_level},
                      {"has_background", m.doc.background.has_value()}});
    return {200, "application/json", nlohmann::json{{"maps", list}}.dump()};
  }

  Response items(const LoadedMap& m, const Query& query) const {
    ItemFilter filter;
    try {
      filter = parse_item_filter(query);
    } catch (const Error& e) {
      return error(400, e.what());
    }
    nlohmann::json list = nlohmann::json::array();
    for (const auto& item : m.doc.items)
      if (filter.matches(item)) list.push_back(atlas::to_json(item));
    const auto count = list.size();
    return {200, "application/json",
            nlohmann::json{{"map", m.doc.name}, {"count", count}, {"items", std::move(list)}}.dump()};
  }

  Response item(const std::string& id) const {
    nlohmann::json detail;
    nlohmann::json placements = nlohmann::json::array();
    for (const auto& [name, m] : maps_) {
      const auto* it = m.doc.find(id);
      if (!it) continue;
      if (detail.is_null()) detail = atlas::to_json(*it);
      placements.push_back({{"map", name}, {"x", it->x}, {"y", it->y}, {"gx", it->gx}, {"gy", it->gy}});
    }
    if (detail.is_null()) return error(404, "no item '" + id + "'");
    for (const char* key : {"x", "y", "gx", "gy"}) detail.erase(key);
    detail["maps"] = std::move(placements);
    return {200, "application/json", detail.dump()};
  }

  Response thumb(const std::string& id) const {
    for (const auto& [name, m] : maps_) {
      const auto* it = m.doc.find(id);
      if (!it) continue;
      const fs::path rel(it->thumb);
      if (rel.is_absolute() || std::any_of(rel.begin(), rel.end(), [](const fs::path& p) { return p == ".."; }))
        return error(404, "thumbnail path rejected");
      std::error_code ec;
      const auto file = m.dir / rel;
      if (!fs::is_regular_file(file, ec)) continue;
      const auto bytes = read_bytes(file);
      return {200, "image/png", std::string(bytes.begin(), bytes.end())};
    }
    return error(404, "no thumbnail for '" + id + "'");
  }

  Response index() const {
    if (!ui_root_.empty() && fs::is_regular_file(ui_root_ / "index.html")) {
      const auto bytes = read_bytes(ui_root_ / "index.html");
      return {200, "text/html; charset=utf-8", std::string(bytes.begin(), bytes.end())};
    }
    return {200, "text/html; charset=utf-8", std::string(kFallbackIndex)};
  }

  std::map<std::string, LoadedMap> maps_;
  fs::path ui_root_;
};

}  // namespace metalvis::service
