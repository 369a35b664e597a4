#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "atlas.hpp"
#include "config.hpp"
#include "corpus.hpp"
#include "embed.hpp"
#include "features.hpp"
#include "gridify.hpp"
#include "image.hpp"
#include "metrics.hpp"
#include "synth.hpp"

// Batch stages behind the CLI. Each stage reads and writes the documented
// file formats so stages can run separately or chained by build_atlas.
namespace metalvis::pipeline {

namespace fs = std::filesystem;

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
}

inline std::vector<corpus::BandRecord> read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open manifest " + path.string());
  try {
    return corpus::parse_manifest(in);
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// synth

inline void write_synth_corpus(const synth::SynthCorpus& corpus, const fs::path& dir) {
  fs::create_directories(dir);
  std::ostringstream manifest;
  corpus::write_manifest(manifest, corpus.records);
  write_text(dir / "manifest.jsonl", manifest.str());
  for (std::size_t i = 0; i < corpus.records.size(); ++i)
    write_bytes(dir / corpus.records[i].logo_path, encode_png(corpus.images[i]));
}

// ---------------------------------------------------------------------------
// ingest

inline corpus::FilterResult ingest(const PipelineConfig& config) {
  const auto records = read_manifest(config.manifest);
  if (config.apply_filters) return corpus::apply_filters(records);
  corpus::FilterResult all;
  all.kept = records;
  all.report.total_in = all.report.kept = records.size();
  for (auto rule : corpus::kFilterRules) all.report.dropped_by_rule[std::string(rule)] = 0;
  return all;
}

// ---------------------------------------------------------------------------
// features

inline features::FeatureSet compute_features(const std::vector<corpus::BandRecord>& records,
                                             const PipelineConfig& config) {
  using features::FeatureKind;
  switch (config.feature_kind) {
    case FeatureKind::tag: {
      const auto vocab = corpus::build_vocabulary(records, config.vocab_size);
      if (vocab.size() == 0) throw Error("no genre tags in corpus; cannot build tag features");
      features::FeatureSet set(FeatureKind::tag, vocab.size());
      for (const auto& r : records) set.add(r.id, corpus::tag_vector(r, vocab));
      return set;
    }
    case FeatureKind::latent: {
      std::ifstream in(config.latents);
      if (!in) throw Error("cannot open latent file " + config.latents.string());
      auto set = features::load_latents(in);
      // keep only the active corpus; every corpus item needs a latent
      features::FeatureSet subset(FeatureKind::latent, set.dim());
      for (const auto& r : records) {
        if (!set.contains(r.id)) throw Error("latent file has no vector for '" + r.id + "'");
        subset.add(r.id, set.at(r.id));
      }
      return subset;
    }
    case FeatureKind::histogram:
    case FeatureKind::thumbnail: break;
  }
  features::FeatureSet set(config.feature_kind,
                           config.feature_kind == FeatureKind::histogram
                               ? static_cast<std::size_t>(config.histogram_bins * config.histogram_bins *
                                                          config.histogram_bins)
                               : static_cast<std::size_t>(config.thumbnail_side * config.thumbnail_side));
  for (const auto& r : records) {
    const auto image = load_image(config.image_root / r.logo_path);
    try {
      set.add(r.id, config.feature_kind == FeatureKind::histogram
                        ? features::color_histogram(image, config.histogram_bins)
                        : features::grey_thumbnail(image, config.thumbnail_side));
    } catch (const Error& e) {
      throw Error("item '" + r.id + "': " + e.what());
    }
  }
  return set;
}

inline features::FeatureSet read_features(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open feature file " + path.string());
  return features::load_feature_text(in, features::FeatureKind::latent);
}

// ---------------------------------------------------------------------------
// layout and grid files

inline nlohmann::json layout_to_json(const embed::Embedding& e, features::FeatureKind kind) {
  nlohmann::json items = nlohmann::json::array();
  for (std::size_t i = 0; i < e.layout.size(); ++i)
    items.push_back({{"id", e.layout.ids[i]}, {"x", e.layout.coords[i][0]}, {"y", e.layout.coords[i][1]}});
  return {{"feature_kind", std::string(features::to_string(kind))},
          {"metric", std::string(metrics::to_string(e.metric))},
          {"embed", atlas::to_json(e.params)},
          {"init", std::string(atlas::kInitMethod)},
          {"items", std::move(items)}};
}

struct LayoutFile {
  embed::Layout2D layout;
  std::string feature_kind;
  std::string metric;
  embed::EmbedParams params;
};

inline LayoutFile layout_from_json(const nlohmann::json& j) {
  LayoutFile f;
  try {
    f.feature_kind = j.at("feature_kind").get<std::string>();
    f.metric = j.at("metric").get<std::string>();
    const auto& e = j.at("embed");
    f.params.k = e.at("k").get<std::size_t>();
    f.params.min_dist = e.at("min_dist").get<double>();
    f.params.spread = e.at("spread").get<double>();
    f.params.n_epochs = e.at("n_epochs").get<std::size_t>();
    f.params.negative_samples = e.at("negative_samples").get<std::size_t>();
    f.params.initial_lr = e.at("initial_lr").get<double>();
    f.params.seed = e.at("seed").get<std::uint64_t>();
    f.params.a = e.at("a").get<double>();
    f.params.b = e.at("b").get<double>();
    for (const auto& item : j.at("items")) {
      f.layout.ids.push_back(item.at("id").get<std::string>());
      f.layout.coords.push_back({item.at("x").get<double>(), item.at("y").get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed layout file: ") + e.what());
  }
  return f;
}

inline nlohmann::json grid_to_json(const gridify::GridAssignment& grid) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& [id, c] : grid.cells) cells.push_back({{"id", id}, {"gx", c.x}, {"gy", c.y}});
  return {{"level", grid.level},
          {"curve", grid.curve},
          {"collision_policy", std::string(gridify::kCollisionPolicy)},
          {"cells", std::move(cells)}};
}

inline gridify::GridAssignment grid_from_json(const nlohmann::json& j) {
  gridify::GridAssignment g;
  try {
    g.level = j.at("level").get<unsigned>();
    g.curve = j.at("curve").get<std::string>();
    for (const auto& c : j.at("cells"))
      g.cells[c.at("id").get<std::string>()] = {c.at("gx").get<std::int64_t>(), c.at("gy").get<std::int64_t>()};
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed grid file: ") + e.what());
  }
  return g;
}

inline gridify::GridAssignment gridify_layout(const embed::Layout2D& layout, double occupancy) {
  return gridify::assign_cells(layout, gridify::choose_level(layout.size(), occupancy));
}

// ---------------------------------------------------------------------------
// atlas

struct AtlasResult {
  atlas::MapDocument document;
  fs::path document_path;
};

// The full chain: ingest, features, embed, gridify, background, export.
// Writes <maps>/<name>.json and one PNG thumbnail per item when images are
// available.
inline AtlasResult build_atlas(const PipelineConfig& config, std::ostream* log = nullptr) {
  const auto say = [&](const std::string& msg) {
    if (log) *log << msg << '\n';
  };
  const auto filtered = ingest(config);
  say("ingest: kept " + std::to_string(filtered.report.kept) + " of " + std::to_string(filtered.report.total_in));
  const auto& records = filtered.kept;
  if (records.empty()) throw Error("no records left after filtering");

  const auto feats = compute_features(records, config);
  say("features: " + std::string(features::to_string(feats.kind())) + ", dim " + std::to_string(feats.dim()));

  const auto embedding = embed::embed(feats, config.resolved_metric(), config.embed);
  say("embed: " + std::to_string(embedding.layout.size()) + " points, metric " +
      std::string(metrics::to_string(embedding.metric)));

  const auto grid = gridify_layout(embedding.layout, config.occupancy);
  say("gridify: level " + std::to_string(grid.level));

  atlas::Provenance provenance;
  provenance.feature_kind = std::string(features::to_string(feats.kind()));
  provenance.metric = std::string(metrics::to_string(embedding.metric));
  provenance.embed = embedding.params;
  auto doc = atlas::assemble_map(config.name, records, embedding.layout, grid, provenance);

  const auto vocab = corpus::build_vocabulary(records, config.vocab_size);
  std::map<std::string, const corpus::BandRecord*> by_id;
  for (const auto& r : records) by_id[r.id] = &r;
  std::vector<std::string> primary;
  for (const auto& id : embedding.layout.ids) primary.push_back(corpus::primary_genre(*by_id.at(id), vocab));
  doc.background = atlas::genre_background(embedding.layout, primary, vocab.tags, config.background_resolution,
                                           config.background_k);

  const auto maps = config.resolved_maps_dir();
  fs::create_directories(maps);
  const auto doc_path = maps / (config.name + ".json");
  write_text(doc_path, atlas::export_map(doc));
  if (config.feature_kind == features::FeatureKind::histogram ||
      config.feature_kind == features::FeatureKind::thumbnail || !config.image_root.empty()) {
    for (const auto& r : records) {
      const auto src = config.image_root / r.logo_path;
      if (!fs::exists(src)) continue;
      write_bytes(maps / atlas::thumb_reference(r.id), encode_png(square_thumbnail(load_image(src), 64)));
    }
  }
  say("atlas: wrote " + doc_path.string());
  return {std::move(doc), doc_path};
}

}  // namespace metalvis::pipeline
