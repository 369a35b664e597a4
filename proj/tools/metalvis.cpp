#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "metalvis/atlas.hpp"
#include "metalvis/config.hpp"
#include "metalvis/pipeline.hpp"
#include "metalvis/ratings.hpp"
#include "metalvis/service.hpp"
#include "metalvis/synth.hpp"

namespace fs = std::filesystem;
using namespace metalvis;

namespace {

// Every PipelineConfig key gets a --flag of the same name (underscores as
// dashes) on every pipeline subcommand.
constexpr const char* kConfigKeys[] = {
    "name",      "manifest",   "image_root",       "latents",    "feature_kind", "metric",
    "vocab_size", "histogram_bins", "thumbnail_side", "apply_filters", "k",       "min_dist",
    "spread",    "n_epochs",   "negative_samples", "initial_lr", "a",            "b",
    "occupancy", "background_resolution", "background_k", "maps_dir", "ui_root", "host",
    "port"};

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::map<std::string, std::string> overrides;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "TOML-style config file")->check(CLI::ExistingFile);
    cmd->add_option("--seed", seed, "random seed");
    cmd->add_option("--out", out, "output directory");
    for (const char* key : kConfigKeys) {
      std::string flag = std::string("--") + key;
      std::replace(flag.begin(), flag.end(), '_', '-');
      cmd->add_option_function<std::string>(flag, [this, key](const std::string& v) { overrides[key] = v; },
                                            std::string("override config key ") + key);
    }
  }

  PipelineConfig resolve() const {
    PipelineConfig c = config_path.empty() ? PipelineConfig{} : load_config(config_path);
    for (const auto& [key, value] : overrides) set_config_value(c, key, value);
    if (seed) c.embed.seed = *seed;
    if (!out.empty()) c.out = out;
    return c;
  }
};

void require_path(const fs::path& p, const char* what) {
  if (p.empty()) throw Error(std::string("no ") + what + " given");
  if (!fs::exists(p)) throw Error(std::string(what) + " " + p.string() + " does not exist");
}

nlohmann::json read_json(const fs::path& p) {
  try {
    return nlohmann::json::parse(pipeline::read_text(p));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(p.string() + ": " + e.what());
  }
}

std::atomic<httplib::Server*> g_server{nullptr};

void stop_server(int) {
  if (auto* s = g_server.load()) s->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"metalvis: metal logo corpus to map pipeline and map service"};
  app.require_subcommand(1);

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "write a seeded synthetic logo corpus");
  std::size_t synth_classes = 3, synth_per_class = 100;
  std::uint64_t synth_seed = 7;
  std::string synth_out = "synth";
  synth_cmd->add_option("--classes", synth_classes, "number of style classes (2-8)");
  synth_cmd->add_option("--per-class", synth_per_class, "items per class");
  synth_cmd->add_option("--seed", synth_seed, "random seed");
  synth_cmd->add_option("--out", synth_out, "output directory");

  CommonOptions ingest_opts, features_opts, embed_opts, gridify_opts, atlas_opts, serve_opts;

  auto* ingest_cmd = app.add_subcommand("ingest", "apply corpus filters; writes kept.jsonl and filter_report.json");
  ingest_opts.attach(ingest_cmd);

  auto* features_cmd = app.add_subcommand("features", "compute feature vectors for a manifest; writes features.txt");
  features_opts.attach(features_cmd);

  auto* embed_cmd = app.add_subcommand("embed", "embed a feature file in 2-D; writes layout.json");
  std::string embed_features;
  embed_cmd->add_option("--features", embed_features, "feature file")->required();
  embed_opts.attach(embed_cmd);

  auto* gridify_cmd = app.add_subcommand("gridify", "assign layout points to grid cells; writes grid.json");
  std::string gridify_layout;
  gridify_cmd->add_option("--layout", gridify_layout, "layout.json from embed")->required();
  gridify_opts.attach(gridify_cmd);

  auto* atlas_cmd = app.add_subcommand("atlas", "run every stage and write <out>/maps/<name>.json");
  atlas_opts.attach(atlas_cmd);

  auto* serve_cmd = app.add_subcommand("serve", "serve map documents over HTTP");
  serve_opts.attach(serve_cmd);

  auto* rate_cmd = app.add_subcommand("rate-stats", "descriptive statistics for a ratings CSV");
  std::string ratings_path, rate_out;
  rate_cmd->add_option("--ratings", ratings_path, "ratings CSV")->required()->check(CLI::ExistingFile);
  rate_cmd->add_option("--out", rate_out, "write the report here instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth_cmd) {
      const auto corpus = synth::synth_corpus(synth::default_spec(synth_classes, synth_per_class), synth_seed);
      pipeline::write_synth_corpus(corpus, synth_out);
      std::cout << "wrote " << corpus.records.size() << " records to " << synth_out << '\n';
    } else if (*ingest_cmd) {
      const auto config = ingest_opts.resolve();
      require_path(config.manifest, "manifest");
      const auto result = pipeline::ingest(config);
      std::ostringstream kept;
      corpus::write_manifest(kept, result.kept);
      pipeline::write_text(config.out / "kept.jsonl", kept.str());
      const auto report = corpus::to_json(result.report).dump(2);
      pipeline::write_text(config.out / "filter_report.json", report + "\n");
      std::cout << report << '\n';
    } else if (*features_cmd) {
      const auto config = features_opts.resolve();
      require_path(config.manifest, "manifest");
      const auto feats = pipeline::compute_features(pipeline::read_manifest(config.manifest), config);
      std::ostringstream text;
      features::write_feature_text(text, feats);
      pipeline::write_text(config.out / "features.txt", text.str());
      std::cout << feats.size() << " vectors of dim " << feats.dim() << '\n';
    } else if (*embed_cmd) {
      const auto config = embed_opts.resolve();
      const auto feats = pipeline::read_features(embed_features);
      const auto metric = config.metric.value_or(metrics::default_metric(feats.kind()));
      const auto embedding = embed::embed(feats, metric, config.embed);
      pipeline::write_text(config.out / "layout.json",
                           pipeline::layout_to_json(embedding, feats.kind()).dump(1) + "\n");
      std::cout << "embedded " << embedding.layout.size() << " points\n";
    } else if (*gridify_cmd) {
      const auto config = gridify_opts.resolve();
      const auto layout = pipeline::layout_from_json(read_json(gridify_layout));
      const auto grid = pipeline::gridify_layout(layout.layout, config.occupancy);
      pipeline::write_text(config.out / "grid.json", pipeline::grid_to_json(grid).dump(1) + "\n");
      std::cout << "level " << grid.level << ", " << grid.cells.size() << " cells\n";
    } else if (*atlas_cmd) {
      const auto config = atlas_opts.resolve();
      require_path(config.manifest, "manifest");
      pipeline::build_atlas(config, &std::cout);
    } else if (*serve_cmd) {
      const auto config = serve_opts.resolve();
      auto svc = service::MapService::load_directory(config.resolved_maps_dir());
      if (!config.ui_root.empty()) svc.set_ui_root(config.ui_root);
      httplib::Server server;
      svc.bind(server);
      if (!server.bind_to_port(config.host, config.port))
        throw Error("cannot bind " + config.host + ":" + std::to_string(config.port));
      g_server = &server;
      std::signal(SIGINT, stop_server);
      std::signal(SIGTERM, stop_server);
      std::cout << "serving " << svc.maps().size() << " map(s) on http://" << config.host << ':' << config.port
                << std::endl;
      server.listen_after_bind();
      g_server = nullptr;
    } else if (*rate_cmd) {
      std::ifstream in(ratings_path);
      if (!in) throw Error("cannot open " + ratings_path);
      const auto report = ratings::stats_report(ratings::load_ratings(in)).dump(2) + "\n";
      if (rate_out.empty())
        std::cout << report;
      else
        pipeline::write_text(rate_out, report);
    }
  } catch (const std::exception& e) {
    std::cerr << "metalvis: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
