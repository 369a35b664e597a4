#pragma once

#include "metalvis/pipeline.hpp"
#include "support.hpp"

namespace testsupport {

// Writes a synthetic corpus under dir/corpus and returns a config that
// builds a map of it into dir/out.
inline metalvis::PipelineConfig synth_config(const fs::path& dir, std::size_t classes, std::size_t per_class,
                                             std::uint64_t seed = 11) {
  using namespace metalvis;
  pipeline::write_synth_corpus(synth::synth_corpus(synth::default_spec(classes, per_class), seed), dir / "corpus");
  PipelineConfig c;
  c.name = "synth";
  c.manifest = dir / "corpus" / "manifest.jsonl";
  c.image_root = dir / "corpus";
  c.out = dir / "out";
  return c;
}

}  // namespace testsupport
