#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "metalvis/corpus.hpp"
#include "metalvis/features.hpp"
#include "metalvis/metrics.hpp"
#include "metalvis/synth.hpp"
#include "fixture_data.hpp"
#include "support.hpp"

using namespace metalvis;
using corpus::parse_genre_string;
using Tags = std::set<std::string>;

namespace {

std::vector<corpus::BandRecord> filter_fixture() {
  std::ifstream in(testsupport::source_dir() / "tests" / "fixtures" / "filter20.jsonl");
  return corpus::parse_manifest(in);
}

corpus::BandRecord band(std::string id, Tags genres, std::optional<std::string> label = "L",
                        Tags themes = {"t"}, corpus::Status status = corpus::Status::active) {
  corpus::BandRecord r;
  r.id = std::move(id);
  r.name = r.id;
  r.genres = std::move(genres);
  r.themes = std::move(themes);
  r.label = std::move(label);
  r.status = status;
  return r;
}

}  // namespace

TEST(GenreParse, DocumentedCases) {
  EXPECT_EQ(parse_genre_string("Black Metal"), (Tags{"black metal"}));
  EXPECT_EQ(parse_genre_string("Death/Thrash Metal"), (Tags{"death metal", "thrash metal"}));
  EXPECT_EQ(parse_genre_string("Progressive Metal (early), Djent (later)"), (Tags{"progressive metal", "djent"}));
}

TEST(GenreParse, FixtureStrings) {
  const auto& cases = testsupport::kFixtureGenreCases;
  ASSERT_EQ(cases.size(), 20u);
  for (const auto& [raw, expected] : cases) EXPECT_EQ(parse_genre_string(raw), expected) << "input: " << raw;
}

TEST(GenreParse, IdempotentOnOutputs) {
  for (const char* raw : {"Black/Death Metal", "Progressive Metal (early), Djent (later)", "Doom/Stoner Rock",
                          "Power/Speed Metal, Heavy Metal"}) {
    for (const auto& tag : parse_genre_string(raw)) EXPECT_EQ(parse_genre_string(tag), (Tags{tag}));
  }
}

TEST(Manifest, EmptyStream) {
  std::istringstream in("");
  EXPECT_TRUE(corpus::parse_manifest(in).empty());
}

TEST(Manifest, StatusParsesCaseInsensitively) {
  std::istringstream in(R"({"id":"b1","name":"B","genre":"Black Metal","themes":[],"label":null,"status":"Active","country":null,"logo":"b1.png"})");
  const auto rs = corpus::parse_manifest(in);
  ASSERT_EQ(rs.size(), 1u);
  EXPECT_EQ(rs[0].status, corpus::Status::active);
  EXPECT_EQ(rs[0].genres, (Tags{"black metal"}));
  EXPECT_EQ(corpus::parse_status("wat"), corpus::Status::unknown);
  EXPECT_EQ(corpus::parse_status("SPLIT-UP"), corpus::Status::inactive);
}

TEST(Manifest, DuplicateIdNamed) {
  std::istringstream in("{\"id\":\"b1\",\"name\":\"x\"}\n{\"id\":\"b1\",\"name\":\"y\"}\n");
  try {
    corpus::parse_manifest(in);
    FAIL() << "expected duplicate-id error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("b1"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(Manifest, MalformedLineNumbered) {
  std::istringstream in("{\"id\":\"a\",\"name\":\"x\"}\n\n{not json\n");
  try {
    corpus::parse_manifest(in);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(Manifest, RoundTrip) {
  const auto records = filter_fixture();
  std::ostringstream out;
  corpus::write_manifest(out, records);
  std::istringstream in(out.str());
  EXPECT_EQ(corpus::parse_manifest(in), records);
}

TEST(Filters, TwentyRecordFixtureMatchesHandCounts) {
  const auto result = corpus::apply_filters(filter_fixture());
  std::vector<std::string> kept;
  for (const auto& r : result.kept) kept.push_back(r.id);
  EXPECT_EQ(kept, (std::vector<std::string>{"r01", "r02", "r09", "r10", "r13", "r16", "r19", "r20"}));
  EXPECT_EQ(result.report.total_in, 20u);
  EXPECT_EQ(result.report.kept, 8u);
  EXPECT_EQ(result.report.dropped_by_rule.at("inactive"), 5u);
  EXPECT_EQ(result.report.dropped_by_rule.at("unsigned"), 3u);
  EXPECT_EQ(result.report.dropped_by_rule.at("no_themes"), 2u);
  EXPECT_EQ(result.report.dropped_by_rule.at("single_band_label"), 2u);
}

TEST(Filters, InactiveDroppedByFirstRule) {
  const auto result = corpus::apply_filters({band("x", {"a"}, std::nullopt, {}, corpus::Status::inactive)});
  EXPECT_EQ(result.report.dropped_by_rule.at("inactive"), 1u);
  EXPECT_EQ(result.report.dropped_by_rule.at("unsigned"), 0u);
}

TEST(Filters, SharedLabelPairKept) {
  const auto result = corpus::apply_filters({band("a", {"x"}), band("b", {"y"})});
  EXPECT_EQ(result.kept.size(), 2u);
}

TEST(Filters, ConservationAndOrderIndependence) {
  auto records = filter_fixture();
  std::mt19937 gen(5);
  const auto reference = corpus::apply_filters(records);
  for (int trial = 0; trial < 20; ++trial) {
    std::shuffle(records.begin(), records.end(), gen);
    const auto r = corpus::apply_filters(records);
    std::size_t dropped = 0;
    for (const auto& [rule, n] : r.report.dropped_by_rule) dropped += n;
    EXPECT_EQ(r.report.kept + dropped, r.report.total_in);
    EXPECT_EQ(r.report, reference.report);
    std::set<std::string> a, b;
    for (const auto& x : r.kept) a.insert(x.id);
    for (const auto& x : reference.kept) b.insert(x.id);
    EXPECT_EQ(a, b);
  }
}

TEST(Vocabulary, Examples) {
  const std::vector<corpus::BandRecord> rs = {band("a", {"x"}), band("b", {"x"}), band("c", {"y"})};
  EXPECT_EQ(corpus::build_vocabulary(rs, 1).tags, (std::vector<std::string>{"x"}));
  EXPECT_EQ(corpus::build_vocabulary(rs, 10).tags, (std::vector<std::string>{"x", "y"}));
  const std::vector<corpus::BandRecord> tie = {band("a", {"b"}), band("b", {"a"})};
  EXPECT_EQ(corpus::build_vocabulary(tie, 1).tags, (std::vector<std::string>{"a"}));
  EXPECT_THROW(corpus::build_vocabulary(rs, 0), Error);
}

TEST(Vocabulary, NonIncreasingWithLexicographicTies) {
  std::mt19937 gen(11);
  std::vector<corpus::BandRecord> rs;
  for (int i = 0; i < 200; ++i) {
    Tags g;
    for (int t = 0; t < 3; ++t) g.insert("tag" + std::to_string(gen() % 12));
    rs.push_back(band("id" + std::to_string(i), g));
  }
  const auto v = corpus::build_vocabulary(rs, 51);
  for (std::size_t i = 1; i < v.size(); ++i) {
    EXPECT_GE(v.frequencies[i - 1], v.frequencies[i]);
    if (v.frequencies[i - 1] == v.frequencies[i]) {
      EXPECT_LT(v.tags[i - 1], v.tags[i]);
    }
  }
}

TEST(Vocabulary, TagVectors) {
  corpus::TagVocabulary vocab{{"black metal", "death metal"}, {2, 1}};
  EXPECT_EQ(corpus::tag_vector(band("a", {"death metal"}), vocab), (std::vector<double>{0, 1}));
  EXPECT_EQ(corpus::tag_vector(band("a", {"polka"}), vocab), (std::vector<double>{0, 0}));
  EXPECT_EQ(corpus::tag_vector(band("a", {"black metal", "death metal"}), vocab), (std::vector<double>{1, 1}));
  EXPECT_THROW(corpus::tag_vector(band("a", {}), corpus::TagVocabulary{}), Error);
  EXPECT_EQ(corpus::primary_genre(band("a", {"death metal", "black metal"}), vocab), "black metal");
}

TEST(Synth, DeterministicAndCardinal) {
  const auto spec = synth::default_spec(2, 5);
  const auto a = synth::synth_corpus(spec, 3);
  const auto b = synth::synth_corpus(spec, 3);
  EXPECT_EQ(a.records, b.records);
  EXPECT_EQ(a.images, b.images);
  EXPECT_EQ(a.records.size(), 10u);
  Tags genres;
  for (const auto& r : a.records) genres.insert(r.genres.begin(), r.genres.end());
  EXPECT_EQ(genres.size(), 2u);
  EXPECT_NE(synth::synth_corpus(spec, 4).images, a.images);
}

TEST(Synth, InterClassHistogramDistanceExceedsIntraClass) {
  const auto c = synth::synth_corpus(synth::default_spec(3, 20), 9);
  std::vector<std::vector<double>> h;
  for (const auto& img : c.images) h.push_back(features::color_histogram(img));
  double intra = 0, inter = 0;
  std::size_t ni = 0, ne = 0;
  for (std::size_t i = 0; i < h.size(); ++i)
    for (std::size_t j = i + 1; j < h.size(); ++j) {
      const double d = metrics::l1_distance(h[i], h[j]);
      if (c.classes[i] == c.classes[j]) {
        intra += d;
        ++ni;
      } else {
        inter += d;
        ++ne;
      }
    }
  EXPECT_GT(inter / ne, intra / ni);
}

TEST(Synth, InvalidSpecs) {
  EXPECT_THROW(synth::default_spec(1, 5), Error);
  EXPECT_THROW(synth::synth_corpus(synth::default_spec(2, 1), 1), Error);
  auto spec = synth::default_spec(2, 3);
  spec.classes[1].genre = spec.classes[0].genre;
  EXPECT_THROW(synth::synth_corpus(spec, 1), Error);
}
