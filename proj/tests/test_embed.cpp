#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "metalvis/embed.hpp"
#include "metalvis/features.hpp"
#include "metalvis/synth.hpp"
#include "support.hpp"

using namespace metalvis;
using embed::EmbedParams;

namespace {

metrics::NeighborGraph random_graph(std::mt19937& gen, std::size_t n, std::size_t k) {
  features::FeatureSet set(features::FeatureKind::latent, 3);
  std::normal_distribution<double> g;
  for (std::size_t i = 0; i < n; ++i) set.add("v" + std::to_string(100 + i), {g(gen), g(gen), g(gen)});
  return metrics::knn_graph(set, metrics::Metric::euclidean, k);
}

features::FeatureSet cluster_histograms(std::size_t per_class, std::uint64_t seed, std::vector<std::size_t>* labels) {
  const auto corpus = synth::synth_corpus(synth::default_spec(3, per_class), seed);
  features::FeatureSet set(features::FeatureKind::histogram, 64);
  for (std::size_t i = 0; i < corpus.records.size(); ++i)
    set.add(corpus.records[i].id, features::color_histogram(corpus.images[i]));
  if (labels) *labels = corpus.classes;  // ids are class-major, matching set order
  return set;
}

}  // namespace

TEST(SmoothKnn, NearestWeightIsOne) {
  std::mt19937 gen(20);
  const auto g = random_graph(gen, 40, 5);
  const auto s = embed::smooth_knn(g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    EXPECT_EQ(s.rho[i], g.neighbors[i][0].distance);
    EXPECT_EQ(s.weights[i][0].distance, 1.0);
    for (const auto& w : s.weights[i]) {
      EXPECT_GT(w.distance, 0.0);
      EXPECT_LE(w.distance, 1.0);
    }
  }
}

TEST(SmoothKnn, EquidistantNeighborsClamp) {
  metrics::NeighborGraph g;
  g.k = 3;
  g.ids = {"a", "b", "c", "d"};
  g.neighbors.resize(4);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      if (i != j) g.neighbors[i].push_back({j, 2.0});
  const auto s = embed::smooth_knn(g);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(s.sigma[i], embed::kSigmaMin);
    for (const auto& w : s.weights[i]) EXPECT_EQ(w.distance, 1.0);
  }
}

TEST(SmoothKnn, WeightSumsHitTarget) {
  std::mt19937 gen(21);
  for (std::size_t k : {2u, 5u, 15u}) {
    const auto g = random_graph(gen, 50, k);
    const auto s = embed::smooth_knn(g);
    for (std::size_t i = 0; i < g.size(); ++i) {
      double sum = 0.0;
      for (const auto& nb : g.neighbors[i]) sum += std::exp(-std::max(0.0, nb.distance - s.rho[i]) / s.sigma[i]);
      EXPECT_TRUE(std::abs(sum - std::log2(static_cast<double>(k))) <= 1e-3 || s.sigma[i] == embed::kSigmaMin)
          << "node " << i << " k " << k << " sum " << sum;
      EXPECT_GE(s.sigma[i], embed::kSigmaMin);
    }
  }
}

TEST(FuzzyUnion, Examples) {
  EXPECT_EQ(embed::fuzzy_or(1.0, 0.0), 1.0);
  EXPECT_EQ(embed::fuzzy_or(0.5, 0.5), 0.75);
  embed::SmoothedKnn s;
  s.ids = {"a", "b", "c"};
  s.k = 1;
  s.weights = {{{1, 0.5}}, {{0, 0.5}}, {{1, 1.0}}};
  const auto g = embed::fuzzy_union(s);
  ASSERT_EQ(g.edges.size(), 2u);
  EXPECT_EQ(g.edges[0], (embed::FuzzyEdge{0, 1, 0.75}));
  EXPECT_EQ(g.edges[1], (embed::FuzzyEdge{1, 2, 1.0}));
}

TEST(FuzzyUnion, BoundsAndShape) {
  std::mt19937 gen(22);
  const auto s = embed::smooth_knn(random_graph(gen, 60, 6));
  std::map<std::pair<std::size_t, std::size_t>, double> directed;
  for (std::size_t i = 0; i < s.weights.size(); ++i)
    for (const auto& [j, w] : s.weights[i]) directed[{i, j}] = w;
  const auto g = embed::fuzzy_union(s);
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const auto& e : g.edges) {
    EXPECT_LT(e.i, e.j);
    EXPECT_TRUE(seen.insert({e.i, e.j}).second);
    const double p = directed.count({e.i, e.j}) ? directed[{e.i, e.j}] : 0.0;
    const double q = directed.count({e.j, e.i}) ? directed[{e.j, e.i}] : 0.0;
    EXPECT_GE(e.weight, std::max(p, q));
    EXPECT_LE(e.weight, std::min(1.0, p + q));
    EXPECT_GT(e.weight, 0.0);
  }
}

// Oracle: scipy.optimize.curve_fit on the same 300-sample target, run once
// and frozen here.
TEST(FitAb, MatchesLeastSquaresOracle) {
  struct Case {
    double min_dist, spread, a, b, rmse;
  };
  const Case cases[] = {
      {0.1, 1.0, 1.5769434602697652, 0.8950608778515733, 0.01619005024349704},
      {0.5, 1.0, 0.5830300203414425, 1.3341669924314914, 0.020716423085911227},
      {0.01, 1.0, 1.8956058664339035, 0.8006378442860499, 0.023127614643773726},
      {0.1, 2.0, 0.5446605399418663, 0.8420554268341789, 0.019516321914620754},
  };
  for (const auto& c : cases) {
    const auto fit = embed::fit_ab(c.min_dist, c.spread);
    EXPECT_NEAR(fit.a, c.a, 1e-3 * c.a) << c.min_dist << "/" << c.spread;
    EXPECT_NEAR(fit.b, c.b, 1e-3 * c.b) << c.min_dist << "/" << c.spread;
    EXPECT_NEAR(embed::curve_rmse(embed::curve_samples(c.min_dist, c.spread), fit.a, fit.b), c.rmse, 1e-7);
  }
}

TEST(FitAb, MonotoneCurve) {
  const auto fit = embed::fit_ab(0.1, 1.0);
  const auto s = embed::curve_samples(0.1, 1.0);
  for (std::size_t i = 1; i < s.d.size(); ++i)
    EXPECT_LE(embed::low_dim_similarity(s.d[i], fit.a, fit.b), embed::low_dim_similarity(s.d[i - 1], fit.a, fit.b));
}

TEST(FitAb, RejectsBadArguments) {
  EXPECT_THROW(embed::fit_ab(0.0, 1.0), Error);
  EXPECT_THROW(embed::fit_ab(2.0, 1.0), Error);
}

TEST(Params, Validation) {
  EmbedParams p;
  EXPECT_NO_THROW(p.validate());
  p.k = 1;
  EXPECT_THROW(p.validate(), Error);
  p = {};
  p.n_epochs = 0;
  EXPECT_THROW(p.validate(), Error);
  p = {};
  p.min_dist = 2.0;
  EXPECT_THROW(p.validate(), Error);
  p = {};
  p.a = -1.0;
  EXPECT_THROW(p.validate(), Error);
}

TEST(Layout, InitialDrawInRange) {
  Rng rng(3);
  const auto l = embed::initial_layout({"a", "b", "c"}, rng);
  for (const auto& c : l.coords)
    for (double v : c) {
      EXPECT_GE(v, -embed::kInitExtent);
      EXPECT_LE(v, embed::kInitExtent);
    }
}

TEST(Layout, OneEpochFiniteAndClipped) {
  std::mt19937 gen(23);
  const auto fuzzy = embed::fuzzy_union(embed::smooth_knn(random_graph(gen, 30, 4)));
  EmbedParams p = embed::resolve_curve({});
  p.n_epochs = 1;
  p.initial_lr = 1.0;
  const auto out = embed::optimize_layout(fuzzy, p);
  Rng rng(p.seed);
  const auto init = embed::initial_layout(fuzzy.ids, rng);
  std::vector<std::size_t> degree(fuzzy.size(), 0);
  for (const auto& e : fuzzy.edges) ++degree[e.i], ++degree[e.j];
  for (std::size_t i = 0; i < out.size(); ++i)
    for (int c = 0; c < 2; ++c) {
      ASSERT_TRUE(std::isfinite(out.coords[i][c]));
      const double bound = embed::kGradientClip * static_cast<double>(degree[i] * (2 + p.negative_samples));
      EXPECT_LE(std::abs(out.coords[i][c] - init.coords[i][c]), bound);
    }
}

TEST(Layout, RequiresResolvedCurve) {
  std::mt19937 gen(24);
  const auto fuzzy = embed::fuzzy_union(embed::smooth_knn(random_graph(gen, 10, 3)));
  EXPECT_THROW(embed::optimize_layout(fuzzy, EmbedParams{}), Error);
  EXPECT_THROW(embed::optimize_layout(embed::FuzzyGraph{}, embed::resolve_curve({})), Error);
}

TEST(Embed, MinimalCorpus) {
  features::FeatureSet set(features::FeatureKind::latent, 2);
  for (int i = 0; i < 3; ++i) set.add("x" + std::to_string(i), {double(i), double(i * i)});
  EmbedParams p;
  p.k = 2;
  p.n_epochs = 50;
  const auto e = embed::embed(set, metrics::Metric::euclidean, p);
  ASSERT_EQ(e.layout.size(), 3u);
  for (const auto& c : e.layout.coords) EXPECT_TRUE(std::isfinite(c[0]) && std::isfinite(c[1]));
  EXPECT_TRUE(e.params.a && e.params.b);
}

TEST(Embed, DuplicateItemsAreMutualNeighbors) {
  features::FeatureSet set(features::FeatureKind::latent, 2);
  std::mt19937 gen(25);
  std::normal_distribution<double> g;
  for (int i = 0; i < 20; ++i) set.add("p" + std::to_string(10 + i), {g(gen), g(gen)});
  set.add("p99", set.at("p13"));
  const auto graph = metrics::knn_graph(set, metrics::Metric::euclidean, 3);
  const auto ids = set.ids();
  const auto a = std::find(ids.begin(), ids.end(), "p13") - ids.begin();
  const auto b = std::find(ids.begin(), ids.end(), "p99") - ids.begin();
  EXPECT_EQ(graph.neighbors[a][0], (metrics::Neighbor{static_cast<std::size_t>(b), 0.0}));
  EXPECT_EQ(graph.neighbors[b][0], (metrics::Neighbor{static_cast<std::size_t>(a), 0.0}));
}

TEST(Embed, ThreeClusterQualityAndDeterminism) {
  std::vector<std::size_t> labels;
  const auto set = cluster_histograms(100, 7, &labels);
  const EmbedParams params;
  const auto first = embed::embed(set, metrics::Metric::l1, params);
  const auto second = embed::embed(set, metrics::Metric::l1, params);
  EXPECT_EQ(first.layout, second.layout);

  // local structure: the 5 nearest layout neighbours share the class
  std::size_t same = 0;
  const auto& y = first.layout.coords;
  for (std::size_t i = 0; i < y.size(); ++i) {
    std::vector<std::pair<double, std::size_t>> d;
    for (std::size_t j = 0; j < y.size(); ++j)
      if (j != i) d.emplace_back(std::hypot(y[i][0] - y[j][0], y[i][1] - y[j][1]), j);
    std::partial_sort(d.begin(), d.begin() + 5, d.end());
    for (int m = 0; m < 5; ++m) same += labels[d[m].second] == labels[i];
  }
  EXPECT_GE(static_cast<double>(same) / (5.0 * y.size()), 0.95);
  EXPECT_GT(testsupport::silhouette(y, labels), 0.25);

  const auto fuzzy = embed::fuzzy_union(embed::smooth_knn(metrics::knn_graph(set, metrics::Metric::l1, params.k)));
  const auto pairs = testsupport::sample_pairs(fuzzy);
  Rng rng(params.seed);
  const auto init = embed::initial_layout(fuzzy.ids, rng);
  const double before = testsupport::fuzzy_cross_entropy(pairs, init.coords, *first.params.a, *first.params.b);
  const double after = testsupport::fuzzy_cross_entropy(pairs, first.layout.coords, *first.params.a, *first.params.b);
  EXPECT_LE(after, 0.7 * before);
}

TEST(Embed, SeedChangesLayout) {
  const auto set = cluster_histograms(10, 1, nullptr);
  EmbedParams p;
  p.k = 5;
  p.n_epochs = 20;
  const auto a = embed::embed(set, metrics::Metric::l1, p);
  p.seed = 43;
  EXPECT_NE(embed::embed(set, metrics::Metric::l1, p).layout, a.layout);
}
