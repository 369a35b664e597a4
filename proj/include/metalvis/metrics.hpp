#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"
#include "features.hpp"

namespace metalvis::metrics {

enum class Metric { sokal_michener, sokal_michener_classical, l1, euclidean };

inline std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::sokal_michener: return "sokal_michener";
    case Metric::sokal_michener_classical: return "sokal_michener_classical";
    case Metric::l1: return "l1";
    case Metric::euclidean: break;
  }
  return "euclidean";
}

inline Metric parse_metric(std::string_view s) {
  if (s == "sokal_michener") return Metric::sokal_michener;
  if (s == "sokal_michener_classical") return Metric::sokal_michener_classical;
  if (s == "l1") return Metric::l1;
  if (s == "euclidean") return Metric::euclidean;
  throw Error("unknown metric '" + std::string(s) + "'");
}

// Default metric for each feature family.
inline Metric default_metric(features::FeatureKind kind) {
  switch (kind) {
    case features::FeatureKind::tag: return Metric::sokal_michener;
    case features::FeatureKind::histogram: return Metric::l1;
    default: return Metric::euclidean;
  }
}

enum class SokalVariant {
  umap,       // 2(b+c) / (a + d + 2(b+c))
  classical,  // (b+c) / n
};

namespace detail {

inline void require_same_length(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size())
    throw Error("vector length mismatch: " + std::to_string(u.size()) + " vs " + std::to_string(v.size()));
}

}  // namespace detail

// Binary dissimilarity; nonzero components count as 1.
inline double sokal_michener(std::span<const double> u, std::span<const double> v,
                             SokalVariant variant = SokalVariant::umap) {
  detail::require_same_length(u, v);
  if (u.empty()) throw Error("sokal_michener needs non-empty vectors");
  std::size_t agree = 0, mismatch = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if ((u[i] != 0.0) == (v[i] != 0.0)) {
      ++agree;
    } else {
      ++mismatch;
    }
  }
  if (mismatch == 0) return 0.0;
  if (variant == SokalVariant::classical)
    return static_cast<double>(mismatch) / static_cast<double>(u.size());
  const double r = 2.0 * static_cast<double>(mismatch);
  return r / (static_cast<double>(agree) + r);
}

inline double l1_distance(std::span<const double> u, std::span<const double> v) {
  detail::require_same_length(u, v);
  double sum = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) sum += std::abs(u[i] - v[i]);
  return sum;
}

inline double euclidean_distance(std::span<const double> u, std::span<const double> v) {
  detail::require_same_length(u, v);
  double sum = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double d = u[i] - v[i];
    sum += d * d;
  }
  return std::sqrt(sum);
}

inline double distance(Metric m, std::span<const double> u, std::span<const double> v) {
  switch (m) {
    case Metric::sokal_michener: return sokal_michener(u, v, SokalVariant::umap);
    case Metric::sokal_michener_classical: return sokal_michener(u, v, SokalVariant::classical);
    case Metric::l1: return l1_distance(u, v);
    case Metric::euclidean: break;
  }
  return euclidean_distance(u, v);
}

inline bool is_binary_metric(Metric m) {
  return m == Metric::sokal_michener || m == Metric::sokal_michener_classical;
}

// ---------------------------------------------------------------------------

struct Neighbor {
  std::size_t index;
  double distance;

  bool operator==(const Neighbor&) const = default;
};

// Exact kNN. Node i is ids[i]; each row holds k neighbours sorted by
// (distance, index).
struct NeighborGraph {
  std::size_t k = 0;
  std::vector<std::string> ids;
  std::vector<std::vector<Neighbor>> neighbors;

  std::size_t size() const { return ids.size(); }

  bool operator==(const NeighborGraph&) const = default;
};

inline void check_metric_kind(const features::FeatureSet& set, Metric metric) {
  if (is_binary_metric(metric)) {
    if (set.kind() != features::FeatureKind::tag)
      throw Error(std::string(to_string(metric)) + " requires tag (binary) features, got " +
                  std::string(features::to_string(set.kind())));
    for (const auto& [id, v] : set.vectors())
      for (double x : v)
        if (x != 0.0 && x != 1.0) throw Error("non-binary component in tag vector of '" + id + "'");
  } else if (set.kind() == features::FeatureKind::tag) {
    throw Error(std::string(to_string(metric)) + " is not defined for tag features");
  }
}

// Brute force over all pairs; rows are independent of each other.
inline NeighborGraph knn_graph(const features::FeatureSet& set, Metric metric, std::size_t k) {
  const std::size_t n = set.size();
  if (k < 1) throw Error("k must be at least 1");
  if (k >= n)
    throw Error("k = " + std::to_string(k) + " needs at least k+1 items, have " + std::to_string(n));
  check_metric_kind(set, metric);

  NeighborGraph graph;
  graph.k = k;
  std::vector<const std::vector<double>*> rows;
  rows.reserve(n);
  for (const auto& [id, v] : set.vectors()) {
    graph.ids.push_back(id);
    rows.push_back(&v);
  }

  graph.neighbors.resize(n);
  std::vector<Neighbor> candidates;
  for (std::size_t i = 0; i < n; ++i) {
    candidates.clear();
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) candidates.push_back({j, distance(metric, *rows[i], *rows[j])});
    const auto closer = [](const Neighbor& a, const Neighbor& b) {
      return a.distance < b.distance || (a.distance == b.distance && a.index < b.index);
    };
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k),
                      candidates.end(), closer);
    graph.neighbors[i].assign(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k));
  }
  return graph;
}

}  // namespace metalvis::metrics
