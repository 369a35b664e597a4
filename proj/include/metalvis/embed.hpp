#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"
#include "features.hpp"
#include "metrics.hpp"
#include "random.hpp"

// UMAP-style neighbour embedding: calibrated kNN weights, fuzzy union,
// curve fitting, and sampled attractive/repulsive layout optimization.
namespace metalvis::embed {

inline constexpr double kSigmaMin = 1e-3;
inline constexpr double kGradientClip = 4.0;
inline constexpr double kRepulsionGuard = 0.001;
inline constexpr double kInitExtent = 10.0;

struct EmbedParams {
  std::size_t k = 15;
  double min_dist = 0.1;
  double spread = 1.0;
  std::size_t n_epochs = 500;
  std::size_t negative_samples = 5;
  double initial_lr = 1.0;
  std::uint64_t seed = 42;
  // Derived from min_dist/spread by fit_ab unless set.
  std::optional<double> a;
  std::optional<double> b;

  void validate() const {
    if (k < 2) throw Error("embed: k must be at least 2");
    if (!(min_dist > 0.0) || !(min_dist <= spread))
      throw Error("embed: min_dist must lie in (0, spread]");
    if (n_epochs < 1) throw Error("embed: n_epochs must be at least 1");
    if (!(initial_lr > 0.0)) throw Error("embed: initial_lr must be positive");
    if (a && !(*a > 0.0)) throw Error("embed: a must be positive");
    if (b && !(*b > 0.0)) throw Error("embed: b must be positive");
  }

  bool operator==(const EmbedParams&) const = default;
};

// ---------------------------------------------------------------------------
// Local calibration

struct SmoothedKnn {
  std::vector<std::string> ids;
  std::size_t k = 0;
  std::vector<double> rho;
  std::vector<double> sigma;
  // weights[i][m] belongs to neighbour graph.neighbors[i][m]
  std::vector<std::vector<metrics::Neighbor>> weights;
};

inline double membership(double d, double rho, double sigma) {
  return std::exp(-std::max(0.0, d - rho) / sigma);
}

// Per node: rho = nearest-neighbour distance; sigma by bisection so the
// membership sum hits log2(k). Unreachable targets clamp to kSigmaMin.
inline SmoothedKnn smooth_knn(const metrics::NeighborGraph& graph) {
  const std::size_t k = graph.k;
  if (k < 2) throw Error("smooth_knn: k must be at least 2");
  const double target = std::log2(static_cast<double>(k));
  const std::size_t n = graph.size();

  SmoothedKnn out;
  out.ids = graph.ids;
  out.k = k;
  out.rho.resize(n);
  out.sigma.resize(n);
  out.weights.resize(n);

  for (std::size_t i = 0; i < n; ++i) {
    const auto& row = graph.neighbors[i];
    const double rho = row.front().distance;
    const auto weight_sum = [&](double sigma) {
      double s = 0.0;
      for (const auto& nb : row) s += membership(nb.distance, rho, sigma);
      return s;
    };

    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    double mid = 1.0;
    for (int iter = 0; iter < 64; ++iter) {
      const double s = weight_sum(mid);
      if (std::abs(s - target) < 1e-5) break;
      if (s > target) {
        hi = mid;
        mid = (lo + hi) / 2.0;
      } else {
        lo = mid;
        mid = std::isinf(hi) ? mid * 2.0 : (lo + hi) / 2.0;
      }
    }
    const double sigma = std::max(mid, kSigmaMin);

    out.rho[i] = rho;
    out.sigma[i] = sigma;
    auto& w = out.weights[i];
    w.reserve(row.size());
    for (const auto& nb : row) {
      // keep weights strictly positive even when exp underflows
      const double m = std::max(membership(nb.distance, rho, sigma), std::numeric_limits<double>::min());
      w.push_back({nb.index, m});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Symmetrization

struct FuzzyEdge {
  std::size_t i;
  std::size_t j;
  double weight;

  bool operator==(const FuzzyEdge&) const = default;
};

struct FuzzyGraph {
  std::vector<std::string> ids;
  std::vector<FuzzyEdge> edges;  // i < j, sorted by (i, j)

  std::size_t size() const { return ids.size(); }
};

// p + q - pq, arranged so the result never rounds below max(p, q) or above 1
inline double fuzzy_or(double p, double q) {
  const double hi = std::max(p, q), lo = std::min(p, q);
  return std::min(1.0, hi + lo * (1.0 - hi));
}

inline FuzzyGraph fuzzy_union(const SmoothedKnn& smoothed) {
  std::map<std::pair<std::size_t, std::size_t>, std::pair<double, double>> pairs;
  for (std::size_t i = 0; i < smoothed.weights.size(); ++i) {
    for (const auto& [j, w] : smoothed.weights[i]) {
      if (i == j) continue;
      auto& slot = pairs[{std::min(i, j), std::max(i, j)}];
      // first = weight from the lower index, second = from the higher
      (i < j ? slot.first : slot.second) = w;
    }
  }
  FuzzyGraph g;
  g.ids = smoothed.ids;
  g.edges.reserve(pairs.size());
  for (const auto& [key, pq] : pairs) {
    const double w = fuzzy_or(pq.first, pq.second);
    if (w > 0.0) g.edges.push_back({key.first, key.second, w});
  }
  return g;
}

// ---------------------------------------------------------------------------
// Curve fitting

struct CurveParams {
  double a;
  double b;
};

inline double low_dim_similarity(double d, double a, double b) {
  return 1.0 / (1.0 + a * std::pow(d, 2.0 * b));
}

struct CurveSamples {
  std::vector<double> d;
  std::vector<double> target;
};

// 300 evenly spaced points on [0, 3*spread] with the offset-exponential target.
inline CurveSamples curve_samples(double min_dist, double spread) {
  CurveSamples s;
  constexpr int n = 300;
  for (int i = 0; i < n; ++i) {
    const double d = 3.0 * spread * i / (n - 1);
    s.d.push_back(d);
    s.target.push_back(d <= min_dist ? 1.0 : std::exp(-(d - min_dist) / spread));
  }
  return s;
}

inline double curve_rmse(const CurveSamples& s, double a, double b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < s.d.size(); ++i) {
    const double r = low_dim_similarity(s.d[i], a, b) - s.target[i];
    sum += r * r;
  }
  return std::sqrt(sum / static_cast<double>(s.d.size()));
}

// Least squares for (a, b): log-spaced grid search, then damped
// Gauss-Newton until the RMSE improvement drops below 1e-8.
inline CurveParams fit_ab(double min_dist, double spread) {
  if (!(min_dist > 0.0) || !(min_dist <= spread))
    throw Error("fit_ab: need 0 < min_dist <= spread");
  const auto samples = curve_samples(min_dist, spread);

  double best_a = 1.0, best_b = 1.0;
  double best = curve_rmse(samples, best_a, best_b);
  for (int ia = 0; ia <= 80; ++ia) {
    const double a = std::pow(10.0, -2.0 + 4.0 * ia / 80.0);
    for (int ib = 0; ib <= 60; ++ib) {
      const double b = 0.05 + 2.95 * ib / 60.0;
      const double e = curve_rmse(samples, a, b);
      if (e < best) {
        best = e;
        best_a = a;
        best_b = b;
      }
    }
  }

  double a = best_a, b = best_b, err = best;
  double damping = 1e-3;
  for (int iter = 0; iter < 500; ++iter) {
    // normal equations of the 2-parameter problem
    double jaa = 0, jab = 0, jbb = 0, ga = 0, gb = 0;
    for (std::size_t i = 0; i < samples.d.size(); ++i) {
      const double x = samples.d[i];
      const double p = x > 0.0 ? std::pow(x, 2.0 * b) : 0.0;
      const double denom = 1.0 + a * p;
      const double phi = 1.0 / denom;
      const double r = phi - samples.target[i];
      const double da = -p / (denom * denom);
      const double db = x > 0.0 ? -a * p * 2.0 * std::log(x) / (denom * denom) : 0.0;
      jaa += da * da;
      jab += da * db;
      jbb += db * db;
      ga += da * r;
      gb += db * r;
    }
    bool improved = false;
    for (int attempt = 0; attempt < 40 && !improved; ++attempt) {
      const double maa = jaa * (1.0 + damping);
      const double mbb = jbb * (1.0 + damping);
      const double det = maa * mbb - jab * jab;
      if (det == 0.0 || !std::isfinite(det)) {
        damping *= 10.0;
        continue;
      }
      const double step_a = -(mbb * ga - jab * gb) / det;
      const double step_b = -(maa * gb - jab * ga) / det;
      const double na = a + step_a, nb = b + step_b;
      if (na > 0.0 && nb > 0.0) {
        const double ne = curve_rmse(samples, na, nb);
        if (ne <= err) {
          const double gain = err - ne;
          a = na;
          b = nb;
          err = ne;
          damping = std::max(damping / 10.0, 1e-12);
          improved = true;
          if (gain < 1e-8) return {a, b};
          break;
        }
      }
      damping *= 10.0;
    }
    // no downhill step at any damping: a stationary point
    if (!improved) return {a, b};
  }
  throw Error("fit_ab did not converge; best candidate a=" + std::to_string(a) +
              " b=" + std::to_string(b) + " rmse=" + std::to_string(err));
}

// ---------------------------------------------------------------------------
// Layout

struct Layout2D {
  std::vector<std::string> ids;
  std::vector<std::array<double, 2>> coords;

  std::size_t size() const { return ids.size(); }

  bool operator==(const Layout2D&) const = default;
};

inline double clip_gradient(double g) { return std::clamp(g, -kGradientClip, kGradientClip); }

// Uniform in [-kInitExtent, kInitExtent]^2, x then y per node.
inline Layout2D initial_layout(const std::vector<std::string>& ids, Rng& rng) {
  Layout2D layout;
  layout.ids = ids;
  layout.coords.resize(ids.size());
  for (auto& c : layout.coords) {
    c[0] = rng.uniform(-kInitExtent, kInitExtent);
    c[1] = rng.uniform(-kInitExtent, kInitExtent);
  }
  return layout;
}

// Sequential SGD. Random draws, in order: 2n initial coordinates (x then y
// per node), then for each firing directed edge its negative-sample node
// indices. Each undirected edge (i, j) is visited as i->j then j->i; the
// attraction moves both endpoints, negative samples move only the source.
inline Layout2D optimize_layout(const FuzzyGraph& graph, const EmbedParams& params) {
  params.validate();
  const std::size_t n = graph.size();
  if (n == 0) throw Error("optimize_layout: empty graph");
  if (!params.a || !params.b) throw Error("optimize_layout: curve parameters a, b must be resolved");
  const double a = *params.a;
  const double b = *params.b;

  Rng rng(params.seed);
  Layout2D layout = initial_layout(graph.ids, rng);

  struct Directed {
    std::size_t from, to;
    double rate;
  };
  double max_w = 0.0;
  for (const auto& e : graph.edges) max_w = std::max(max_w, e.weight);
  std::vector<Directed> directed;
  directed.reserve(2 * graph.edges.size());
  for (const auto& e : graph.edges) {
    directed.push_back({e.i, e.j, e.weight / max_w});
    directed.push_back({e.j, e.i, e.weight / max_w});
  }
  std::vector<double> counter(directed.size(), 0.0);

  for (std::size_t epoch = 0; epoch < params.n_epochs; ++epoch) {
    const double lr = params.initial_lr *
                      (1.0 - static_cast<double>(epoch) / static_cast<double>(params.n_epochs));
    for (std::size_t e = 0; e < directed.size(); ++e) {
      counter[e] += directed[e].rate;
      if (counter[e] < 1.0) continue;
      counter[e] -= 1.0;

      auto& yi = layout.coords[directed[e].from];
      auto& yj = layout.coords[directed[e].to];
      double dx = yi[0] - yj[0], dy = yi[1] - yj[1];
      double d2 = dx * dx + dy * dy;
      if (d2 > 0.0) {
        const double coeff = (-2.0 * a * b * std::pow(d2, b - 1.0)) / (1.0 + a * std::pow(d2, b));
        const double gx = clip_gradient(coeff * dx) * lr;
        const double gy = clip_gradient(coeff * dy) * lr;
        yi[0] += gx;
        yi[1] += gy;
        yj[0] -= gx;
        yj[1] -= gy;
      }

      for (std::size_t s = 0; s < params.negative_samples; ++s) {
        const std::size_t other = static_cast<std::size_t>(rng.below(n));
        if (other == directed[e].from) continue;
        const auto& yk = layout.coords[other];
        dx = yi[0] - yk[0];
        dy = yi[1] - yk[1];
        d2 = dx * dx + dy * dy;
        if (d2 > 0.0) {
          const double coeff = (2.0 * b) / ((kRepulsionGuard + d2) * (1.0 + a * std::pow(d2, b)));
          yi[0] += clip_gradient(coeff * dx) * lr;
          yi[1] += clip_gradient(coeff * dy) * lr;
        } else {
          yi[0] += kGradientClip * lr;
          yi[1] += kGradientClip * lr;
        }
      }
    }
  }
  return layout;
}

struct Embedding {
  Layout2D layout;
  metrics::Metric metric;
  EmbedParams params;  // with a and b resolved
};

// Resolves a and b via fit_ab when they are not given explicitly.
inline EmbedParams resolve_curve(EmbedParams params) {
  params.validate();
  if (!params.a || !params.b) {
    const auto fitted = fit_ab(params.min_dist, params.spread);
    if (!params.a) params.a = fitted.a;
    if (!params.b) params.b = fitted.b;
  }
  return params;
}

inline Embedding embed(const features::FeatureSet& set, metrics::Metric metric, const EmbedParams& params) {
  const auto resolved = resolve_curve(params);
  const auto graph = metrics::knn_graph(set, metric, resolved.k);
  const auto fuzzy = fuzzy_union(smooth_knn(graph));
  return {optimize_layout(fuzzy, resolved), metric, resolved};
}

}  // namespace metalvis::embed
