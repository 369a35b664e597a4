#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "embed.hpp"
#include "error.hpp"

// Hagrid-style gridification: points are snapped to a 2^r x 2^r grid and
// collisions are resolved by walking forward along a Hilbert curve.
namespace metalvis::gridify {

inline constexpr std::string_view kCurve = "hilbert";
inline constexpr std::string_view kCollisionPolicy = "hilbert/forward-wrap";
inline constexpr unsigned kMaxLevel = 31;

struct Cell {
  std::int64_t x;
  std::int64_t y;

  bool operator==(const Cell&) const = default;
  auto operator<=>(const Cell&) const = default;
};

inline std::uint64_t cell_count(unsigned level) { return std::uint64_t{1} << (2 * level); }

// Position of step d on the order-r curve. Starts at (0,0), first step to
// (0,1), ends at (2^r - 1, 0).
inline Cell hilbert_d2xy(unsigned level, std::uint64_t d) {
  if (level > kMaxLevel) throw Error("hilbert level too large");
  if (d >= cell_count(level))
    throw Error("hilbert index " + std::to_string(d) + " out of range for level " + std::to_string(level));
  std::uint64_t x = 0, y = 0, t = d;
  for (std::uint64_t s = 1; s < (std::uint64_t{1} << level); s <<= 1) {
    const std::uint64_t rx = 1 & (t / 2);
    const std::uint64_t ry = 1 & (t ^ rx);
    if (ry == 0) {
      if (rx == 1) {
        x = s - 1 - x;
        y = s - 1 - y;
      }
      std::swap(x, y);
    }
    x += s * rx;
    y += s * ry;
    t /= 4;
  }
  return {static_cast<std::int64_t>(x), static_cast<std::int64_t>(y)};
}

inline std::uint64_t hilbert_xy2d(unsigned level, std::int64_t cx, std::int64_t cy) {
  if (level > kMaxLevel) throw Error("hilbert level too large");
  const std::int64_t side = std::int64_t{1} << level;
  if (cx < 0 || cy < 0 || cx >= side || cy >= side)
    throw Error("cell (" + std::to_string(cx) + ", " + std::to_string(cy) + ") outside level " +
                std::to_string(level) + " grid");
  std::uint64_t x = static_cast<std::uint64_t>(cx), y = static_cast<std::uint64_t>(cy), d = 0;
  for (std::uint64_t s = static_cast<std::uint64_t>(side) / 2; s > 0; s /= 2) {
    const std::uint64_t rx = (x & s) > 0 ? 1 : 0;
    const std::uint64_t ry = (y & s) > 0 ? 1 : 0;
    d += s * s * ((3 * rx) ^ ry);
    if (ry == 0) {
      if (rx == 1) {
        x = s - 1 - (x & (s - 1));
        y = s - 1 - (y & (s - 1));
      }
      std::swap(x, y);
    }
    x &= s - 1;
    y &= s - 1;
  }
  return d;
}

// Smallest r with occupancy * 4^r >= n.
inline unsigned choose_level(std::size_t n, double occupancy = 1.0) {
  if (n < 1) throw Error("choose_level: need at least one item");
  if (!(occupancy > 0.0) || occupancy > 1.0) throw Error("choose_level: occupancy must be in (0, 1]");
  for (unsigned r = 0; r <= kMaxLevel; ++r)
    if (occupancy * static_cast<double>(cell_count(r)) >= static_cast<double>(n)) return r;
  throw Error("choose_level: item count exceeds the largest supported grid");
}

// Min-max scale each axis onto [0, 2^r - 1e-9] and floor. A degenerate
// axis puts everything at 0.
inline std::vector<Cell> quantize_points(const embed::Layout2D& layout, unsigned level) {
  std::vector<Cell> cells(layout.size(), Cell{0, 0});
  if (layout.size() == 0) return cells;
  const double extent = static_cast<double>(std::int64_t{1} << level) - 1e-9;
  for (int axis = 0; axis < 2; ++axis) {
    double lo = layout.coords.front()[axis], hi = lo;
    for (const auto& c : layout.coords) {
      if (!std::isfinite(c[axis])) throw Error("quantize_points: non-finite coordinate");
      lo = std::min(lo, c[axis]);
      hi = std::max(hi, c[axis]);
    }
    const double range = hi - lo;
    for (std::size_t i = 0; i < layout.size(); ++i) {
      std::int64_t q = 0;
      if (range > 0.0) q = static_cast<std::int64_t>(std::floor((layout.coords[i][axis] - lo) / range * extent));
      (axis == 0 ? cells[i].x : cells[i].y) = q;
    }
  }
  return cells;
}

struct GridAssignment {
  unsigned level = 0;
  std::string curve{kCurve};
  std::map<std::string, Cell> cells;

  bool operator==(const GridAssignment&) const = default;
};

// Items are processed by (target curve index, id); each takes the first
// free curve index at or after its target, wrapping to 0 past the end.
inline GridAssignment assign_cells(const embed::Layout2D& layout, unsigned level) {
  const std::size_t n = layout.size();
  if (level > 15) throw Error("assign_cells: level too large for an occupancy table");
  const std::uint64_t capacity = cell_count(level);
  if (capacity < n)
    throw Error("grid capacity " + std::to_string(capacity) + " < " + std::to_string(n) + " items");

  const auto quantized = quantize_points(layout, level);
  std::vector<std::uint64_t> target(n);
  for (std::size_t i = 0; i < n; ++i) target[i] = hilbert_xy2d(level, quantized[i].x, quantized[i].y);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::tie(target[a], layout.ids[a]) < std::tie(target[b], layout.ids[b]);
  });

  std::vector<bool> taken(capacity, false);
  GridAssignment out;
  out.level = level;
  for (std::size_t i : order) {
    std::uint64_t d = target[i];
    while (taken[d]) d = (d + 1) % capacity;
    taken[d] = true;
    if (!out.cells.emplace(layout.ids[i], hilbert_d2xy(level, d)).second)
      throw Error("assign_cells: duplicate id '" + layout.ids[i] + "'");
  }
  return out;
}

}  // namespace metalvis::gridify
