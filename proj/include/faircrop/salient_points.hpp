#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "faircrop/error.hpp"
#include "faircrop/saliency_map.hpp"

namespace faircrop {

inline constexpr double kDefaultSymmetryTolerance = 0.05;
inline constexpr double kDefaultRegionThreshold = 0.3;
inline constexpr double kDefaultMinSepFraction = 0.1;

/// Row-major index of the highest-scoring cell. Ties go to the first cell in
/// row-major order, so an all-zero map yields cell (0, 0).
inline std::size_t max_cell_index(const SaliencyMap& map) {
  std::size_t best = 0;
  const auto scores = map.scores();
  for (std::size_t k = 1; k < scores.size(); ++k)
    if (scores[k] > scores[best]) best = k;
  return best;
}

/// Highest-scoring cell mapped to its representative pixel.
inline ScoredPoint max_salient_point(const SaliencyMap& map) {
  const std::size_t best = max_cell_index(map);
  return {map.cell_point(map.cell_of_index(best)), map.scores()[best]};
}

/// 10% of the source image diagonal.
inline double default_min_separation(const SaliencyMap& map) {
  return kDefaultMinSepFraction * std::hypot(map.source_w(), map.source_h());
}

/// Greedy non-maximum suppression over positive-score cells: take the best
/// remaining cell, drop every cell whose point is closer than `min_sep`
/// pixels, repeat. Results are in non-increasing score order and pairwise at
/// least `min_sep` apart.
inline std::vector<ScoredPoint> top_k_salient_points(const SaliencyMap& map, int k,
                                                     double min_sep) {
  if (k < 1) throw InvalidArgument("k must be at least 1");
  if (!(min_sep >= 0.0)) throw InvalidArgument("min_sep must be non-negative");

  const auto scores = map.scores();
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (scores[i] > 0.0) order.push_back(i);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  std::vector<ScoredPoint> picked;
  const double sep_sq = min_sep * min_sep;
  for (std::size_t idx : order) {
    if (static_cast<int>(picked.size()) == k) break;
    const Point p = map.cell_point(map.cell_of_index(idx));
    const bool suppressed = std::any_of(picked.begin(), picked.end(), [&](const ScoredPoint& q) {
      const double dx = p.x - q.point.x;
      const double dy = p.y - q.point.y;
      return dx * dx + dy * dy < sep_sq;
    });
    // The chosen cell itself is always removed, even with min_sep = 0.
    if (!suppressed) picked.push_back({p, scores[idx]});
  }
  return picked;
}

/// Mean over cells of |s(i, j) - s(gw - 1 - i, j)|.
inline double mirror_difference(const SaliencyMap& map) {
  double acc = 0.0;
  for (int j = 0; j < map.grid_h(); ++j)
    for (int i = 0; i < map.grid_w(); ++i)
      acc += std::abs(map.at(i, j) - map.at(map.grid_w() - 1 - i, j));
  return acc / static_cast<double>(map.size());
}

/// True when the mean mirror difference is at most `tol` times the maximum score.
inline bool is_horizontally_symmetric(const SaliencyMap& map,
                                      double tol = kDefaultSymmetryTolerance) {
  if (!(tol >= 0.0)) throw InvalidArgument("symmetry tolerance must be non-negative");
  return mirror_difference(map) <= tol * map.max_score();
}

/// Bounding box in grid cells.
struct CellBox {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  bool contains(Cell c) const noexcept {
    return c.i >= x && c.i < x + w && c.j >= y && c.j < y + h;
  }
  friend constexpr bool operator==(const CellBox&, const CellBox&) = default;
};

struct SalientRegion {
  CellBox bbox;
  Point peak;  // representative pixel of the highest cell
  Cell peak_cell;
  double peak_score = 0.0;
  double mass = 0.0;
  int cell_count = 0;
  std::vector<std::size_t> cells;  // row-major cell indices, ascending
};

/// Connected components (8-connectivity) of cells scoring at least
/// `threshold_frac` times the map maximum, largest mass first.
inline std::vector<SalientRegion> segment_salient_regions(
    const SaliencyMap& map, double threshold_frac = kDefaultRegionThreshold) {
  if (!(threshold_frac > 0.0 && threshold_frac <= 1.0))
    throw InvalidArgument("region threshold must be in (0, 1]");
  const double peak = map.max_score();
  if (peak <= 0.0) return {};
  const double cut = threshold_frac * peak;
  const int gw = map.grid_w();
  const int gh = map.grid_h();
  const auto scores = map.scores();

  std::vector<int> label(scores.size(), -1);
  std::vector<SalientRegion> regions;
  std::vector<std::size_t> stack;
  for (std::size_t seed = 0; seed < scores.size(); ++seed) {
    if (scores[seed] < cut || label[seed] >= 0) continue;
    const int id = static_cast<int>(regions.size());
    SalientRegion region;
    label[seed] = id;
    stack.push_back(seed);
    while (!stack.empty()) {
      const std::size_t cur = stack.back();
      stack.pop_back();
      region.cells.push_back(cur);
      const Cell c = map.cell_of_index(cur);
      for (int dj = -1; dj <= 1; ++dj)
        for (int di = -1; di <= 1; ++di) {
          const int ni = c.i + di;
          const int nj = c.j + dj;
          if (ni < 0 || nj < 0 || ni >= gw || nj >= gh) continue;
          const std::size_t n = static_cast<std::size_t>(nj) * gw + ni;
          if (label[n] >= 0 || scores[n] < cut) continue;
          label[n] = id;
          stack.push_back(n);
        }
    }
    std::sort(region.cells.begin(), region.cells.end());

    int min_i = gw, min_j = gh, max_i = -1, max_j = -1;
    std::size_t best = region.cells.front();
    for (std::size_t idx : region.cells) {
      const Cell c = map.cell_of_index(idx);
      min_i = std::min(min_i, c.i);
      max_i = std::max(max_i, c.i);
      min_j = std::min(min_j, c.j);
      max_j = std::max(max_j, c.j);
      region.mass += scores[idx];
      if (scores[idx] > scores[best]) best = idx;
    }
    region.bbox = {min_i, min_j, max_i - min_i + 1, max_j - min_j + 1};
    region.peak_cell = map.cell_of_index(best);
    region.peak = map.cell_point(region.peak_cell);
    region.peak_score = scores[best];
    region.cell_count = static_cast<int>(region.cells.size());
    regions.push_back(std::move(region));
  }
  // Components were discovered in row-major order of their first cell; the
  // stable sort keeps that order among equal masses.
  std::stable_sort(regions.begin(), regions.end(),
                   [](const SalientRegion& a, const SalientRegion& b) { return a.mass > b.mass; });
  return regions;
}

}  // namespace faircrop
