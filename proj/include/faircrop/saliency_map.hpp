#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "faircrop/error.hpp"

namespace faircrop {

/// Pixel coordinates in a source image, 0-based.
struct Point {
  int x = 0;
  int y = 0;

  friend constexpr bool operator==(const Point&, const Point&) = default;
};

struct ScoredPoint {
  Point point;
  double score = 0.0;

  friend constexpr bool operator==(const ScoredPoint&, const ScoredPoint&) = default;
};

struct Cell {
  int i = 0;  // column
  int j = 0;  // row

  friend constexpr bool operator==(const Cell&, const Cell&) = default;
};

/// Grid of non-negative finite scores laid uniformly over a source image.
///
/// Cell (i, j) covers the pixel band [i * sw / gw, (i + 1) * sw / gw) and its
/// representative pixel is the floor of the cell center,
/// ((i + 0.5) * sw / gw, (j + 0.5) * sh / gh).
class SaliencyMap {
 public:
  SaliencyMap(int grid_w, int grid_h, int source_w, int source_h, std::vector<double> scores)
      : grid_w_(grid_w),
        grid_h_(grid_h),
        source_w_(source_w),
        source_h_(source_h),
        scores_(std::move(scores)) {
    if (grid_w < 1 || grid_h < 1) throw InvalidArgument("saliency grid must be at least 1x1");
    if (source_w < 1 || source_h < 1)
      throw InvalidArgument("saliency source dimensions must be positive");
    if (scores_.size() != static_cast<std::size_t>(grid_w) * grid_h)
      throw InvalidArgument("saliency score count " + std::to_string(scores_.size()) +
                            " does not match grid " + std::to_string(grid_w) + "x" +
                            std::to_string(grid_h));
    for (double s : scores_)
      if (!std::isfinite(s) || s < 0.0)
        throw InvalidArgument("saliency scores must be finite and non-negative");
  }

  /// Map whose grid equals the source raster (one cell per pixel).
  static SaliencyMap from_grid(int w, int h, std::vector<double> scores) {
    return SaliencyMap(w, h, w, h, std::move(scores));
  }

  int grid_w() const noexcept { return grid_w_; }
  int grid_h() const noexcept { return grid_h_; }
  int source_w() const noexcept { return source_w_; }
  int source_h() const noexcept { return source_h_; }
  std::size_t size() const noexcept { return scores_.size(); }

  std::span<const double> scores() const noexcept { return scores_; }

  double at(int i, int j) const noexcept {
    return scores_[static_cast<std::size_t>(j) * grid_w_ + i];
  }
  double at(Cell c) const noexcept { return at(c.i, c.j); }

  Cell cell_of_index(std::size_t index) const noexcept {
    return {static_cast<int>(index % grid_w_), static_cast<int>(index / grid_w_)};
  }

  /// Representative pixel of a cell (floor of the cell center).
  Point cell_point(int i, int j) const noexcept {
    const auto px = (static_cast<std::int64_t>(2 * i + 1) * source_w_) / (2 * grid_w_);
    const auto py = (static_cast<std::int64_t>(2 * j + 1) * source_h_) / (2 * grid_h_);
    return {static_cast<int>(px), static_cast<int>(py)};
  }
  Point cell_point(Cell c) const noexcept { return cell_point(c.i, c.j); }

  /// Exact (fractional) pixel coordinates of the cell center.
  double center_x(int i) const noexcept { return (i + 0.5) * source_w_ / grid_w_; }
  double center_y(int j) const noexcept { return (j + 0.5) * source_h_ / grid_h_; }

  /// Cell containing the given source pixel.
  Cell cell_at_pixel(Point p) const noexcept {
    return {static_cast<int>(static_cast<std::int64_t>(p.x) * grid_w_ / source_w_),
            static_cast<int>(static_cast<std::int64_t>(p.y) * grid_h_ / source_h_)};
  }

  double max_score() const noexcept {
    double m = 0.0;
    for (double s : scores_) m = s > m ? s : m;
    return m;
  }

  double total() const noexcept {
    double t = 0.0;
    for (double s : scores_) t += s;
    return t;
  }

  /// Same grid with every score multiplied by `factor` (> 0).
  SaliencyMap scaled(double factor) const {
    std::vector<double> out(scores_);
    for (double& s : out) s *= factor;
    return SaliencyMap(grid_w_, grid_h_, source_w_, source_h_, std::move(out));
  }

  /// Left-right mirror image of the grid.
  SaliencyMap mirrored() const {
    std::vector<double> out(scores_.size());
    for (int j = 0; j < grid_h_; ++j)
      for (int i = 0; i < grid_w_; ++i)
        out[static_cast<std::size_t>(j) * grid_w_ + (grid_w_ - 1 - i)] = at(i, j);
    return SaliencyMap(grid_w_, grid_h_, source_w_, source_h_, std::move(out));
  }

  friend bool operator==(const SaliencyMap&, const SaliencyMap&) = default;

 private:
  int grid_w_;
  int grid_h_;
  int source_w_;
  int source_h_;
  std::vector<double> scores_;
};

}  // namespace faircrop
