#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "faircrop/error.hpp"
#include "faircrop/image.hpp"
#include "faircrop/rng.hpp"
#include "faircrop/saliency.hpp"
#include "faircrop/saliency_map.hpp"
#include "faircrop/salient_points.hpp"

namespace faircrop {

/// Width / height as a positive rational.
struct AspectRatio {
  int num = 1;
  int den = 1;

  AspectRatio() = default;
  AspectRatio(int n, int d) : num(n), den(d) {
    if (n < 1 || d < 1) throw InvalidArgument("aspect ratio terms must be positive integers");
  }

  double value() const noexcept { return static_cast<double>(num) / den; }
  std::string to_string() const { return std::to_string(num) + ":" + std::to_string(den); }

  /// Parses "W:H" with positive integer terms.
  static AspectRatio parse(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == text.size())
      throw InvalidArgument("aspect ratio must be W:H, got '" + text + "'");
    auto term = [&](const std::string& s) {
      if (s.find_first_not_of("0123456789") != std::string::npos || s.size() > 9)
        throw InvalidArgument("aspect ratio must be W:H with positive integers, got '" + text + "'");
      return std::stoi(s);
    };
    return {term(text.substr(0, colon)), term(text.substr(colon + 1))};
  }

  friend constexpr bool operator==(const AspectRatio&, const AspectRatio&) = default;
};

struct CropRect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  bool contains(Point p) const noexcept {
    return p.x >= x && p.x < x + w && p.y >= y && p.y < y + h;
  }
  friend constexpr bool operator==(const CropRect&, const CropRect&) = default;
};

/// Image placed unscaled on a larger canvas of the target aspect ratio.
struct PaddedCanvas {
  int canvas_w = 0;
  int canvas_h = 0;
  int offset_x = 0;
  int offset_y = 0;
  Rgb pad;

  friend constexpr bool operator==(const PaddedCanvas&, const PaddedCanvas&) = default;
};

using CropSpec = std::variant<CropRect, PaddedCanvas>;

// ---- strategies -----------------------------------------------------------

enum class SamplingWeights { Linear, Softmax };

struct Argmax {};
/// Draw one cell with probability proportional to its weight.
struct Sampling {
  std::uint64_t seed = 0;
  SamplingWeights weights = SamplingWeights::Linear;
  double temperature = 1.0;  // Softmax only
};
/// Score-weighted centroid of all cell points.
struct WeightedAverage {};
/// Unweighted centroid of the top-k non-max-suppressed points.
struct TopKAverage {
  int k = 3;
  std::optional<double> min_sep;  // pixels; defaults to 10% of the diagonal
};
struct UserFocal {
  Point point;
};
struct PadNoCrop {
  Rgb pad = kBlack;
};

using CropStrategy =
    std::variant<Argmax, Sampling, WeightedAverage, TopKAverage, UserFocal, PadNoCrop>;

inline std::string strategy_name(const CropStrategy& s) {
  static constexpr const char* kNames[] = {"argmax", "sample", "average", "topk", "focal", "pad"};
  return kNames[s.index()];
}

/// Parses argmax | sample[:<seed>] | average | topk:<k> | focal:<x>,<y> | pad[:<r>,<g>,<b>].
/// `default_seed` is used when a sampling seed is not given.
inline CropStrategy parse_strategy(const std::string& text, std::uint64_t default_seed = 0) {
  const auto colon = text.find(':');
  const std::string head = text.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
  auto ints = [&](std::size_t expected) {
    std::vector<long long> out;
    std::size_t pos = 0;
    while (pos <= arg.size()) {
      const auto comma = arg.find(',', pos);
      const std::string part = arg.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
      if (part.empty() || part.find_first_not_of("0123456789") != std::string::npos || part.size() > 18)
        throw InvalidArgument("bad strategy argument in '" + text + "'");
      out.push_back(std::stoll(part));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    if (out.size() != expected) throw InvalidArgument("bad strategy argument in '" + text + "'");
    return out;
  };
  if (head == "argmax" && arg.empty()) return Argmax{};
  if (head == "average" && arg.empty()) return WeightedAverage{};
  if (head == "sample")
    return Sampling{arg.empty() ? default_seed : static_cast<std::uint64_t>(ints(1)[0])};
  if (head == "topk" && !arg.empty()) {
    const auto k = ints(1)[0];
    if (k < 1 || k > 1000) throw InvalidArgument("topk k must be in [1, 1000]");
    return TopKAverage{static_cast<int>(k), std::nullopt};
  }
  if (head == "focal") {
    const auto v = ints(2);
    if (v[0] > 1'000'000'000 || v[1] > 1'000'000'000) throw InvalidArgument("focal point out of range");
    return UserFocal{{static_cast<int>(v[0]), static_cast<int>(v[1])}};
  }
  if (head == "pad") {
    if (arg.empty()) return PadNoCrop{};
    const auto v = ints(3);
    for (auto c : v)
      if (c > 255) throw InvalidArgument("pad color components must be 0-255");
    return PadNoCrop{{static_cast<std::uint8_t>(v[0]), static_cast<std::uint8_t>(v[1]),
                      static_cast<std::uint8_t>(v[2])}};
  }
  throw InvalidArgument("unknown crop strategy '" + text + "'");
}

// ---- focal selection --------------------------------------------------------

/// Cumulative weights over the map's cells for repeated seeded draws.
class CellSampler {
 public:
  explicit CellSampler(const SaliencyMap& map, SamplingWeights weights = SamplingWeights::Linear,
                       double temperature = 1.0) {
    const auto scores = map.scores();
    cumulative_.reserve(scores.size());
    const double peak = map.max_score();
    if (weights == SamplingWeights::Softmax && !(temperature > 0.0))
      throw InvalidArgument("softmax temperature must be positive");
    double acc = 0.0;
    for (double s : scores) {
      const double w = weights == SamplingWeights::Linear ? s : std::exp((s - peak) / temperature);
      acc += w;
      cumulative_.push_back(acc);
    }
    if (!(acc > 0.0)) throw InvalidArgument("cannot sample from an all-zero saliency map");
  }

  /// Row-major cell index drawn from the stream seeded by `seed`.
  std::size_t draw(std::uint64_t seed) const {
    Rng rng(seed);
    const double u = rng.uniform_unit() * cumulative_.back();
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    if (it == cumulative_.end()) {
      // u rounded up to the total: take the last cell with positive weight.
      it = std::prev(cumulative_.end());
      while (it != cumulative_.begin() && *std::prev(it) == *it) --it;
    }
    return static_cast<std::size_t>(it - cumulative_.begin());
  }

 private:
  std::vector<double> cumulative_;
};

namespace detail {

inline int round_half_up(double v) { return static_cast<int>(std::floor(v + 0.5)); }

inline Point clamp_point(Point p, int w, int h) {
  return {std::clamp(p.x, 0, w - 1), std::clamp(p.y, 0, h - 1)};
}

}  // namespace detail

/// Focal point chosen by `strategy`. An all-zero map makes the averaging
/// strategies fall back to the argmax cell; sampling from it is an error.
inline Point select_focal(const SaliencyMap& map, const CropStrategy& strategy) {
  return std::visit(
      [&](const auto& s) -> Point {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Argmax>) {
          return max_salient_point(map).point;
        } else if constexpr (std::is_same_v<T, Sampling>) {
          const CellSampler sampler(map, s.weights, s.temperature);
          return map.cell_point(map.cell_of_index(sampler.draw(s.seed)));
        } else if constexpr (std::is_same_v<T, WeightedAverage>) {
          double total = 0.0, sx = 0.0, sy = 0.0;
          for (int j = 0; j < map.grid_h(); ++j)
            for (int i = 0; i < map.grid_w(); ++i) {
              const double s = map.at(i, j);
              total += s;
              sx += s * map.center_x(i);
              sy += s * map.center_y(j);
            }
          if (!(total > 0.0)) return max_salient_point(map).point;
          // Continuous coordinates: pixel k spans [k, k + 1).
          return detail::clamp_point({static_cast<int>(std::floor(sx / total)),
                                      static_cast<int>(std::floor(sy / total))},
                                     map.source_w(), map.source_h());
        } else if constexpr (std::is_same_v<T, TopKAverage>) {
          const auto points =
              top_k_salient_points(map, s.k, s.min_sep.value_or(default_min_separation(map)));
          if (points.empty()) return max_salient_point(map).point;
          double sx = 0.0, sy = 0.0;
          for (const auto& p : points) {
            sx += p.point.x;
            sy += p.point.y;
          }
          const double n = static_cast<double>(points.size());
          return detail::clamp_point({detail::round_half_up(sx / n), detail::round_half_up(sy / n)},
                                     map.source_w(), map.source_h());
        } else if constexpr (std::is_same_v<T, UserFocal>) {
          if (s.point.x < 0 || s.point.y < 0 || s.point.x >= map.source_w() ||
              s.point.y >= map.source_h())
            throw InvalidArgument("user focal point lies outside the image");
          return s.point;
        } else {
          throw InvalidArgument("pad-no-crop strategy has no focal point");
        }
      },
      strategy);
}

// ---- geometry ---------------------------------------------------------------

struct CropSize {
  int w = 0;
  int h = 0;
};

/// Size of the single-dimension crop of a source_w x source_h image at `ar`.
/// The kept dimension is full; the other is rounded half-up and, when the
/// target differs from the source ratio, at least one pixel shorter than the
/// source.
inline CropSize crop_size(int source_w, int source_h, AspectRatio ar) {
  if (source_w < 1 || source_h < 1) throw InvalidArgument("source dimensions must be positive");
  const std::int64_t narrower = static_cast<std::int64_t>(ar.num) * source_h;
  const std::int64_t source = static_cast<std::int64_t>(source_w) * ar.den;
  if (narrower == source) return {source_w, source_h};
  if (narrower < source) {
    // w = round(H * num / den)
    auto w = (2 * static_cast<std::int64_t>(source_h) * ar.num + ar.den) / (2 * static_cast<std::int64_t>(ar.den));
    w = std::min<std::int64_t>(w, source_w - 1);
    if (w < 1)
      throw InvalidArgument("aspect ratio " + ar.to_string() + " rounds to a zero-width crop of a " +
                            std::to_string(source_w) + "x" + std::to_string(source_h) + " image");
    return {static_cast<int>(w), source_h};
  }
  auto h = (2 * static_cast<std::int64_t>(source_w) * ar.den + ar.num) / (2 * static_cast<std::int64_t>(ar.num));
  h = std::min<std::int64_t>(h, source_h - 1);
  if (h < 1)
    throw InvalidArgument("aspect ratio " + ar.to_string() + " rounds to a zero-height crop of a " +
                          std::to_string(source_w) + "x" + std::to_string(source_h) + " image");
  return {source_w, static_cast<int>(h)};
}

/// Crop of aspect `ar` whose cropped dimension is centered on `focal` and
/// then shifted back inside the image. The focal point is always inside.
inline CropRect crop_around_focal(int source_w, int source_h, Point focal, AspectRatio ar) {
  if (focal.x < 0 || focal.y < 0 || focal.x >= source_w || focal.y >= source_h)
    throw InvalidArgument("focal point outside the source image");
  const CropSize size = crop_size(source_w, source_h, ar);
  return {std::clamp(focal.x - size.w / 2, 0, source_w - size.w),
          std::clamp(focal.y - size.h / 2, 0, source_h - size.h), size.w, size.h};
}

/// Crop of aspect `ar` centered on the image.
inline CropRect center_crop(int source_w, int source_h, AspectRatio ar) {
  const CropSize size = crop_size(source_w, source_h, ar);
  return {(source_w - size.w) / 2, (source_h - size.h) / 2, size.w, size.h};
}

/// Smallest canvas of aspect `ar` (rounded half-up) containing the image
/// unscaled, with the image centered (odd padding goes right / bottom).
inline PaddedCanvas pad_to_aspect(int source_w, int source_h, AspectRatio ar, Rgb pad = kBlack) {
  if (source_w < 1 || source_h < 1) throw InvalidArgument("source dimensions must be positive");
  const std::int64_t lhs = static_cast<std::int64_t>(ar.num) * source_h;
  const std::int64_t rhs = static_cast<std::int64_t>(source_w) * ar.den;
  std::int64_t cw = source_w;
  std::int64_t ch = source_h;
  if (lhs > rhs)  // target wider: grow width
    cw = std::max<std::int64_t>(source_w, (2 * static_cast<std::int64_t>(source_h) * ar.num + ar.den) / (2 * static_cast<std::int64_t>(ar.den)));
  else if (lhs < rhs)  // target taller: grow height
    ch = std::max<std::int64_t>(source_h, (2 * static_cast<std::int64_t>(source_w) * ar.den + ar.num) / (2 * static_cast<std::int64_t>(ar.num)));
  if (cw > 1'000'000'000 || ch > 1'000'000'000)
    throw InvalidArgument("padded canvas for aspect " + ar.to_string() + " is too large");
  return {static_cast<int>(cw), static_cast<int>(ch), static_cast<int>((cw - source_w) / 2),
          static_cast<int>((ch - source_h) / 2), pad};
}

/// Pixels of the crop (or padded canvas) described by `spec`.
inline ImageBuffer render_crop(const ImageBuffer& image, const CropSpec& spec) {
  if (const auto* rect = std::get_if<CropRect>(&spec))
    return extract(image, rect->x, rect->y, rect->w, rect->h);
  const auto& padded = std::get<PaddedCanvas>(spec);
  ImageBuffer canvas(padded.canvas_w, padded.canvas_h, padded.pad);
  blit(canvas, image, padded.offset_x, padded.offset_y);
  return canvas;
}

// ---- pipeline ---------------------------------------------------------------

struct PipelineParams {
  int grid_step = kDefaultGridStep;
  double symmetry_tol = kDefaultSymmetryTolerance;
};

struct PipelineResult {
  std::optional<SaliencyMap> map;  // absent for pad-no-crop
  bool symmetric = false;
  std::optional<Point> focal;      // absent for symmetric maps and pad-no-crop
  std::vector<CropSpec> crops;     // one per requested aspect ratio, same order
};

/// Crops for every aspect ratio from an already computed map. A horizontally
/// symmetric map gives center crops whatever the strategy; otherwise one
/// focal point is chosen and reused for every ratio.
inline PipelineResult crops_from_map(SaliencyMap map, const CropStrategy& strategy,
                                     const std::vector<AspectRatio>& ars,
                                     double symmetry_tol = kDefaultSymmetryTolerance) {
  if (ars.empty()) throw InvalidArgument("at least one aspect ratio is required");
  PipelineResult result;
  const int w = map.source_w();
  const int h = map.source_h();
  if (std::holds_alternative<PadNoCrop>(strategy)) {
    for (const auto& ar : ars) result.crops.emplace_back(pad_to_aspect(w, h, ar, std::get<PadNoCrop>(strategy).pad));
    result.map = std::move(map);
    return result;
  }
  result.symmetric = is_horizontally_symmetric(map, symmetry_tol);
  if (result.symmetric) {
    for (const auto& ar : ars) result.crops.emplace_back(center_crop(w, h, ar));
  } else {
    const Point focal = select_focal(map, strategy);
    result.focal = focal;
    for (const auto& ar : ars) result.crops.emplace_back(crop_around_focal(w, h, focal, ar));
  }
  result.map = std::move(map);
  return result;
}

/// Saliency then crops for each aspect ratio; pad-no-crop skips saliency.
inline PipelineResult crop_pipeline(const ImageBuffer& image, const SaliencyBackend& backend,
                                    const CropStrategy& strategy,
                                    const std::vector<AspectRatio>& ars,
                                    const PipelineParams& params = {}) {
  if (ars.empty()) throw InvalidArgument("at least one aspect ratio is required");
  if (const auto* pad = std::get_if<PadNoCrop>(&strategy)) {
    PipelineResult result;
    for (const auto& ar : ars)
      result.crops.emplace_back(pad_to_aspect(image.width(), image.height(), ar, pad->pad));
    return result;
  }
  return crops_from_map(compute_saliency(image, backend, params.grid_step), strategy, ars,
                        params.symmetry_tol);
}

// ---- exposure ---------------------------------------------------------------

/// Per-cell selection frequencies (row-major) under argmax and under sampling.
struct ExposureResult {
  std::vector<double> argmax;
  std::vector<double> sampling;
  std::size_t trials = 0;
};

/// Repeats focal selection `n_trials` times under both strategies. Sampling
/// trial t uses the stream derive_seed(seed, t).
inline ExposureResult exposure_experiment(const SaliencyMap& map, std::size_t n_trials,
                                          std::uint64_t seed,
                                          SamplingWeights weights = SamplingWeights::Linear) {
  if (n_trials < 1) throw InvalidArgument("exposure experiment needs at least one trial");
  const CellSampler sampler(map, weights);
  std::vector<std::size_t> argmax_counts(map.size(), 0);
  std::vector<std::size_t> sample_counts(map.size(), 0);
  for (std::size_t t = 0; t < n_trials; ++t) {
    ++argmax_counts[max_cell_index(map)];
    ++sample_counts[sampler.draw(derive_seed(seed, t))];
  }
  ExposureResult result;
  result.trials = n_trials;
  for (std::size_t k = 0; k < map.size(); ++k) {
    result.argmax.push_back(static_cast<double>(argmax_counts[k]) / n_trials);
    result.sampling.push_back(static_cast<double>(sample_counts[k]) / n_trials);
  }
  return result;
}

}  // namespace faircrop
