#pragma once

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "faircrop/error.hpp"
#include "faircrop/image.hpp"
#include "faircrop/pfm.hpp"
#include "faircrop/saliency_map.hpp"

namespace faircrop {

/// Log-spectrum residual saliency over a downscaled luma plane.
struct SpectralResidual {
  int internal_size = 64;       // longest side of the working plane, pixels
  double smoothing_sigma = 2.5;  // Gaussian blur of the output, working-plane pixels
  double log_floor = 0.01;       // added to |F| before the log, times the mean |F|
};

/// Per-cell variance of luma in a square window centered on the cell point.
struct LuminanceContrast {
  std::optional<int> window_radius;  // pixels; defaults to the grid step
};

/// Precomputed map stored as a PFM file covering the whole image.
struct ExternalMap {
  std::filesystem::path path;
};

using SaliencyBackend = std::variant<SpectralResidual, LuminanceContrast, ExternalMap>;

inline constexpr int kDefaultGridStep = 8;

inline std::string backend_name(const SaliencyBackend& backend) {
  return std::visit(
      [](const auto& b) -> std::string {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, SpectralResidual>) return "spectral";
        else if constexpr (std::is_same_v<T, LuminanceContrast>) return "contrast";
        else return "external:" + b.path.string();
      },
      backend);
}

/// Parses "spectral", "contrast" or "external:<path>".
inline SaliencyBackend parse_backend(const std::string& text) {
  if (text == "spectral") return SpectralResidual{};
  if (text == "contrast") return LuminanceContrast{};
  if (text.rfind("external:", 0) == 0 && text.size() > 9) return ExternalMap{text.substr(9)};
  throw InvalidArgument("unknown saliency backend '" + text +
                        "' (expected spectral, contrast or external:<path>)");
}

inline int grid_cells(int pixels, int step) { return (pixels + step - 1) / step; }

namespace detail {

// FFTW's planner is not re-entrant; execution on distinct arrays is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwBuffer {
  explicit FftwBuffer(std::size_t n)
      : ptr(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n))) {
    if (ptr == nullptr) throw std::bad_alloc();
  }
  ~FftwBuffer() { fftw_free(ptr); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  fftw_complex* ptr;
};

// In-place 2-D DFT of a rows x cols complex array (unnormalized).
inline void dft2d(std::vector<std::complex<double>>& data, int rows, int cols, int sign) {
  FftwBuffer buf(data.size());
  fftw_plan plan;
  {
    std::lock_guard lock(fftw_planner_mutex());
    plan = fftw_plan_dft_2d(rows, cols, buf.ptr, buf.ptr, sign, FFTW_ESTIMATE);
  }
  for (std::size_t k = 0; k < data.size(); ++k) {
    buf.ptr[k][0] = data[k].real();
    buf.ptr[k][1] = data[k].imag();
  }
  fftw_execute(plan);
  for (std::size_t k = 0; k < data.size(); ++k) data[k] = {buf.ptr[k][0], buf.ptr[k][1]};
  std::lock_guard lock(fftw_planner_mutex());
  fftw_destroy_plan(plan);
}

// Separable Gaussian blur with clamped borders; radius ceil(3 sigma).
inline std::vector<double> gaussian_blur(std::span<const double> plane, int w, int h,
                                         double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  double norm = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    kernel[k + radius] = std::exp(-(k * k) / (2.0 * sigma * sigma));
    norm += kernel[k + radius];
  }
  for (double& v : kernel) v /= norm;

  std::vector<double> tmp(plane.size());
  std::vector<double> out(plane.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k)
        acc += kernel[k + radius] * plane[static_cast<std::size_t>(y) * w + std::clamp(x + k, 0, w - 1)];
      tmp[static_cast<std::size_t>(y) * w + x] = acc;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k)
        acc += kernel[k + radius] * tmp[static_cast<std::size_t>(std::clamp(y + k, 0, h - 1)) * w + x];
      out[static_cast<std::size_t>(y) * w + x] = acc;
    }
  return out;
}

/// Spectral residual saliency of a luma plane at its own resolution, before
/// smoothing. Exposed for testing against a direct-transform reference.
inline std::vector<double> spectral_residual_plane(std::span<const double> plane, int w, int h,
                                                   double log_floor = 0.01) {
  const auto [lo, hi] = std::minmax_element(plane.begin(), plane.end());
  if (*hi - *lo <= 0.0) return std::vector<double>(plane.size(), 0.0);

  std::vector<std::complex<double>> spectrum(plane.begin(), plane.end());
  dft2d(spectrum, h, w, FFTW_FORWARD);

  // Exact spectral zeros (a block whose side divides the plane) would send
  // the log towards -inf and the residual would be all artifact. A floor
  // relative to the mean amplitude keeps it bounded.
  double mean_amp = 0.0;
  for (const auto& c : spectrum) mean_amp += std::abs(c);
  const double floor = std::max(log_floor * mean_amp / static_cast<double>(spectrum.size()), 1e-300);
  std::vector<double> log_amp(spectrum.size());
  for (std::size_t k = 0; k < spectrum.size(); ++k) log_amp[k] = std::log(std::abs(spectrum[k]) + floor);

  // 3x3 box average, wrapping because the spectrum is periodic.
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      double acc = 0.0;
      for (int dv = -1; dv <= 1; ++dv)
        for (int du = -1; du <= 1; ++du)
          acc += log_amp[static_cast<std::size_t>((v + dv + h) % h) * w + (u + du + w) % w];
      const std::size_t k = static_cast<std::size_t>(v) * w + u;
      // exp(residual) * F / (|F| + floor): the unit phase F / |F| is noise at
      // near-zero bins, this form sends them to zero instead.
      spectrum[k] *= std::exp(-acc / 9.0);
    }

  dft2d(spectrum, h, w, FFTW_BACKWARD);
  const double n = static_cast<double>(spectrum.size());
  std::vector<double> out(spectrum.size());
  for (std::size_t k = 0; k < spectrum.size(); ++k) out[k] = std::norm(spectrum[k] / n);
  return out;
}

// Sample a plane spanning the whole source image at every grid cell center.
inline std::vector<double> sample_at_cells(std::span<const double> plane, int pw, int ph, int gw,
                                           int gh) {
  std::vector<double> out(static_cast<std::size_t>(gw) * gh);
  for (int j = 0; j < gh; ++j)
    for (int i = 0; i < gw; ++i) {
      const double sx = (i + 0.5) * pw / gw;
      const double sy = (j + 0.5) * ph / gh;
      out[static_cast<std::size_t>(j) * gw + i] = std::max(0.0, bilinear_sample(plane, pw, ph, sx, sy));
    }
  return out;
}

inline std::vector<double> compute_spectral(const ImageBuffer& image, const SpectralResidual& p,
                                            int gw, int gh) {
  if (p.internal_size < 1 || !(p.smoothing_sigma > 0.0) || !(p.log_floor > 0.0))
    throw InvalidArgument("spectral residual parameters must be positive");
  const int w = image.width();
  const int h = image.height();
  const double scale = static_cast<double>(p.internal_size) / std::max(w, h);
  const int iw = std::max(1, static_cast<int>(std::lround(w * scale)));
  const int ih = std::max(1, static_cast<int>(std::lround(h * scale)));
  const auto luma = luma_plane(image);
  const auto small = resize_plane(luma, w, h, iw, ih);
  const auto raw = spectral_residual_plane(small, iw, ih, p.log_floor);
  const auto smooth = gaussian_blur(raw, iw, ih, p.smoothing_sigma);
  return sample_at_cells(smooth, iw, ih, gw, gh);
}

inline std::vector<double> compute_contrast(const ImageBuffer& image, const LuminanceContrast& p,
                                            int grid_step, int gw, int gh) {
  const int radius = p.window_radius.value_or(grid_step);
  if (radius < 1) throw InvalidArgument("contrast window radius must be positive");
  const int w = image.width();
  const int h = image.height();
  std::vector<std::int64_t> lum(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) lum[static_cast<std::size_t>(y) * w + x] = luma_milli(image.at(x, y));

  const SaliencyMap layout(gw, gh, w, h, std::vector<double>(static_cast<std::size_t>(gw) * gh));
  std::vector<double> out(layout.size());
  for (int j = 0; j < gh; ++j)
    for (int i = 0; i < gw; ++i) {
      const Point c = layout.cell_point(i, j);
      const int x0 = std::max(0, c.x - radius), x1 = std::min(w - 1, c.x + radius);
      const int y0 = std::max(0, c.y - radius), y1 = std::min(h - 1, c.y + radius);
      __int128 sum = 0, sum_sq = 0;
      for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
          const std::int64_t v = lum[static_cast<std::size_t>(y) * w + x];
          sum += v;
          sum_sq += static_cast<__int128>(v) * v;
        }
      const __int128 n = static_cast<__int128>(x1 - x0 + 1) * (y1 - y0 + 1);
      // Exact integer numerator: zero for flat windows, never negative.
      const __int128 numer = n * sum_sq - sum * sum;
      out[static_cast<std::size_t>(j) * gw + i] =
          static_cast<double>(numer) / (static_cast<double>(n) * static_cast<double>(n) * 1e6);
    }
  return out;
}

inline std::vector<double> compute_external(const ExternalMap& p, int gw, int gh) {
  const FloatGrid grid = read_pfm(p.path);
  std::vector<double> plane;
  plane.reserve(grid.values.size());
  for (float v : grid.values) {
    if (!std::isfinite(v) || v < 0.0f)
      throw FormatError(p.path.string() + ": saliency map contains a negative or non-finite value");
    plane.push_back(v);
  }
  return sample_at_cells(plane, grid.width, grid.height, gw, gh);
}

}  // namespace detail

/// Saliency grid of ceil(w / step) x ceil(h / step) cells over the image.
/// Pure: identical inputs give bit-identical maps.
inline SaliencyMap compute_saliency(const ImageBuffer& image, const SaliencyBackend& backend,
                                    int grid_step = kDefaultGridStep) {
  if (grid_step < 1) throw InvalidArgument("grid step must be at least 1");
  const int gw = grid_cells(image.width(), grid_step);
  const int gh = grid_cells(image.height(), grid_step);
  std::vector<double> scores = std::visit(
      [&](const auto& b) {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, SpectralResidual>)
          return detail::compute_spectral(image, b, gw, gh);
        else if constexpr (std::is_same_v<T, LuminanceContrast>)
          return detail::compute_contrast(image, b, grid_step, gw, gh);
        else
          return detail::compute_external(b, gw, gh);
      },
      backend);
  return SaliencyMap(gw, gh, image.width(), image.height(), std::move(scores));
}

}  // namespace faircrop
