#pragma once

// Straight-line reference implementations used to check the library. They
// favour obviousness over speed and share no code with include/faircrop
// beyond the plain data types.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numeric>
#include <vector>

#include "faircrop/image.hpp"
#include "faircrop/saliency_map.hpp"

namespace oracle {

using faircrop::ImageBuffer;
using faircrop::Point;
using faircrop::SaliencyMap;

inline double gray(const ImageBuffer& img, int x, int y) {
  const auto c = img.at(x, y);
  return 0.299 * c.r + 0.587 * c.g + 0.114 * c.b;
}

// Cell (i, j) maps to pixel floor((i + 0.5) * W / gw).
inline int cell_pixel(int i, int size, int cells) {
  return static_cast<int>(std::floor((i + 0.5) * size / cells));
}

/// Two-pass population variance of luma in the clipped square window of the
/// given radius around each cell's pixel.
inline std::vector<double> windowed_variance(const ImageBuffer& img, int step, int radius) {
  const int gw = (img.width() + step - 1) / step;
  const int gh = (img.height() + step - 1) / step;
  std::vector<double> out;
  for (int j = 0; j < gh; ++j)
    for (int i = 0; i < gw; ++i) {
      const int cx = cell_pixel(i, img.width(), gw);
      const int cy = cell_pixel(j, img.height(), gh);
      std::vector<double> vals;
      for (int y = cy - radius; y <= cy + radius; ++y)
        for (int x = cx - radius; x <= cx + radius; ++x)
          if (x >= 0 && y >= 0 && x < img.width() && y < img.height()) vals.push_back(gray(img, x, y));
      const double mean = std::accumulate(vals.begin(), vals.end(), 0.0) / vals.size();
      double ss = 0.0;
      for (double v : vals) ss += (v - mean) * (v - mean);
      out.push_back(ss / vals.size());
    }
  return out;
}

/// Textbook O(N^2) 2-D DFT; sign -1 forward, +1 inverse (unnormalised).
inline std::vector<std::complex<double>> naive_dft(const std::vector<std::complex<double>>& in, int w,
                                                   int h, int sign) {
  const double pi = std::acos(-1.0);
  std::vector<std::complex<double>> out(in.size());
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      std::complex<double> acc = 0.0;
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          const double angle = sign * 2.0 * pi * (static_cast<double>(u) * x / w + static_cast<double>(v) * y / h);
          acc += in[y * w + x] * std::complex<double>(std::cos(angle), std::sin(angle));
        }
      out[v * w + u] = acc;
    }
  return out;
}

/// Spectral residual on a plane at its own resolution: |IDFT(exp(R + i*phase))/N|^2
/// where R = log(|F| + floor * mean|F|) minus its 3x3 circular mean, with the
/// unit phase regularised to F / (|F| + floor * mean|F|).
inline std::vector<double> spectral_residual(const std::vector<double>& plane, int w, int h,
                                             double floor = 0.01) {
  std::vector<std::complex<double>> f(plane.begin(), plane.end());
  f = naive_dft(f, w, h, -1);
  double mean = 0.0;
  for (const auto& c : f) mean += std::abs(c) / f.size();
  std::vector<double> logamp(f.size()), phase(f.size());
  for (std::size_t k = 0; k < f.size(); ++k) {
    logamp[k] = std::log(std::abs(f[k]) + floor * mean);
    phase[k] = std::arg(f[k]);
  }
  std::vector<std::complex<double>> g(f.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double avg = 0.0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) avg += logamp[((y + dy + h) % h) * w + (x + dx + w) % w];
      const double r = logamp[y * w + x] - avg / 9.0;
      const double a = std::abs(f[y * w + x]);
      g[y * w + x] = std::polar(std::exp(r) * a / (a + floor * mean), phase[y * w + x]);
    }
  g = naive_dft(g, w, h, +1);
  std::vector<double> out(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) out[k] = std::norm(g[k] / static_cast<double>(g.size()));
  return out;
}

/// Direct 2-D Gaussian (separable weights applied as a full kernel), edge-clamped.
inline std::vector<double> gaussian(const std::vector<double>& plane, int w, int h, double sigma) {
  const int r = static_cast<int>(std::ceil(3 * sigma));
  std::vector<double> out(plane.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0, norm = 0.0;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          const double wgt = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
          acc += wgt * plane[std::clamp(y + dy, 0, h - 1) * w + std::clamp(x + dx, 0, w - 1)];
          norm += wgt;
        }
      out[y * w + x] = acc / norm;
    }
  return out;
}

/// Row-major index of the first maximal score.
inline std::size_t argmax(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t k = 0; k < v.size(); ++k)
    if (v[k] > v[best]) best = k;
  return best;
}

/// Greedy NMS by repeated full scans over a "still available" mask.
inline std::vector<std::size_t> greedy_nms(const SaliencyMap& map, int k, double min_sep) {
  std::vector<bool> available(map.size());
  for (std::size_t c = 0; c < map.size(); ++c) available[c] = map.scores()[c] > 0;
  std::vector<std::size_t> picked;
  while (static_cast<int>(picked.size()) < k) {
    std::size_t best = map.size();
    for (std::size_t c = 0; c < map.size(); ++c)
      if (available[c] && (best == map.size() || map.scores()[c] > map.scores()[best])) best = c;
    if (best == map.size()) break;
    picked.push_back(best);
    const Point p = map.cell_point(map.cell_of_index(best));
    for (std::size_t c = 0; c < map.size(); ++c) {
      const Point q = map.cell_point(map.cell_of_index(c));
      if (std::hypot(p.x - q.x, p.y - q.y) < min_sep) available[c] = false;
    }
    available[best] = false;
  }
  return picked;
}

/// Number of 8-connected components of `on` cells, by union-find.
inline int component_count(const std::vector<bool>& on, int w, int h) {
  std::vector<int> parent(on.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!on[y * w + x]) continue;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int nx = x + dx, ny = y + dy;
          if (nx >= 0 && ny >= 0 && nx < w && ny < h && on[ny * w + nx])
            parent[find(y * w + x)] = find(ny * w + nx);
        }
    }
  int n = 0;
  for (int c = 0; c < w * h; ++c) n += on[c] && find(c) == c;
  return n;
}

/// P(a > b) + P(a == b) / 2 over all pairs by double loop.
inline double pairwise_favored(const std::vector<double>& a, const std::vector<double>& b) {
  std::int64_t twice = 0;
  for (double x : a)
    for (double y : b) twice += x > y ? 2 : x == y ? 1 : 0;
  return static_cast<double>(twice) / (2.0 * a.size() * b.size());
}

/// Two-sample KS statistic evaluated at every sample point by counting.
inline double ks_statistic(const std::vector<double>& a, const std::vector<double>& b) {
  auto cdf = [](const std::vector<double>& s, double x) {
    return static_cast<double>(std::count_if(s.begin(), s.end(), [&](double v) { return v <= x; })) / s.size();
  };
  double gap = 0.0;
  for (const auto* s : {&a, &b})
    for (double x : *s) gap = std::max(gap, std::abs(cdf(a, x) - cdf(b, x)));
  return gap;
}

}  // namespace oracle
