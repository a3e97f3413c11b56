#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "faircrop/error.hpp"

namespace faircrop {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend constexpr bool operator==(const Rgb&, const Rgb&) = default;
};

inline constexpr Rgb kBlack{0, 0, 0};

/// 8-bit RGB raster, row-major, three bytes per pixel.
class ImageBuffer {
 public:
  ImageBuffer(int width, int height, Rgb fill = kBlack) : width_(width), height_(height) {
    check_dims(width, height);
    data_.resize(static_cast<std::size_t>(width) * height * 3);
    for (std::size_t i = 0; i < data_.size(); i += 3) {
      data_[i] = fill.r;
      data_[i + 1] = fill.g;
      data_[i + 2] = fill.b;
    }
  }

  ImageBuffer(int width, int height, std::vector<std::uint8_t> data)
      : width_(width), height_(height), data_(std::move(data)) {
    check_dims(width, height);
    if (data_.size() != static_cast<std::size_t>(width) * height * 3)
      throw InvalidArgument("image data length " + std::to_string(data_.size()) +
                            " does not match " + std::to_string(width) + "x" +
                            std::to_string(height) + "x3");
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }

  std::span<const std::uint8_t> data() const noexcept { return data_; }
  std::span<std::uint8_t> data() noexcept { return data_; }

  Rgb at(int x, int y) const noexcept {
    const std::size_t i = offset(x, y);
    return {data_[i], data_[i + 1], data_[i + 2]};
  }

  void set(int x, int y, Rgb c) noexcept {
    const std::size_t i = offset(x, y);
    data_[i] = c.r;
    data_[i + 1] = c.g;
    data_[i + 2] = c.b;
  }

  bool contains(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }

  friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;

 private:
  static void check_dims(int width, int height) {
    if (width < 1 || height < 1)
      throw InvalidArgument("image dimensions must be positive, got " + std::to_string(width) +
                            "x" + std::to_string(height));
  }

  std::size_t offset(int x, int y) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * 3;
  }

  int width_;
  int height_;
  std::vector<std::uint8_t> data_;
};

// ITU-R BT.601 luma weights.
inline constexpr double kLumaR = 0.299;
inline constexpr double kLumaG = 0.587;
inline constexpr double kLumaB = 0.114;

inline double luma(Rgb c) noexcept { return kLumaR * c.r + kLumaG * c.g + kLumaB * c.b; }

/// Luma scaled by 1000 so that it is an exact integer.
inline std::int64_t luma_milli(Rgb c) noexcept {
  return 299 * std::int64_t{c.r} + 587 * std::int64_t{c.g} + 114 * std::int64_t{c.b};
}

/// Row-major luma plane of the image.
inline std::vector<double> luma_plane(const ImageBuffer& image) {
  std::vector<double> out(static_cast<std::size_t>(image.width()) * image.height());
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x)
      out[static_cast<std::size_t>(y) * image.width() + x] = luma(image.at(x, y));
  return out;
}

namespace detail {

// Bilinear sample of a row-major plane at continuous coordinates where the
// center of pixel i sits at i + 0.5 (edges clamp).
inline double bilinear_sample(std::span<const double> plane, int w, int h, double fx, double fy) {
  const double u = std::clamp(fx - 0.5, 0.0, static_cast<double>(w - 1));
  const double v = std::clamp(fy - 0.5, 0.0, static_cast<double>(h - 1));
  const int x0 = static_cast<int>(u);
  const int y0 = static_cast<int>(v);
  const int x1 = std::min(x0 + 1, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  const double ax = u - x0;
  const double ay = v - y0;
  auto at = [&](int x, int y) { return plane[static_cast<std::size_t>(y) * w + x]; };
  const double top = at(x0, y0) * (1 - ax) + at(x1, y0) * ax;
  const double bottom = at(x0, y1) * (1 - ax) + at(x1, y1) * ax;
  return top * (1 - ay) + bottom * ay;
}

}  // namespace detail

/// Resample a scalar plane to new dimensions with bilinear interpolation.
inline std::vector<double> resize_plane(std::span<const double> plane, int w, int h, int new_w,
                                        int new_h) {
  std::vector<double> out(static_cast<std::size_t>(new_w) * new_h);
  const double sx = static_cast<double>(w) / new_w;
  const double sy = static_cast<double>(h) / new_h;
  for (int y = 0; y < new_h; ++y)
    for (int x = 0; x < new_w; ++x)
      out[static_cast<std::size_t>(y) * new_w + x] =
          detail::bilinear_sample(plane, w, h, (x + 0.5) * sx, (y + 0.5) * sy);
  return out;
}

/// Bilinear resize of an RGB image.
inline ImageBuffer resize_bilinear(const ImageBuffer& image, int new_w, int new_h) {
  if (new_w < 1 || new_h < 1) throw InvalidArgument("resize target must be at least 1x1");
  const int w = image.width();
  const int h = image.height();
  std::vector<double> channel(static_cast<std::size_t>(w) * h);
  ImageBuffer out(new_w, new_h);
  auto src = image.data();
  auto dst = out.data();
  for (int c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < channel.size(); ++i) channel[i] = src[i * 3 + c];
    const auto resized = resize_plane(channel, w, h, new_w, new_h);
    for (std::size_t i = 0; i < resized.size(); ++i)
      dst[i * 3 + c] = static_cast<std::uint8_t>(std::clamp(std::lround(resized[i]), 0L, 255L));
  }
  return out;
}

/// Rescale to a fixed height keeping the aspect ratio (width rounded, >= 1).
inline ImageBuffer resize_to_height(const ImageBuffer& image, int height) {
  if (height < 1) throw InvalidArgument("target height must be positive");
  const auto width = std::max<long>(
      1, std::lround(static_cast<double>(image.width()) * height / image.height()));
  return resize_bilinear(image, static_cast<int>(width), height);
}

/// Copy of the rectangle (x, y, w, h); the rectangle must lie inside the image.
inline ImageBuffer extract(const ImageBuffer& image, int x, int y, int w, int h) {
  if (x < 0 || y < 0 || w < 1 || h < 1 || x + w > image.width() || y + h > image.height())
    throw InvalidArgument("extract rectangle outside image");
  ImageBuffer out(w, h);
  for (int row = 0; row < h; ++row)
    for (int col = 0; col < w; ++col) out.set(col, row, image.at(x + col, y + row));
  return out;
}

/// Paste `src` onto `dst` with its top-left at (x, y); out-of-range pixels are dropped.
inline void blit(ImageBuffer& dst, const ImageBuffer& src, int x, int y) {
  for (int row = 0; row < src.height(); ++row)
    for (int col = 0; col < src.width(); ++col)
      if (dst.contains(x + col, y + row)) dst.set(x + col, y + row, src.at(col, row));
}

inline ImageBuffer mirror_horizontal(const ImageBuffer& image) {
  ImageBuffer out(image.width(), image.height());
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x)
      out.set(image.width() - 1 - x, y, image.at(x, y));
  return out;
}

}  // namespace faircrop
