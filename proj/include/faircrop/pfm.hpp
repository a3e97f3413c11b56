#pragma once

// Portable FloatMap (grayscale "Pf") reading and writing.
//
// Layout: "Pf\n", "<width> <height>\n", "<scale>\n", then width*height
// 32-bit floats, bottom row first. A negative scale means little-endian.
// We always write "-1.0" and little-endian data; reading accepts either
// byte order.

#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "faircrop/error.hpp"
#include "faircrop/saliency_map.hpp"

namespace faircrop {

/// Row-major float raster, top row first in memory.
struct FloatGrid {
  int width = 0;
  int height = 0;
  std::vector<float> values;

  friend bool operator==(const FloatGrid&, const FloatGrid&) = default;
};

namespace detail {

inline std::uint32_t byteswap32(std::uint32_t v) noexcept {
  return ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
}

}  // namespace detail

inline std::string encode_pfm(const FloatGrid& grid) {
  if (grid.width < 1 || grid.height < 1 ||
      grid.values.size() != static_cast<std::size_t>(grid.width) * grid.height)
    throw InvalidArgument("float grid dimensions do not match its data");
  std::string out = "Pf\n" + std::to_string(grid.width) + " " + std::to_string(grid.height) +
                    "\n-1.0\n";
  const std::size_t header = out.size();
  out.resize(header + grid.values.size() * 4);
  char* dst = out.data() + header;
  for (int row = grid.height - 1; row >= 0; --row) {
    for (int col = 0; col < grid.width; ++col) {
      auto bits = std::bit_cast<std::uint32_t>(
          grid.values[static_cast<std::size_t>(row) * grid.width + col]);
      if constexpr (std::endian::native == std::endian::big) bits = detail::byteswap32(bits);
      std::memcpy(dst, &bits, 4);
      dst += 4;
    }
  }
  return out;
}

inline FloatGrid decode_pfm(const std::string& bytes) {
  // Header tokens are whitespace separated; exactly one whitespace byte
  // follows the scale before the raster.
  std::size_t pos = 0;
  auto next_token = [&]() -> std::string {
    while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    return bytes.substr(start, pos - start);
  };
  if (next_token() != "Pf") throw FormatError("not a grayscale PFM file (expected 'Pf' magic)");
  FloatGrid grid;
  double scale = 0.0;
  try {
    grid.width = std::stoi(next_token());
    grid.height = std::stoi(next_token());
    scale = std::stod(next_token());
  } catch (const std::exception&) {
    throw FormatError("malformed PFM header");
  }
  if (grid.width < 1 || grid.height < 1) throw FormatError("PFM dimensions must be positive");
  if (scale == 0.0 || !std::isfinite(scale)) throw FormatError("PFM scale must be non-zero");
  if (pos >= bytes.size()) throw FormatError("PFM raster missing");
  ++pos;  // the single whitespace byte after the scale

  const std::size_t count = static_cast<std::size_t>(grid.width) * grid.height;
  if (bytes.size() - pos != count * 4)
    throw FormatError("PFM raster has " + std::to_string(bytes.size() - pos) +
                      " bytes, expected " + std::to_string(count * 4));
  const bool little = scale < 0.0;
  const bool swap = little != (std::endian::native == std::endian::little);
  grid.values.resize(count);
  const char* src = bytes.data() + pos;
  for (int row = grid.height - 1; row >= 0; --row) {
    for (int col = 0; col < grid.width; ++col) {
      std::uint32_t bits = 0;
      std::memcpy(&bits, src, 4);
      src += 4;
      if (swap) bits = detail::byteswap32(bits);
      grid.values[static_cast<std::size_t>(row) * grid.width + col] = std::bit_cast<float>(bits);
    }
  }
  return grid;
}

inline FloatGrid read_pfm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open saliency map '" + path.string() + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_pfm(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

inline void write_pfm(const std::filesystem::path& path, const FloatGrid& grid) {
  const std::string bytes = encode_pfm(grid);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write saliency map '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing saliency map '" + path.string() + "'");
}

inline FloatGrid to_float_grid(const SaliencyMap& map) {
  FloatGrid grid{map.grid_w(), map.grid_h(), {}};
  grid.values.reserve(map.size());
  for (double s : map.scores()) grid.values.push_back(static_cast<float>(s));
  return grid;
}

/// Interpret a float grid as a saliency map over a source image of the given size.
inline SaliencyMap to_saliency_map(const FloatGrid& grid, int source_w, int source_h) {
  std::vector<double> scores;
  scores.reserve(grid.values.size());
  for (float v : grid.values) {
    if (!std::isfinite(v) || v < 0.0f)
      throw FormatError("saliency map contains a negative or non-finite value");
    scores.push_back(v);
  }
  return SaliencyMap(grid.width, grid.height, source_w, source_h, std::move(scores));
}

}  // namespace faircrop
