#pragma once

// Shared image and map fixtures for the unit and acceptance tests.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include "faircrop/image.hpp"
#include "faircrop/rng.hpp"
#include "faircrop/saliency_map.hpp"

namespace fixtures {

using namespace faircrop;

inline ImageBuffer solid(int w, int h, std::uint8_t v) { return ImageBuffer(w, h, Rgb{v, v, v}); }

inline void fill_rect(ImageBuffer& img, int x0, int y0, int w, int h, Rgb c) {
  for (int y = y0; y < y0 + h; ++y)
    for (int x = x0; x < x0 + w; ++x) img.set(x, y, c);
}

/// Black w x h image with a white square of side `side` at (x0, y0).
inline ImageBuffer block_image(int w, int h, int x0, int y0, int side) {
  ImageBuffer img(w, h);
  fill_rect(img, x0, y0, side, side, {255, 255, 255});
  return img;
}

inline ImageBuffer random_image(int w, int h, std::uint64_t seed) {
  Rng rng(seed);
  ImageBuffer img(w, h);
  for (auto& v : img.data()) v = static_cast<std::uint8_t>(rng.uniform_index(256));
  return img;
}

/// Image whose left half is the mirror of its right half.
inline ImageBuffer mirror_symmetric_image(int w, int h, std::uint64_t seed) {
  ImageBuffer img = random_image(w, h, seed);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w / 2; ++x) img.set(w - 1 - x, y, img.at(x, y));
  return img;
}

inline SaliencyMap random_map(int gw, int gh, std::uint64_t seed, int source_w = 0, int source_h = 0) {
  Rng rng(seed);
  std::vector<double> s(static_cast<std::size_t>(gw) * gh);
  for (auto& v : s) v = rng.uniform_unit();
  return SaliencyMap(gw, gh, source_w ? source_w : gw * 8, source_h ? source_h : gh * 8, std::move(s));
}

struct PlantedBlobs {
  SaliencyMap map;
  std::vector<std::vector<std::size_t>> cells;  // row-major cell indices of each blob
};

/// k rectangular blobs (1..4 cells per side) with scores in [0.5, 1] on a
/// background below 0.14, separated by at least one empty cell on every side.
inline PlantedBlobs planted_blobs(int gw, int gh, int k, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> s(static_cast<std::size_t>(gw) * gh);
  for (auto& v : s) v = 0.14 * rng.uniform_unit();
  std::vector<bool> reserved(s.size(), false);
  std::vector<std::vector<std::size_t>> blobs;
  while (static_cast<int>(blobs.size()) < k) {
    const int bw = 1 + static_cast<int>(rng.uniform_index(4));
    const int bh = 1 + static_cast<int>(rng.uniform_index(4));
    const int x0 = static_cast<int>(rng.uniform_index(gw - bw + 1));
    const int y0 = static_cast<int>(rng.uniform_index(gh - bh + 1));
    bool clash = false;
    for (int y = y0 - 1; y <= y0 + bh && !clash; ++y)
      for (int x = x0 - 1; x <= x0 + bw; ++x)
        if (x >= 0 && y >= 0 && x < gw && y < gh && reserved[y * gw + x]) clash = true;
    if (clash) continue;
    std::vector<std::size_t> cells;
    for (int y = y0; y < y0 + bh; ++y)
      for (int x = x0; x < x0 + bw; ++x) {
        const std::size_t c = static_cast<std::size_t>(y) * gw + x;
        s[c] = 0.5 + 0.5 * rng.uniform_unit();
        cells.push_back(c);
      }
    for (int y = y0 - 1; y <= y0 + bh; ++y)
      for (int x = x0 - 1; x <= x0 + bw; ++x)
        if (x >= 0 && y >= 0 && x < gw && y < gh) reserved[y * gw + x] = true;
    blobs.push_back(std::move(cells));
  }
  return {SaliencyMap(gw, gh, gw * 8, gh * 8, std::move(s)), std::move(blobs)};
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("faircrop-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

  std::filesystem::path write(const std::string& name, const std::string& bytes) const {
    const auto p = path_ / name;
    std::ofstream(p, std::ios::binary) << bytes;
    return p;
  }

 private:
  std::filesystem::path path_;
};

struct CommandResult {
  int exit_code = -1;
  std::string out;
};

// Runs a shell command, capturing stdout; stderr is discarded.
inline CommandResult run_command(const std::string& cmd) {
  CommandResult r;
  FILE* pipe = ::popen((cmd + " 2>/dev/null").c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t got = 0;
  while ((got = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, got);
  const int status = ::pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

}  // namespace fixtures
