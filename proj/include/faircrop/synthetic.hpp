#pragma once

// Deterministic synthetic portrait corpora: an elliptical head above a torso
// rectangle on a uniform background, with per-group luminance and an
// optional high-contrast "jersey number" patch on the torso.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "faircrop/corpus.hpp"
#include "faircrop/error.hpp"
#include "faircrop/image.hpp"
#include "faircrop/image_io.hpp"
#include "faircrop/rng.hpp"

namespace faircrop {

struct SyntheticGroup {
  std::string id;
  int figure_luma = 200;                 // head (and, scaled, torso) luminance
  std::optional<int> torso_patch_luma;   // stripes of this and 255 minus it
};

struct SyntheticParams {
  std::vector<SyntheticGroup> groups;
  std::size_t n_per_group = 20;
  int background_luma = 20;
  int width = 96;
  int height = 144;
  double torso_contrast = 0.6;  // torso luma = bg + torso_contrast * (figure - bg)
  int noise = 0;                // uniform per-pixel jitter in [-noise, noise]
  std::uint64_t seed = 0;
};

struct SyntheticFigure {
  ImageBuffer image;
  PixelBox head_box;
  std::optional<PixelBox> patch_box;
};

namespace detail {

inline std::uint8_t clamp_luma(long v) { return static_cast<std::uint8_t>(std::clamp(v, 0L, 255L)); }

inline Rgb gray(int v) {
  const auto c = clamp_luma(v);
  return {c, c, c};
}

}  // namespace detail

/// One figure image; geometry is jittered by `seed`.
inline SyntheticFigure synthetic_figure(const SyntheticParams& params, const SyntheticGroup& group,
                                        std::uint64_t seed) {
  const int w = params.width;
  const int h = params.height;
  if (w < 16 || h < 16) throw InvalidArgument("synthetic images must be at least 16x16");
  for (int v : {group.figure_luma, params.background_luma, group.torso_patch_luma.value_or(0)})
    if (v < 0 || v > 255) throw InvalidArgument("luma values must be in [0, 255]");
  Rng rng(seed);
  auto jitter = [&](double span) { return (rng.uniform_unit() * 2.0 - 1.0) * span; };

  const double head_cx = w / 2.0 + jitter(w / 10.0);
  const double head_rx = w * 0.11 * (1.0 + jitter(0.12));
  const double head_ry = head_rx * 1.25;
  const double head_cy = h * 0.06 + head_ry + jitter(h / 40.0);
  const double torso_top = head_cy + head_ry + h * 0.12;
  const double torso_half_w = w * (0.26 + jitter(0.03));
  const double torso_bottom = h * 0.97;

  const int bg = params.background_luma;
  const int fig = group.figure_luma;
  const int torso = static_cast<int>(std::lround(bg + params.torso_contrast * (fig - bg)));

  ImageBuffer img(w, h, detail::gray(bg));
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double dx = (x + 0.5 - head_cx) / head_rx;
      const double dy = (y + 0.5 - head_cy) / head_ry;
      if (dx * dx + dy * dy <= 1.0) img.set(x, y, detail::gray(fig));
      else if (y + 0.5 >= torso_top && y + 0.5 <= torso_bottom &&
               std::abs(x + 0.5 - head_cx) <= torso_half_w)
        img.set(x, y, detail::gray(torso));
    }

  SyntheticFigure out{std::move(img), {}, std::nullopt};
  if (group.torso_patch_luma) {
    const int side = std::max(6, static_cast<int>(std::lround(w * 0.3)));
    const int px = std::clamp(static_cast<int>(std::lround(head_cx)) - side / 2, 0, w - side);
    const int py = std::clamp(static_cast<int>(std::lround((torso_top + torso_bottom) / 2.0)) - side / 2, 0, h - side);
    const int a = *group.torso_patch_luma;
    for (int y = py; y < py + side; ++y)
      for (int x = px; x < px + side; ++x)
        out.image.set(x, y, detail::gray(((x - px) / 2) % 2 == 0 ? a : 255 - a));
    out.patch_box = PixelBox{px, py, side, side};
  }
  if (params.noise > 0) {
    for (auto& v : out.image.data())
      v = detail::clamp_luma(static_cast<long>(v) +
                             static_cast<long>(rng.uniform_index(2 * params.noise + 1)) - params.noise);
  }

  // Head box: ellipse bounds grown by a quarter of each radius.
  const int x0 = std::max(0, static_cast<int>(std::floor(head_cx - 1.25 * head_rx)));
  const int y0 = std::max(0, static_cast<int>(std::floor(head_cy - 1.25 * head_ry)));
  const int x1 = std::min(w, static_cast<int>(std::ceil(head_cx + 1.25 * head_rx)));
  const int y1 = std::min(h, static_cast<int>(std::ceil(head_cy + 1.25 * head_ry)));
  out.head_box = {x0, y0, x1 - x0, y1 - y0};
  return out;
}

/// Corpus with `n_per_group` figures per group. Entries carry the attribute
/// {"group": <id>} and their head box; one subgroup is declared per group.
/// Image `k` of a group uses the stream derive_seed(seed, k), so groups with
/// identical settings get identical geometry.
inline Corpus synthetic_corpus(const SyntheticParams& params) {
  if (params.groups.empty()) throw InvalidArgument("synthetic corpus needs at least one group");
  if (params.background_luma < 0 || params.background_luma > 255)
    throw InvalidArgument("background luma must be in [0, 255]");
  CorpusManifest manifest;
  std::unordered_map<std::string, ImageBuffer> images;
  for (const auto& g : params.groups) {
    manifest.subgroups.push_back({g.id, {{"group", g.id}}, {}});
    for (std::size_t k = 0; k < params.n_per_group; ++k) {
      SyntheticFigure fig = synthetic_figure(params, g, derive_seed(params.seed, k));
      ManifestEntry e;
      e.image_id = g.id + "-" + std::to_string(k);
      e.path = e.image_id + ".png";
      e.attributes = {{"group", g.id}};
      e.head_box = fig.head_box;
      if (fig.patch_box) e.attributes["torso_patch"] = "yes";
      manifest.entries.push_back(e);
      images.emplace(e.image_id, std::move(fig.image));
    }
  }
  manifest.resolve_members();
  return Corpus(std::move(manifest), std::move(images));
}

/// Write every image as PNG plus `manifest.jsonl` into `dir`; returns the manifest path.
inline std::filesystem::path write_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  CorpusManifest manifest = corpus.manifest();
  for (auto& e : manifest.entries) {
    const auto file = dir / (e.image_id + ".png");
    encode_image(corpus.image(e.image_id), file, ImageFormat::Png);
    e.path = file;
  }
  const auto path = dir / "manifest.jsonl";
  write_file_atomic(path, format_manifest(manifest, dir));
  return path;
}

}  // namespace faircrop
