#pragma once

// Corpus manifests (JSON Lines), in-memory corpora and seeded sampling.
//
// A manifest is a text file with one JSON object per non-blank line. The
// first object is a header declaring subgroups by attribute predicate:
//
//   {"manifest_version": 1,
//    "subgroups": [{"id": "light", "where": {"figure": "light"}}]}
//
// Every following line describes one image:
//
//   {"image_id": "img-001", "path": "img-001.png",
//    "attributes": {"figure": "light"},
//    "head_box": [x, y, w, h],            (optional, pixels)
//    "saliency_path": "img-001.pfm"}      (optional, PFM map for the image)
//
// Relative paths resolve against the manifest's directory. A subgroup's
// members are the entries whose attributes include every key/value pair of
// its "where" object, in file order.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "faircrop/error.hpp"
#include "faircrop/image.hpp"
#include "faircrop/image_io.hpp"
#include "faircrop/rng.hpp"

namespace faircrop {

/// Axis-aligned pixel rectangle.
struct PixelBox {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  bool contains(int px, int py) const noexcept {
    return px >= x && px < x + w && py >= y && py < y + h;
  }
  friend constexpr bool operator==(const PixelBox&, const PixelBox&) = default;
};

struct ManifestEntry {
  std::string image_id;
  std::filesystem::path path;  // resolved
  std::map<std::string, std::string> attributes;
  std::optional<PixelBox> head_box;
  std::optional<std::filesystem::path> saliency_path;  // resolved
  std::size_t line = 0;
};

struct Subgroup {
  std::string id;
  std::map<std::string, std::string> where;
  std::vector<std::string> members;  // image ids in manifest order
};

struct CorpusManifest {
  std::vector<ManifestEntry> entries;
  std::vector<Subgroup> subgroups;

  const ManifestEntry& entry(const std::string& image_id) const {
    for (const auto& e : entries)
      if (e.image_id == image_id) return e;
    throw InvalidArgument("unknown image id '" + image_id + "'");
  }

  const Subgroup& subgroup(const std::string& id) const {
    for (const auto& g : subgroups)
      if (g.id == id) return g;
    throw InvalidArgument("unknown subgroup '" + id + "'");
  }

  /// Recompute subgroup membership from the predicates.
  void resolve_members() {
    for (auto& g : subgroups) {
      g.members.clear();
      for (const auto& e : entries) {
        const bool match = std::all_of(g.where.begin(), g.where.end(), [&](const auto& kv) {
          const auto it = e.attributes.find(kv.first);
          return it != e.attributes.end() && it->second == kv.second;
        });
        if (match) g.members.push_back(e.image_id);
      }
    }
  }
};

struct ManifestOptions {
  bool check_files = true;   // image and saliency files must exist
  bool probe_images = true;  // decode images to check head boxes against their bounds
};

namespace detail {

inline std::map<std::string, std::string> string_map(const nlohmann::json& j, const char* what,
                                                     std::vector<std::string>& problems) {
  std::map<std::string, std::string> out;
  if (!j.is_object()) {
    problems.push_back(std::string(what) + " must be an object");
    return out;
  }
  for (const auto& [k, v] : j.items()) {
    if (!v.is_string()) problems.push_back(std::string(what) + "." + k + " must be a string");
    else out[k] = v.get<std::string>();
  }
  return out;
}

}  // namespace detail

/// Parse and validate a manifest held in memory. `base_dir` resolves
/// relative paths. Every problem is collected and thrown together as a
/// ValidationError.
inline CorpusManifest parse_manifest(std::istream& in, const std::filesystem::path& base_dir,
                                     const ManifestOptions& options = {}) {
  using nlohmann::json;
  CorpusManifest manifest;
  std::vector<ValidationIssue> issues;
  std::unordered_map<std::string, std::size_t> first_line;
  bool have_header = false;
  std::string text;
  std::size_t line_no = 0;

  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  };

  while (std::getline(in, text)) {
    ++line_no;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      issues.push_back({line_no, std::string("parse error: ") + e.what()});
      have_header = true;  // a broken first line is reported here, not again as a missing header
      continue;
    }
    if (!j.is_object()) {
      issues.push_back({line_no, "expected a JSON object"});
      continue;
    }
    if (!have_header) {
      have_header = true;
      if (!j.contains("subgroups")) {
        issues.push_back({line_no, "first line must be the header object with \"subgroups\""});
        continue;
      }
      if (j.value("manifest_version", 1) != 1)
        issues.push_back({line_no, "unsupported manifest_version"});
      if (!j["subgroups"].is_array()) {
        issues.push_back({line_no, "\"subgroups\" must be an array"});
        continue;
      }
      for (const auto& g : j["subgroups"]) {
        std::vector<std::string> problems;
        Subgroup sg;
        if (!g.is_object() || !g.contains("id") || !g["id"].is_string()) {
          issues.push_back({line_no, "subgroup needs a string \"id\""});
          continue;
        }
        sg.id = g["id"].get<std::string>();
        sg.where = detail::string_map(g.value("where", json::object()), "where", problems);
        for (auto& p : problems) issues.push_back({line_no, "subgroup '" + sg.id + "': " + p});
        const bool dup = std::any_of(manifest.subgroups.begin(), manifest.subgroups.end(),
                                     [&](const Subgroup& s) { return s.id == sg.id; });
        if (dup) issues.push_back({line_no, "duplicate subgroup id '" + sg.id + "'"});
        else manifest.subgroups.push_back(std::move(sg));
      }
      continue;
    }

    ManifestEntry entry;
    entry.line = line_no;
    if (!j.contains("image_id") || !j["image_id"].is_string() ||
        j["image_id"].get<std::string>().empty()) {
      issues.push_back({line_no, "entry needs a non-empty string \"image_id\""});
      continue;
    }
    entry.image_id = j["image_id"].get<std::string>();
    const std::string who = "image '" + entry.image_id + "': ";
    const auto [first, inserted] = first_line.emplace(entry.image_id, line_no);
    if (!inserted)
      issues.push_back({line_no, "duplicate image_id '" + entry.image_id + "' (lines " +
                                     std::to_string(first->second) + " and " +
                                     std::to_string(line_no) + ")"});
    if (!j.contains("path") || !j["path"].is_string()) {
      issues.push_back({line_no, who + "missing string \"path\""});
      continue;
    }
    entry.path = resolve(j["path"].get<std::string>());
    std::vector<std::string> problems;
    if (j.contains("attributes"))
      entry.attributes = detail::string_map(j["attributes"], "attributes", problems);
    if (j.contains("saliency_path")) {
      if (!j["saliency_path"].is_string()) problems.push_back("\"saliency_path\" must be a string");
      else entry.saliency_path = resolve(j["saliency_path"].get<std::string>());
    }
    if (j.contains("head_box")) {
      const auto& hb = j["head_box"];
      if (!hb.is_array() || hb.size() != 4 ||
          !std::all_of(hb.begin(), hb.end(), [](const json& v) { return v.is_number_integer(); })) {
        problems.push_back("\"head_box\" must be [x, y, w, h] integers");
      } else {
        PixelBox box{hb[0].get<int>(), hb[1].get<int>(), hb[2].get<int>(), hb[3].get<int>()};
        if (box.x < 0 || box.y < 0 || box.w < 1 || box.h < 1)
          problems.push_back("head_box must have x, y >= 0 and w, h >= 1");
        entry.head_box = box;
      }
    }
    if (options.check_files) {
      std::error_code ec;
      if (!std::filesystem::is_regular_file(entry.path, ec))
        problems.push_back("image file not found: " + entry.path.string());
      else if (options.probe_images && entry.head_box) {
        try {
          const ImageBuffer img = decode_image(entry.path);
          const PixelBox& b = *entry.head_box;
          if (b.x + b.w > img.width() || b.y + b.h > img.height())
            problems.push_back("head_box (" + std::to_string(b.x) + "," + std::to_string(b.y) +
                               "," + std::to_string(b.w) + "," + std::to_string(b.h) +
                               ") exceeds image bounds " + std::to_string(img.width()) + "x" +
                               std::to_string(img.height()));
        } catch (const Error& e) {
          problems.push_back(std::string("cannot decode image: ") + e.what());
        }
      }
      if (entry.saliency_path && !std::filesystem::is_regular_file(*entry.saliency_path, ec))
        problems.push_back("saliency file not found: " + entry.saliency_path->string());
    }
    for (auto& p : problems) issues.push_back({line_no, who + p});
    if (inserted) manifest.entries.push_back(std::move(entry));
  }
  if (!have_header) issues.push_back({0, "manifest is empty (missing header line)"});
  if (!issues.empty()) throw ValidationError(std::move(issues));
  manifest.resolve_members();
  return manifest;
}

inline CorpusManifest load_manifest(const std::filesystem::path& path,
                                    const ManifestOptions& options = {}) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest '" + path.string() + "'");
  return parse_manifest(in, path.parent_path(), options);
}

/// Serialize a manifest. Paths are written relative to `base_dir` when possible.
inline std::string format_manifest(const CorpusManifest& manifest,
                                   const std::filesystem::path& base_dir) {
  using nlohmann::json;
  auto rel = [&](const std::filesystem::path& p) {
    const auto r = p.lexically_relative(base_dir);
    return (r.empty() || r.string().rfind("..", 0) == 0 ? p : r).generic_string();
  };
  std::string out;
  json groups = json::array();
  for (const auto& g : manifest.subgroups) groups.push_back({{"id", g.id}, {"where", g.where}});
  out += json{{"manifest_version", 1}, {"subgroups", groups}}.dump() + "\n";
  for (const auto& e : manifest.entries) {
    json j{{"image_id", e.image_id}, {"path", rel(e.path)}, {"attributes", e.attributes}};
    if (e.head_box) j["head_box"] = {e.head_box->x, e.head_box->y, e.head_box->w, e.head_box->h};
    if (e.saliency_path) j["saliency_path"] = rel(*e.saliency_path);
    out += j.dump() + "\n";
  }
  return out;
}

/// Manifest plus decoded images, immutable once built.
class Corpus {
 public:
  Corpus(CorpusManifest manifest, std::unordered_map<std::string, ImageBuffer> images)
      : manifest_(std::move(manifest)), images_(std::move(images)) {
    for (const auto& e : manifest_.entries)
      if (!images_.count(e.image_id))
        throw InvalidArgument("corpus is missing pixels for image '" + e.image_id + "'");
  }

  /// Decode every image the manifest references.
  static Corpus load(CorpusManifest manifest) {
    std::unordered_map<std::string, ImageBuffer> images;
    for (const auto& e : manifest.entries) images.emplace(e.image_id, decode_image(e.path));
    return Corpus(std::move(manifest), std::move(images));
  }

  const CorpusManifest& manifest() const noexcept { return manifest_; }
  const ImageBuffer& image(const std::string& id) const {
    const auto it = images_.find(id);
    if (it == images_.end()) throw InvalidArgument("unknown image id '" + id + "'");
    return it->second;
  }
  const ManifestEntry& entry(const std::string& id) const { return manifest_.entry(id); }
  const Subgroup& subgroup(const std::string& id) const { return manifest_.subgroup(id); }

 private:
  CorpusManifest manifest_;
  std::unordered_map<std::string, ImageBuffer> images_;
};

/// `n` ids drawn uniformly from `members` with the pinned generator seeded by
/// `seed`. Without replacement this is a partial Fisher-Yates shuffle.
inline std::vector<std::string> sample_uniform(const std::vector<std::string>& members,
                                               std::uint64_t seed, std::size_t n,
                                               bool with_replacement) {
  if (members.empty()) throw InvalidArgument("cannot sample from an empty subgroup");
  if (!with_replacement && n > members.size())
    throw InvalidArgument("cannot draw " + std::to_string(n) + " distinct images from " +
                          std::to_string(members.size()));
  Rng rng(seed);
  std::vector<std::string> out;
  out.reserve(n);
  if (with_replacement) {
    for (std::size_t i = 0; i < n; ++i) out.push_back(members[rng.uniform_index(members.size())]);
    return out;
  }
  std::vector<std::size_t> idx(members.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + rng.uniform_index(idx.size() - i);
    std::swap(idx[i], idx[j]);
    out.push_back(members[idx[i]]);
  }
  return out;
}

inline std::vector<std::string> sample_uniform(const Subgroup& group, std::uint64_t seed,
                                               std::size_t n, bool with_replacement) {
  return sample_uniform(group.members, seed, n, with_replacement);
}

}  // namespace faircrop
