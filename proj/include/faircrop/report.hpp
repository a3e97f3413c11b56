#pragma once

// JSON and CSV renderings of audit, gaze, region and crop results. Output is
// deterministic: keys keep insertion order and numbers use shortest
// round-trip formatting.

#include <nlohmann/json.hpp>

#include <cstdio>
#include <cstdlib>
#include <string>
#include <variant>
#include <vector>

#include "faircrop/audit.hpp"
#include "faircrop/crop.hpp"
#include "faircrop/salient_points.hpp"

namespace faircrop {

using ordered_json = nlohmann::ordered_json;

inline ordered_json to_json(Point p) { return {{"x", p.x}, {"y", p.y}}; }

inline ordered_json to_json(const CropSpec& spec) {
  if (const auto* r = std::get_if<CropRect>(&spec))
    return {{"kind", "rect"}, {"x", r->x}, {"y", r->y}, {"w", r->w}, {"h", r->h}};
  const auto& p = std::get<PaddedCanvas>(spec);
  return {{"kind", "padded"},
          {"canvas_w", p.canvas_w},
          {"canvas_h", p.canvas_h},
          {"offset_x", p.offset_x},
          {"offset_y", p.offset_y},
          {"pad", {p.pad.r, p.pad.g, p.pad.b}}};
}

inline ordered_json to_json(const SalientRegion& r) {
  return {{"bbox", {{"x", r.bbox.x}, {"y", r.bbox.y}, {"w", r.bbox.w}, {"h", r.bbox.h}}},
          {"peak", to_json(r.peak)},
          {"peak_score", r.peak_score},
          {"mass", r.mass},
          {"cell_count", r.cell_count}};
}

inline ordered_json to_json(const std::vector<SalientRegion>& regions) {
  ordered_json out = ordered_json::array();
  for (const auto& r : regions) out.push_back(to_json(r));
  return out;
}

inline std::string ci_method_name(CiMethod m) { return m == CiMethod::Normal ? "normal" : "wilson"; }

/// Audit report with an echo of the configuration. `threads` is deliberately
/// not echoed: it never changes results.
inline ordered_json audit_report_json(const AuditReport& r, const PairAuditConfig& config,
                                      const std::string& trial_log = "") {
  const Interval ci = r.ci;
  ordered_json j;
  j["group_a"] = r.group_a;
  j["group_b"] = r.group_b;
  j["variant"] = r.variant;
  j["p_favored_a"] = r.p_favored_a;
  j["ci"] = {{"lo", ci.lo}, {"hi", ci.hi}, {"level", r.ci_level}, {"method", ci_method_name(config.ci_method)}};
  j["ci_half_width"] = (ci.hi - ci.lo) / 2.0;
  j["n"] = r.n;
  j["wins_a"] = r.wins_a;
  if (std::holds_alternative<NoAttachExhaustive>(config.variant)) j["ties"] = r.ties;
  j["parity_ratio"] = r.parity_ratio;
  j["epsilon"] = r.epsilon;
  j["disparate_impact"] = r.disparate_impact;
  j["trial_log"] = trial_log.empty() ? ordered_json(nullptr) : ordered_json(trial_log);
  j["config"] = {{"seed", config.seed},
                 {"n_trials", config.n_trials},
                 {"backend", backend_name(config.backend)},
                 {"grid_step", config.grid_step},
                 {"align", config.align == VerticalAlign::Top      ? "top"
                           : config.align == VerticalAlign::Center ? "center"
                                                                   : "bottom"},
                 {"randomize_sides", config.randomize_sides}};
  return j;
}

/// One CSV row per trial: trial,image_a,image_b,a_left,favored.
inline std::string trial_log_csv(const AuditReport& r) {
  std::string out = "trial,image_a,image_b,a_left,favored\n";
  for (const auto& t : r.trials)
    out += std::to_string(t.index) + "," + t.image_a + "," + t.image_b + "," +
           (t.a_left ? "1" : "0") + "," + (t.favored == Favored::A ? "A" : "B") + "\n";
  return out;
}

/// Shortest %g rendering that parses back to exactly `v`.
inline std::string format_number(double v) {
  char buf[32];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

/// ECDF steps as CSV with columns value,ecdf.
inline std::string ecdf_csv(const Ecdf& ecdf) {
  std::string out = "value,ecdf\n";
  for (const auto& s : ecdf.steps()) out += format_number(s.value) + "," + format_number(s.ecdf) + "\n";
  return out;
}

/// Bar-chart data for a set of audits: pair,p_favored_a,ci_lo,ci_hi,deviation.
inline std::string favored_bars_csv(const std::vector<AuditReport>& reports) {
  std::string out = "pair,p_favored_a,ci_lo,ci_hi,deviation\n";
  for (const auto& r : reports)
    out += r.group_a + " vs " + r.group_b + "," + format_number(r.p_favored_a) + "," +
           format_number(r.ci.lo) + "," + format_number(r.ci.hi) + "," +
           format_number(r.p_favored_a - 0.5) + "\n";
  return out;
}

inline ordered_json gaze_report_json(const GazeReport& report, const GazeAnalysisConfig& config) {
  ordered_json groups = ordered_json::array();
  for (const auto& g : report.groups) {
    ordered_json images = ordered_json::array();
    for (const auto& img : g.images) {
      ordered_json box = nullptr;
      if (img.head_box) box = {img.head_box->x, img.head_box->y, img.head_box->w, img.head_box->h};
      images.push_back({{"image_id", img.image_id},
                        {"focal", to_json(img.focal.point)},
                        {"focal_score", img.focal.score},
                        {"head_box", box},
                        {"off_head", img.off_head},
                        {"regions", to_json(img.regions)}});
    }
    groups.push_back({{"group", g.group},
                      {"eligible_n", g.eligible_n},
                      {"sampled_n", g.sampled_n},
                      {"off_head_count", g.off_head_count},
                      {"off_head_ids", g.off_head_ids},
                      {"missing_head_box_ids", g.missing_head_box_ids},
                      {"images", images}});
  }
  return {{"config",
           {{"min_hw_ratio", config.min_hw_ratio},
            {"min_region_count", config.min_region_count},
            {"sample_size", config.sample_size},
            {"region_threshold", config.region_threshold},
            {"seed", config.seed},
            {"grid_step", config.grid_step}}},
          {"groups", groups}};
}

}  // namespace faircrop
