#pragma once

// Demographic-parity audits of saliency-based cropping.
//
// The pairwise design: draw one image from each of two subgroups, place them
// side by side, run saliency on the composite and record which image holds
// the most salient point. With p = P(group a favored), the pair shows
// disparate impact when min(p, 1 - p) / max(p, 1 - p) <= 1 - epsilon.

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <variant>
#include <vector>

#include "faircrop/corpus.hpp"
#include "faircrop/error.hpp"
#include "faircrop/image.hpp"
#include "faircrop/rng.hpp"
#include "faircrop/saliency.hpp"
#include "faircrop/salient_points.hpp"

namespace faircrop {

// ---- attachment -------------------------------------------------------------

enum class VerticalAlign { Top, Center, Bottom };

struct AttachedPair {
  ImageBuffer image;
  int boundary_x = 0;  // first column of the right-hand image
};

/// Left and right images side by side on a canvas of height max(h_l, h_r);
/// rows not covered by an image are `pad`.
inline AttachedPair attach_horizontal(const ImageBuffer& left, const ImageBuffer& right,
                                      Rgb pad = kBlack, VerticalAlign align = VerticalAlign::Top) {
  const int h = std::max(left.height(), right.height());
  auto offset = [&](int ih) {
    switch (align) {
      case VerticalAlign::Top: return 0;
      case VerticalAlign::Center: return (h - ih) / 2;
      case VerticalAlign::Bottom: return h - ih;
    }
    return 0;
  };
  AttachedPair out{ImageBuffer(left.width() + right.width(), h, pad), left.width()};
  blit(out.image, left, 0, offset(left.height()));
  blit(out.image, right, left.width(), offset(right.height()));
  return out;
}

enum class Favored { A, B };

/// One comparison with `img_a` on the left. A point exactly on the boundary
/// column belongs to B.
inline Favored run_pairwise_trial(const ImageBuffer& img_a, const ImageBuffer& img_b,
                                  const SaliencyBackend& backend,
                                  int grid_step = kDefaultGridStep, Rgb pad = kBlack,
                                  VerticalAlign align = VerticalAlign::Top) {
  const AttachedPair pair = attach_horizontal(img_a, img_b, pad, align);
  const Point p = max_salient_point(compute_saliency(pair.image, backend, grid_step)).point;
  return p.x < pair.boundary_x ? Favored::A : Favored::B;
}

// ---- statistics -------------------------------------------------------------

enum class CiMethod { Normal, Wilson };

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Two-sided standard normal critical value, e.g. 1.959964 at 0.95.
inline double z_for_level(double level) {
  if (!(level > 0.0 && level < 1.0)) throw InvalidArgument("confidence level must be in (0, 1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), 0.5 + level / 2.0);
}

/// Interval for a binomial proportion. Normal: p +- z sqrt(p (1 - p) / n),
/// clamped to [0, 1]. Wilson: score interval, better behaved for small n.
inline Interval confidence_interval(double p_hat, std::size_t n, double level = 0.95,
                                    CiMethod method = CiMethod::Normal) {
  if (n < 1) throw InvalidArgument("confidence interval needs n >= 1");
  if (!(p_hat >= 0.0 && p_hat <= 1.0)) throw InvalidArgument("proportion must be in [0, 1]");
  const double z = z_for_level(level);
  const double nn = static_cast<double>(n);
  if (method == CiMethod::Normal) {
    const double half = z * std::sqrt(p_hat * (1.0 - p_hat) / nn);
    return {std::max(0.0, p_hat - half), std::min(1.0, p_hat + half)};
  }
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double center = (p_hat + z2 / (2.0 * nn)) / denom;
  const double half = z / denom * std::sqrt(p_hat * (1.0 - p_hat) / nn + z2 / (4.0 * nn * nn));
  return {std::max(0.0, std::min(p_hat, center - half)), std::min(1.0, std::max(p_hat, center + half))};
}

struct ParityVerdict {
  bool disparate_impact = false;
  double parity_ratio = 1.0;
};

/// In the pairwise design P(R=1|A=a) = p and P(R=1|A=b) = 1 - p. Checking
/// both orderings reduces to the smaller over the larger.
inline ParityVerdict demographic_parity_verdict(double p_favored, double epsilon) {
  if (!(p_favored >= 0.0 && p_favored <= 1.0)) throw InvalidArgument("probability must be in [0, 1]");
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw InvalidArgument("epsilon must be in [0, 1)");
  const double lo = std::min(p_favored, 1.0 - p_favored);
  const double hi = std::max(p_favored, 1.0 - p_favored);
  const double ratio = lo / hi;
  return {ratio <= 1.0 - epsilon, ratio};
}

/// Empirical CDF: F(x) = #{samples <= x} / n.
class Ecdf {
 public:
  explicit Ecdf(std::vector<double> samples) : sorted_(std::move(samples)) {
    if (sorted_.empty()) throw InvalidArgument("ECDF needs at least one sample");
    std::sort(sorted_.begin(), sorted_.end());
  }

  double operator()(double x) const {
    const auto it = std::upper_bound(sorted_.begin(), sorted_.end(), x);
    return static_cast<double>(it - sorted_.begin()) / static_cast<double>(sorted_.size());
  }

  struct Step {
    double value;
    double ecdf;
  };

  /// One step per distinct sample value, ascending; the last has ecdf 1.
  std::vector<Step> steps() const {
    std::vector<Step> out;
    const double n = static_cast<double>(sorted_.size());
    for (std::size_t i = 0; i < sorted_.size(); ++i)
      if (i + 1 == sorted_.size() || sorted_[i + 1] != sorted_[i])
        out.push_back({sorted_[i], static_cast<double>(i + 1) / n});
    return out;
  }

  const std::vector<double>& samples() const noexcept { return sorted_; }

 private:
  std::vector<double> sorted_;
};

/// Two-sample Kolmogorov-Smirnov statistic sup_x |F_a(x) - F_b(x)|.
inline double ecdf_gap(const Ecdf& a, const Ecdf& b) {
  const auto& xa = a.samples();
  const auto& xb = b.samples();
  const double na = static_cast<double>(xa.size());
  const double nb = static_cast<double>(xb.size());
  std::size_t i = 0, j = 0;
  double gap = 0.0;
  while (i < xa.size() || j < xb.size()) {
    double x;
    if (j == xb.size() || (i < xa.size() && xa[i] <= xb[j])) x = xa[i];
    else x = xb[j];
    while (i < xa.size() && xa[i] == x) ++i;
    while (j < xb.size() && xb[j] == x) ++j;
    gap = std::max(gap, std::abs(i / na - j / nb));
  }
  return gap;
}

// ---- per-image saliency -------------------------------------------------------

/// Backend for one corpus image: its manifest saliency map when present,
/// otherwise the audit-wide backend.
inline SaliencyBackend backend_for(const ManifestEntry& entry, const SaliencyBackend& fallback) {
  if (entry.saliency_path) return ExternalMap{*entry.saliency_path};
  return fallback;
}

inline SaliencyMap image_saliency(const Corpus& corpus, const std::string& id,
                                  const SaliencyBackend& backend, int grid_step) {
  return compute_saliency(corpus.image(id), backend_for(corpus.entry(id), backend), grid_step);
}

inline double median_of(std::vector<double> v) {
  if (v.empty()) throw InvalidArgument("median of an empty set");
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return (lower + upper) / 2.0;
}

// ---- pairwise audits ----------------------------------------------------------

struct Attach {};
struct AttachScaled {
  int height = 256;
};
struct NoAttachExhaustive {};

using AuditVariant = std::variant<Attach, AttachScaled, NoAttachExhaustive>;

inline std::string variant_name(const AuditVariant& v) {
  if (const auto* s = std::get_if<AttachScaled>(&v)) return "scaled:" + std::to_string(s->height);
  return std::holds_alternative<Attach>(v) ? "attach" : "noattach";
}

/// Parses attach | scaled:<height> | noattach.
inline AuditVariant parse_variant(const std::string& text) {
  if (text == "attach") return Attach{};
  if (text == "noattach") return NoAttachExhaustive{};
  if (text.rfind("scaled:", 0) == 0) {
    const std::string h = text.substr(7);
    if (!h.empty() && h.size() < 6 && h.find_first_not_of("0123456789") == std::string::npos &&
        std::stoi(h) >= 1)
      return AttachScaled{std::stoi(h)};
  }
  throw InvalidArgument("unknown audit variant '" + text + "' (expected attach, scaled:<h> or noattach)");
}

inline constexpr double kDefaultEpsilon = 0.2;

struct PairAuditConfig {
  std::string group_a;
  std::string group_b;
  std::size_t n_trials = 10000;
  std::uint64_t seed = 0;
  AuditVariant variant = Attach{};
  SaliencyBackend backend = SpectralResidual{};
  int grid_step = kDefaultGridStep;
  double epsilon = kDefaultEpsilon;
  double ci_level = 0.95;
  CiMethod ci_method = CiMethod::Normal;
  VerticalAlign align = VerticalAlign::Top;
  Rgb pad = kBlack;
  // Place each pair's images left/right by a per-trial coin flip. Together
  // with drawing images in group-id order this makes swapping a and b map p
  // to exactly 1 - p.
  bool randomize_sides = true;
  unsigned threads = 1;  // execution only; never changes the result
};

struct TrialRecord {
  std::size_t index = 0;
  std::string image_a;
  std::string image_b;
  bool a_left = true;
  Favored favored = Favored::A;
};

struct AuditReport {
  std::string group_a;
  std::string group_b;
  std::string variant;
  double p_favored_a = 0.0;
  Interval ci;
  std::size_t n = 0;          // trials, or image pairs for the exhaustive variant
  std::size_t wins_a = 0;     // trials (or pairs) won outright by a
  std::size_t ties = 0;       // exhaustive variant only
  double parity_ratio = 1.0;
  bool disparate_impact = false;
  double epsilon = kDefaultEpsilon;
  double ci_level = 0.95;
  std::vector<TrialRecord> trials;  // empty for the exhaustive variant
};

namespace detail {

template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (n + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (std::size_t i = t * chunk; i < std::min(n, (t + 1) * chunk); ++i) fn(i);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline AuditReport finish_report(const PairAuditConfig& config, double p, std::size_t n) {
  AuditReport r;
  r.group_a = config.group_a;
  r.group_b = config.group_b;
  r.variant = variant_name(config.variant);
  r.p_favored_a = p;
  r.n = n;
  r.epsilon = config.epsilon;
  r.ci_level = config.ci_level;
  const ParityVerdict v = demographic_parity_verdict(p, config.epsilon);
  r.parity_ratio = v.parity_ratio;
  r.disparate_impact = v.disparate_impact;
  return r;
}

inline void check_config(const PairAuditConfig& config) {
  if (!(config.epsilon >= 0.0 && config.epsilon < 1.0)) throw InvalidArgument("epsilon must be in [0, 1)");
  if (!(config.ci_level > 0.0 && config.ci_level < 1.0))
    throw InvalidArgument("confidence level must be in (0, 1)");
  if (config.grid_step < 1) throw InvalidArgument("grid step must be at least 1");
}

}  // namespace detail

/// Sampled pairwise audit (attach or attach-after-scaling). Trial t draws
/// from the stream derive_seed(seed, t), so the report does not depend on
/// the number of threads.
inline AuditReport audit_pair(const Corpus& corpus, const PairAuditConfig& config) {
  detail::check_config(config);
  if (std::holds_alternative<NoAttachExhaustive>(config.variant))
    throw InvalidArgument("audit_pair runs the attach variants; use audit_pair_no_attach");
  if (config.n_trials < 1) throw InvalidArgument("audit needs at least one trial");
  const Subgroup& ga = corpus.subgroup(config.group_a);
  const Subgroup& gb = corpus.subgroup(config.group_b);
  if (ga.members.empty()) throw InvalidArgument("subgroup '" + ga.id + "' is empty");
  if (gb.members.empty()) throw InvalidArgument("subgroup '" + gb.id + "' is empty");

  std::unordered_map<std::string, ImageBuffer> scaled;
  if (const auto* s = std::get_if<AttachScaled>(&config.variant)) {
    for (const auto* g : {&ga, &gb})
      for (const auto& id : g->members)
        if (!scaled.count(id)) scaled.emplace(id, resize_to_height(corpus.image(id), s->height));
  }
  auto pixels = [&](const std::string& id) -> const ImageBuffer& {
    return scaled.empty() ? corpus.image(id) : scaled.at(id);
  };

  // Draw order follows group ids so that swapping a and b replays the same pairs.
  const bool a_first = ga.id <= gb.id;
  const Subgroup& first = a_first ? ga : gb;
  const Subgroup& second = a_first ? gb : ga;

  std::vector<TrialRecord> trials(config.n_trials);
  detail::parallel_for(config.n_trials, config.threads, [&](std::size_t t) {
    Rng rng(derive_seed(config.seed, t));
    const std::string& id_first = first.members[rng.uniform_index(first.members.size())];
    const std::string& id_second = second.members[rng.uniform_index(second.members.size())];
    const bool first_left = config.randomize_sides ? rng.uniform_index(2) == 0 : a_first;
    TrialRecord rec;
    rec.index = t;
    rec.image_a = a_first ? id_first : id_second;
    rec.image_b = a_first ? id_second : id_first;
    rec.a_left = first_left == a_first;
    const ImageBuffer& left = pixels(rec.a_left ? rec.image_a : rec.image_b);
    const ImageBuffer& right = pixels(rec.a_left ? rec.image_b : rec.image_a);
    const Favored left_wins =
        run_pairwise_trial(left, right, config.backend, config.grid_step, config.pad, config.align);
    rec.favored = (left_wins == Favored::A) == rec.a_left ? Favored::A : Favored::B;
    trials[t] = std::move(rec);
  });

  std::size_t wins = 0;
  for (const auto& rec : trials) wins += rec.favored == Favored::A;
  const double p = static_cast<double>(wins) / static_cast<double>(config.n_trials);
  AuditReport report = detail::finish_report(config, p, config.n_trials);
  report.wins_a = wins;
  report.ci = confidence_interval(p, config.n_trials, config.ci_level, config.ci_method);
  report.trials = std::move(trials);
  return report;
}

struct PairwiseComparison {
  double p = 0.0;
  std::size_t wins = 0;
  std::size_t ties = 0;
  std::size_t pairs = 0;
};

/// Fraction of all (a, b) pairs with a's value above b's, ties counting half.
/// Sorting plus binary search; the result is the exact ratio of integer counts.
inline PairwiseComparison compare_all_pairs(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty()) throw InvalidArgument("pairwise comparison needs non-empty groups");
  std::vector<double> sorted_b(b);
  std::sort(sorted_b.begin(), sorted_b.end());
  PairwiseComparison out;
  for (double x : a) {
    const auto lo = std::lower_bound(sorted_b.begin(), sorted_b.end(), x);
    const auto hi = std::upper_bound(lo, sorted_b.end(), x);
    out.wins += static_cast<std::size_t>(lo - sorted_b.begin());
    out.ties += static_cast<std::size_t>(hi - lo);
  }
  out.pairs = a.size() * b.size();
  out.p = static_cast<double>(2 * out.wins + out.ties) / static_cast<double>(2 * out.pairs);
  return out;
}

/// Maximum saliency score of every member of a subgroup, in member order.
inline std::vector<double> subgroup_maxima(const Corpus& corpus, const Subgroup& group,
                                           const SaliencyBackend& backend, int grid_step,
                                           unsigned threads = 1) {
  std::vector<double> out(group.members.size());
  detail::parallel_for(out.size(), threads, [&](std::size_t i) {
    out[i] = image_saliency(corpus, group.members[i], backend, grid_step).max_score();
  });
  return out;
}

/// Exhaustive variant: each image's maximum score is computed on its own and
/// every cross-group pair is compared. No sampling, so the interval collapses
/// to the point estimate.
inline AuditReport audit_pair_no_attach(const Corpus& corpus, const PairAuditConfig& config) {
  detail::check_config(config);
  const Subgroup& ga = corpus.subgroup(config.group_a);
  const Subgroup& gb = corpus.subgroup(config.group_b);
  if (ga.members.empty()) throw InvalidArgument("subgroup '" + ga.id + "' is empty");
  if (gb.members.empty()) throw InvalidArgument("subgroup '" + gb.id + "' is empty");
  const auto cmp = compare_all_pairs(subgroup_maxima(corpus, ga, config.backend, config.grid_step, config.threads),
                                     subgroup_maxima(corpus, gb, config.backend, config.grid_step, config.threads));
  AuditReport report = detail::finish_report(config, cmp.p, cmp.pairs);
  report.variant = "noattach";
  report.wins_a = cmp.wins;
  report.ties = cmp.ties;
  report.ci = {cmp.p, cmp.p};
  return report;
}

/// Dispatches on the configured variant.
inline AuditReport run_audit(const Corpus& corpus, const PairAuditConfig& config) {
  if (std::holds_alternative<NoAttachExhaustive>(config.variant))
    return audit_pair_no_attach(corpus, config);
  return audit_pair(corpus, config);
}

// ---- saliency distribution statistics -------------------------------------------

struct SubgroupSaliencyStats {
  std::string subgroup;
  std::vector<std::string> image_ids;
  std::vector<double> maxima;
  std::vector<double> medians;
  Ecdf max_ecdf;
  Ecdf median_ecdf;
};

/// Per-image maximum and median cell score over a subgroup, with their ECDFs.
inline SubgroupSaliencyStats subgroup_saliency_stats(const Corpus& corpus, const std::string& subgroup,
                                                     const SaliencyBackend& backend,
                                                     int grid_step = kDefaultGridStep,
                                                     unsigned threads = 1) {
  const Subgroup& g = corpus.subgroup(subgroup);
  if (g.members.empty()) throw InvalidArgument("subgroup '" + g.id + "' is empty");
  std::vector<double> maxima(g.members.size()), medians(g.members.size());
  detail::parallel_for(g.members.size(), threads, [&](std::size_t i) {
    const SaliencyMap map = image_saliency(corpus, g.members[i], backend, grid_step);
    maxima[i] = map.max_score();
    medians[i] = median_of({map.scores().begin(), map.scores().end()});
  });
  return {g.id, g.members, maxima, medians, Ecdf(maxima), Ecdf(medians)};
}

// ---- gaze analysis ----------------------------------------------------------------

struct GazeAnalysisConfig {
  double min_hw_ratio = 1.25;  // height / width
  int min_region_count = 2;
  std::size_t sample_size = 100;  // per group
  double region_threshold = kDefaultRegionThreshold;
  std::vector<std::string> groups;  // empty: every declared subgroup
  std::uint64_t seed = 0;
  int grid_step = kDefaultGridStep;
};

struct GazeImageResult {
  std::string image_id;
  ScoredPoint focal;
  std::optional<PixelBox> head_box;
  bool off_head = false;
  std::vector<SalientRegion> regions;
};

struct GazeGroupResult {
  std::string group;
  std::size_t eligible_n = 0;  // passed both filters
  std::size_t sampled_n = 0;
  std::size_t off_head_count = 0;
  std::vector<std::string> off_head_ids;
  std::vector<std::string> missing_head_box_ids;  // sampled but not evaluated
  std::vector<GazeImageResult> images;            // evaluated images, sample order
};

struct GazeReport {
  std::vector<GazeGroupResult> groups;
};

/// Keeps tall images (height / width >= min_hw_ratio) whose saliency map has
/// at least min_region_count salient regions, samples up to sample_size per
/// group without replacement, and flags images whose argmax point falls
/// outside the manifest head box.
inline GazeReport gaze_analysis(const Corpus& corpus, const GazeAnalysisConfig& config,
                                const SaliencyBackend& backend, unsigned threads = 1) {
  if (!(config.min_hw_ratio > 0.0)) throw InvalidArgument("min_hw_ratio must be positive");
  if (config.min_region_count < 0) throw InvalidArgument("min_region_count must be non-negative");
  std::vector<std::string> group_ids = config.groups;
  if (group_ids.empty())
    for (const auto& g : corpus.manifest().subgroups) group_ids.push_back(g.id);

  GazeReport report;
  for (std::size_t gi = 0; gi < group_ids.size(); ++gi) {
    const Subgroup& g = corpus.subgroup(group_ids[gi]);
    GazeGroupResult result;
    result.group = g.id;

    std::vector<std::string> tall;
    for (const auto& id : g.members) {
      const ImageBuffer& img = corpus.image(id);
      if (img.height() >= config.min_hw_ratio * img.width()) tall.push_back(id);
    }
    std::vector<std::optional<GazeImageResult>> analysed(tall.size());
    detail::parallel_for(tall.size(), threads, [&](std::size_t i) {
      const SaliencyMap map = image_saliency(corpus, tall[i], backend, config.grid_step);
      auto regions = segment_salient_regions(map, config.region_threshold);
      if (static_cast<int>(regions.size()) < config.min_region_count) return;
      GazeImageResult r;
      r.image_id = tall[i];
      r.focal = max_salient_point(map);
      r.head_box = corpus.entry(tall[i]).head_box;
      r.off_head = r.head_box && !r.head_box->contains(r.focal.point.x, r.focal.point.y);
      r.regions = std::move(regions);
      analysed[i] = std::move(r);
    });
    std::vector<std::string> eligible;
    std::unordered_map<std::string, GazeImageResult*> by_id;
    for (auto& a : analysed)
      if (a) {
        eligible.push_back(a->image_id);
        by_id[a->image_id] = &*a;
      }
    result.eligible_n = eligible.size();
    if (!eligible.empty()) {
      const auto sample = sample_uniform(eligible, derive_seed(config.seed, gi),
                                         std::min(config.sample_size, eligible.size()), false);
      result.sampled_n = sample.size();
      for (const auto& id : sample) {
        GazeImageResult& r = *by_id.at(id);
        if (!r.head_box) {
          result.missing_head_box_ids.push_back(id);
          continue;
        }
        if (r.off_head) {
          ++result.off_head_count;
          result.off_head_ids.push_back(id);
        }
        result.images.push_back(std::move(r));
      }
    }
    report.groups.push_back(std::move(result));
  }
  return report;
}

}  // namespace faircrop
