// faircrop command-line front end.
//
// Exit codes: 0 success, 2 usage or I/O error, 3 audit raised a disparate
// impact flag.

#include <CLI11.hpp>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <csignal>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "faircrop/audit.hpp"
#include "faircrop/corpus.hpp"
#include "faircrop/crop.hpp"
#include "faircrop/image_io.hpp"
#include "faircrop/pfm.hpp"
#include "faircrop/report.hpp"
#include "faircrop/saliency.hpp"
#include "faircrop/salient_points.hpp"
#include "faircrop/service.hpp"
#include "faircrop/synthetic.hpp"

namespace fs = std::filesystem;
using namespace faircrop;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 2;
constexpr int kExitFlagged = 3;

struct Globals {
  std::uint64_t seed = 0;
  std::string backend = "spectral";
  int grid_step = kDefaultGridStep;
  unsigned threads = 1;
  bool stable_output = false;
};

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// The timestamp is the only nondeterministic field and is always first.
ordered_json with_header(const Globals& g, ordered_json body) {
  if (g.stable_output) return body;
  ordered_json out;
  out["generated_at"] = utc_timestamp();
  for (auto& [k, v] : body.items()) out[k] = v;
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") std::cout << text;
  else write_file_atomic(path, text);
}

void write_json(const std::string& path, const ordered_json& j) { write_text(path, j.dump(2) + "\n"); }

// Piecewise-linear blue-cyan-yellow-red ramp.
Rgb heat_color(double t) {
  static constexpr std::array<std::array<double, 3>, 5> kStops{
      {{0, 0, 128}, {0, 128, 255}, {0, 255, 255}, {255, 255, 0}, {255, 0, 0}}};
  t = std::clamp(t, 0.0, 1.0) * (kStops.size() - 1);
  const auto k = std::min<std::size_t>(static_cast<std::size_t>(t), kStops.size() - 2);
  const double f = t - k;
  auto mix = [&](int c) {
    return static_cast<std::uint8_t>(std::lround(kStops[k][c] + f * (kStops[k + 1][c] - kStops[k][c])));
  };
  return {mix(0), mix(1), mix(2)};
}

ImageBuffer heatmap_overlay(const ImageBuffer& image, const SaliencyMap& map, double alpha = 0.55) {
  const double peak = map.max_score();
  std::vector<double> grid(map.scores().begin(), map.scores().end());
  ImageBuffer out = image;
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x) {
      const double fx = (x + 0.5) * map.grid_w() / image.width();
      const double fy = (y + 0.5) * map.grid_h() / image.height();
      const double s = peak > 0 ? detail::bilinear_sample(grid, map.grid_w(), map.grid_h(), fx, fy) / peak : 0.0;
      const Rgb h = heat_color(s);
      const Rgb p = image.at(x, y);
      auto blend = [&](std::uint8_t a, std::uint8_t b) {
        return static_cast<std::uint8_t>(std::lround((1 - alpha) * a + alpha * b));
      };
      out.set(x, y, {blend(p.r, h.r), blend(p.g, h.g), blend(p.b, h.b)});
    }
  return out;
}

int cmd_saliency(const Globals& g, const std::string& image_path, const std::string& out,
                 const std::string& heatmap) {
  const ImageBuffer image = decode_image(image_path);
  const SaliencyMap map = compute_saliency(image, parse_backend(g.backend), g.grid_step);
  write_pfm(out, to_float_grid(map));
  if (!heatmap.empty()) encode_image(heatmap_overlay(image, map), heatmap);
  const ScoredPoint top = max_salient_point(map);
  std::cout << "grid " << map.grid_w() << "x" << map.grid_h() << ", max " << format_number(top.score)
            << " at (" << top.point.x << "," << top.point.y << ")\n";
  return kExitOk;
}

int cmd_crop(const Globals& g, const std::string& image_path, const std::vector<std::string>& ar_texts,
             const std::string& strategy_text, const std::string& out_dir) {
  std::vector<AspectRatio> ars;
  for (const auto& t : ar_texts) ars.push_back(AspectRatio::parse(t));
  const CropStrategy strategy = parse_strategy(strategy_text, g.seed);
  const SaliencyBackend backend = parse_backend(g.backend);
  const ImageBuffer image = decode_image(image_path);
  const PipelineResult result = crop_pipeline(image, backend, strategy, ars, {g.grid_step});

  fs::create_directories(out_dir);
  const std::string stem = fs::path(image_path).stem().string();
  ordered_json crops = ordered_json::array();
  for (std::size_t k = 0; k < ars.size(); ++k) {
    const std::string name = stem + "_" + std::to_string(ars[k].num) + "x" + std::to_string(ars[k].den) + ".png";
    encode_image(render_crop(image, result.crops[k]), fs::path(out_dir) / name, ImageFormat::Png);
    crops.push_back({{"ar", ars[k].to_string()}, {"spec", to_json(result.crops[k])}, {"file", name}});
  }
  ordered_json log;
  log["image"] = image_path;
  log["width"] = image.width();
  log["height"] = image.height();
  log["backend"] = std::holds_alternative<PadNoCrop>(strategy) ? ordered_json(nullptr) : ordered_json(backend_name(backend));
  log["grid_step"] = g.grid_step;
  log["strategy"] = strategy_name(strategy);
  log["symmetric"] = result.symmetric;
  log["focal"] = result.focal ? to_json(*result.focal) : ordered_json(nullptr);
  log["crops"] = crops;
  write_json((fs::path(out_dir) / "crop_log.json").string(), with_header(g, log));
  std::cout << "wrote " << ars.size() << " crop(s) to " << out_dir << "\n";
  return kExitOk;
}

struct AuditArgs {
  std::string manifest;
  std::vector<std::string> pair;
  std::size_t trials = 10000;
  std::string variant = "attach";
  double epsilon = kDefaultEpsilon;
  double ci_level = 0.95;
  std::string ci_method = "normal";
  std::string align = "top";
  bool fixed_sides = false;
  std::string report;
  std::string trial_log;
  std::string plot_data;
};

int cmd_audit(const Globals& g, const AuditArgs& a) {
  PairAuditConfig config;
  config.group_a = a.pair.at(0);
  config.group_b = a.pair.at(1);
  config.n_trials = a.trials;
  config.seed = g.seed;
  config.variant = parse_variant(a.variant);
  config.backend = parse_backend(g.backend);
  config.grid_step = g.grid_step;
  config.epsilon = a.epsilon;
  config.ci_level = a.ci_level;
  config.ci_method = a.ci_method == "wilson" ? CiMethod::Wilson : CiMethod::Normal;
  config.align = a.align == "center" ? VerticalAlign::Center
                 : a.align == "bottom" ? VerticalAlign::Bottom
                                       : VerticalAlign::Top;
  config.randomize_sides = !a.fixed_sides;
  config.threads = g.threads;

  const Corpus corpus = Corpus::load(load_manifest(a.manifest));
  const AuditReport report = run_audit(corpus, config);
  if (!a.trial_log.empty()) write_text(a.trial_log, trial_log_csv(report));
  if (!a.plot_data.empty()) write_text(a.plot_data, favored_bars_csv({report}));
  write_json(a.report, with_header(g, audit_report_json(report, config, a.trial_log)));

  std::cerr << report.group_a << " vs " << report.group_b << " (" << report.variant << "): p_favored_a="
            << format_number(report.p_favored_a) << " ci=[" << format_number(report.ci.lo) << ", "
            << format_number(report.ci.hi) << "] n=" << report.n
            << " parity_ratio=" << format_number(report.parity_ratio)
            << (report.disparate_impact ? " DISPARATE IMPACT" : "") << "\n";
  return report.disparate_impact ? kExitFlagged : kExitOk;
}

int cmd_regions(const Globals& g, const std::string& image_path, double threshold, const std::string& out) {
  const ImageBuffer image = decode_image(image_path);
  const SaliencyMap map = compute_saliency(image, parse_backend(g.backend), g.grid_step);
  const auto regions = segment_salient_regions(map, threshold);
  ordered_json j;
  j["image"] = image_path;
  j["grid_w"] = map.grid_w();
  j["grid_h"] = map.grid_h();
  j["threshold"] = threshold;
  j["region_count"] = regions.size();
  j["regions"] = to_json(regions);
  write_json(out, with_header(g, j));
  return kExitOk;
}

int cmd_stats(const Globals& g, const std::string& manifest, const std::string& subgroup,
              const std::string& statistic, const std::string& out, const std::string& compare) {
  const Corpus corpus = Corpus::load(load_manifest(manifest));
  const SaliencyBackend backend = parse_backend(g.backend);
  const auto stats = subgroup_saliency_stats(corpus, subgroup, backend, g.grid_step, g.threads);
  const Ecdf& ecdf = statistic == "median" ? stats.median_ecdf : stats.max_ecdf;
  write_text(out, ecdf_csv(ecdf));
  if (!compare.empty()) {
    const auto other = subgroup_saliency_stats(corpus, compare, backend, g.grid_step, g.threads);
    const Ecdf& other_ecdf = statistic == "median" ? other.median_ecdf : other.max_ecdf;
    std::cerr << "ecdf gap (" << statistic << ") " << subgroup << " vs " << compare << ": "
              << format_number(ecdf_gap(ecdf, other_ecdf)) << "\n";
  }
  return kExitOk;
}

GazeAnalysisConfig read_gaze_config(const std::string& path, const Globals& g) {
  GazeAnalysisConfig config;
  config.seed = g.seed;
  config.grid_step = g.grid_step;
  if (path.empty()) return config;
  const auto j = nlohmann::json::parse(detail::read_file(path), nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw FormatError(path + ": gaze config must be a JSON object");
  try {
    config.min_hw_ratio = j.value("min_hw_ratio", config.min_hw_ratio);
    config.min_region_count = j.value("min_region_count", config.min_region_count);
    config.sample_size = j.value("sample_size", config.sample_size);
    config.region_threshold = j.value("region_threshold", config.region_threshold);
    config.groups = j.value("groups", config.groups);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
  return config;
}

int cmd_gaze(const Globals& g, const std::string& manifest, const std::string& config_path,
             const std::string& out) {
  const GazeAnalysisConfig config = read_gaze_config(config_path, g);
  const Corpus corpus = Corpus::load(load_manifest(manifest));
  const GazeReport report = gaze_analysis(corpus, config, parse_backend(g.backend), g.threads);
  write_json(out, with_header(g, gaze_report_json(report, config)));
  for (const auto& r : report.groups)
    std::cerr << r.group << ": " << r.off_head_count << " of " << r.sampled_n << " off head ("
              << r.eligible_n << " eligible)\n";
  return kExitOk;
}

httplib::Server* g_server = nullptr;

void stop_server(int) {
  if (g_server) g_server->stop();
}

int cmd_serve(const Globals& g, const std::string& addr, const std::string& corpus_dir,
              std::size_t max_upload_mb, long ttl_seconds, int max_k) {
  const auto colon = addr.rfind(':');
  if (colon == std::string::npos) throw InvalidArgument("--addr must be host:port");
  const std::string host = addr.substr(0, colon);
  const int port = std::stoi(addr.substr(colon + 1));

  ServiceConfig config;
  config.backend = parse_backend(g.backend);
  config.grid_step = g.grid_step;
  config.max_upload_bytes = max_upload_mb * 1024 * 1024;
  config.ttl = std::chrono::seconds(ttl_seconds);
  config.max_k = max_k;
  config.default_k = std::min(config.default_k, max_k);
  CropService service(config);

  if (!corpus_dir.empty()) {
    std::vector<fs::path> files;
    for (const auto& f : fs::directory_iterator(corpus_dir)) {
      auto ext = f.path().extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
      if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") files.push_back(f.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) service.add_image(decode_image(f), f.stem().string(), true);
    std::cerr << "preloaded " << files.size() << " image(s) from " << corpus_dir << "\n";
  }

  httplib::Server server;
  service.bind(server);
  g_server = &server;
  std::signal(SIGINT, stop_server);
  std::signal(SIGTERM, stop_server);
  if (!server.bind_to_port(host, port)) throw IoError("cannot bind " + addr);
  std::cerr << "listening on " << addr << "\n";
  server.listen_after_bind();
  return kExitOk;
}

struct SynthArgs {
  std::string out_dir;
  std::vector<std::string> groups;
  std::size_t n = 20;
  int background = 20;
  int width = 96;
  int height = 144;
  int noise = 0;
};

// id:luma or id:luma:patch_luma
SyntheticGroup parse_group(const std::string& text) {
  std::vector<std::string> parts;
  std::size_t pos = 0;
  while (true) {
    const auto c = text.find(':', pos);
    parts.push_back(text.substr(pos, c == std::string::npos ? std::string::npos : c - pos));
    if (c == std::string::npos) break;
    pos = c + 1;
  }
  if (parts.size() < 2 || parts.size() > 3 || parts[0].empty())
    throw InvalidArgument("--group must be id:luma[:patch_luma], got '" + text + "'");
  auto luma = [&](const std::string& s) {
    if (s.empty() || s.size() > 3 || s.find_first_not_of("0123456789") != std::string::npos)
      throw InvalidArgument("bad luma in --group '" + text + "'");
    return std::stoi(s);
  };
  SyntheticGroup g{parts[0], luma(parts[1]), std::nullopt};
  if (parts.size() == 3) g.torso_patch_luma = luma(parts[2]);
  return g;
}

int cmd_synth(const Globals& g, const SynthArgs& a) {
  SyntheticParams params;
  for (const auto& t : a.groups) params.groups.push_back(parse_group(t));
  params.n_per_group = a.n;
  params.background_luma = a.background;
  params.width = a.width;
  params.height = a.height;
  params.noise = a.noise;
  params.seed = g.seed;
  const auto path = write_corpus(synthetic_corpus(params), a.out_dir);
  std::cout << path.string() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Saliency cropping and crop-fairness auditing"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--seed", g.seed, "Master seed for every random draw");
  app.add_option("--backend", g.backend, "spectral | contrast | external:<map.pfm>");
  app.add_option("--grid-step", g.grid_step, "Saliency grid step in pixels")->check(CLI::PositiveNumber);
  app.add_option("--threads", g.threads, "Worker threads (results do not depend on this)")->check(CLI::PositiveNumber);
  app.add_flag("--stable-output", g.stable_output, "Omit the timestamp from reports");

  std::function<int()> run;

  auto* sal = app.add_subcommand("saliency", "Compute a saliency map and write it as PFM");
  std::string sal_image, sal_out, sal_heat;
  sal->add_option("image", sal_image)->required()->check(CLI::ExistingFile);
  sal->add_option("--out", sal_out, "Output PFM")->required();
  sal->add_option("--heatmap", sal_heat, "Optional false-color overlay image");
  sal->callback([&] { run = [&] { return cmd_saliency(g, sal_image, sal_out, sal_heat); }; });

  auto* crop = app.add_subcommand("crop", "Crop an image to one or more aspect ratios");
  std::string crop_image, crop_strategy = "argmax", crop_out;
  std::vector<std::string> crop_ars;
  crop->add_option("image", crop_image)->required()->check(CLI::ExistingFile);
  crop->add_option("--ar", crop_ars, "Aspect ratio W:H (repeatable)")->required();
  crop->add_option("--strategy", crop_strategy,
                   "argmax | sample[:seed] | average | topk:k | focal:x,y | pad[:r,g,b]");
  crop->add_option("--out-dir", crop_out)->required();
  crop->callback([&] { run = [&] { return cmd_crop(g, crop_image, crop_ars, crop_strategy, crop_out); }; });

  auto* audit = app.add_subcommand("audit", "Pairwise demographic-parity audit of two subgroups");
  AuditArgs aa;
  audit->add_option("--manifest", aa.manifest)->required()->check(CLI::ExistingFile);
  audit->add_option("--pair", aa.pair, "Subgroup ids A B")->required()->expected(2);
  audit->add_option("--trials", aa.trials)->check(CLI::PositiveNumber);
  audit->add_option("--variant", aa.variant, "attach | scaled:<height> | noattach");
  audit->add_option("--epsilon", aa.epsilon)->check(CLI::Range(0.0, 0.999999));
  audit->add_option("--ci-level", aa.ci_level)->check(CLI::Range(0.5, 0.999999));
  audit->add_option("--ci-method", aa.ci_method)->check(CLI::IsMember({"normal", "wilson"}));
  audit->add_option("--align", aa.align)->check(CLI::IsMember({"top", "center", "bottom"}));
  audit->add_flag("--fixed-sides", aa.fixed_sides, "Always put A on the left");
  audit->add_option("--report", aa.report, "Report JSON (default stdout)");
  audit->add_option("--trial-log", aa.trial_log, "Per-trial CSV");
  audit->add_option("--plot-data", aa.plot_data, "Favored-probability bar data CSV");
  audit->callback([&] { run = [&] { return cmd_audit(g, aa); }; });

  auto* regions = app.add_subcommand("regions", "List salient regions of an image");
  std::string reg_image, reg_out;
  double reg_threshold = kDefaultRegionThreshold;
  regions->add_option("image", reg_image)->required()->check(CLI::ExistingFile);
  regions->add_option("--threshold", reg_threshold, "Fraction of the maximum score")->check(CLI::Range(1e-9, 1.0));
  regions->add_option("--out", reg_out, "Output JSON (default stdout)");
  regions->callback([&] { run = [&] { return cmd_regions(g, reg_image, reg_threshold, reg_out); }; });

  auto* stats = app.add_subcommand("stats", "ECDF of per-image max or median saliency");
  std::string st_manifest, st_group, st_out, st_stat = "max", st_compare;
  stats->add_option("--manifest", st_manifest)->required()->check(CLI::ExistingFile);
  stats->add_option("--subgroup", st_group)->required();
  stats->add_option("--statistic", st_stat)->check(CLI::IsMember({"max", "median"}));
  stats->add_option("--out", st_out, "CSV with columns value,ecdf (default stdout)");
  stats->add_option("--compare", st_compare, "Second subgroup; prints the ECDF gap");
  stats->callback([&] { run = [&] { return cmd_stats(g, st_manifest, st_group, st_stat, st_out, st_compare); }; });

  auto* gaze = app.add_subcommand("gaze", "Check whether the argmax point falls on the head");
  std::string gz_manifest, gz_config, gz_out;
  gaze->add_option("--manifest", gz_manifest)->required()->check(CLI::ExistingFile);
  gaze->add_option("--config", gz_config, "JSON with min_hw_ratio, min_region_count, sample_size, ...")
      ->check(CLI::ExistingFile);
  gaze->add_option("--report", gz_out, "Output JSON (default stdout)");
  gaze->callback([&] { run = [&] { return cmd_gaze(g, gz_manifest, gz_config, gz_out); }; });

  auto* serve = app.add_subcommand("serve", "Run the crop service");
  std::string sv_addr = "127.0.0.1:8080", sv_dir;
  std::size_t sv_mb = 20;
  long sv_ttl = 3600;
  int sv_max_k = 10;
  serve->add_option("--addr", sv_addr, "host:port")->envname("FAIRCROP_ADDR");
  serve->add_option("--corpus-dir", sv_dir, "Preload images from this directory")->check(CLI::ExistingDirectory);
  serve->add_option("--max-upload-mb", sv_mb)->envname("FAIRCROP_MAX_UPLOAD_MB")->check(CLI::PositiveNumber);
  serve->add_option("--ttl", sv_ttl, "Session lifetime in seconds")->envname("FAIRCROP_TTL")->check(CLI::PositiveNumber);
  serve->add_option("--max-k", sv_max_k)->check(CLI::Range(1, 100));
  serve->callback([&] { run = [&] { return cmd_serve(g, sv_addr, sv_dir, sv_mb, sv_ttl, sv_max_k); }; });

  auto* synth = app.add_subcommand("synth", "Write a synthetic figure corpus");
  SynthArgs sa;
  synth->add_option("--out-dir", sa.out_dir)->required();
  synth->add_option("--group", sa.groups, "id:luma[:patch_luma] (repeatable)")->required();
  synth->add_option("--n", sa.n, "Images per group")->check(CLI::PositiveNumber);
  synth->add_option("--background", sa.background)->check(CLI::Range(0, 255));
  synth->add_option("--width", sa.width)->check(CLI::Range(16, 4096));
  synth->add_option("--height", sa.height)->check(CLI::Range(16, 4096));
  synth->add_option("--noise", sa.noise)->check(CLI::Range(0, 255));
  synth->callback([&] { run = [&] { return cmd_synth(g, sa); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitError;
  }

  try {
    return run();
  } catch (const std::exception& e) {
    std::cerr << "faircrop: " << e.what() << "\n";
    return kExitError;
  }
}
