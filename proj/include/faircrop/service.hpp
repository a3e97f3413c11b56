#pragma once

// HTTP service for human-in-the-loop cropping.
//
//   POST /images                     body: PNG/JPEG bytes      -> 201 {"image_id"}
//   GET  /images/{id}/candidates?k=K&ars=1:1,16:9               -> 200 candidates JSON
//   POST /images/{id}/selection      body: {"x": X, "y": Y}     -> 204
//   GET  /images/{id}/crop?ar=W:H&format=json|png               -> 200 rect JSON or PNG
//   GET  /images/{id}/saliency                                  -> 200 score grid JSON
//
// Sessions live in memory and expire `ttl` after upload. Saliency is computed
// once per image, on the first request that needs it.

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "faircrop/crop.hpp"
#include "faircrop/image_io.hpp"
#include "faircrop/report.hpp"
#include "faircrop/saliency.hpp"
#include "faircrop/salient_points.hpp"

namespace faircrop {

struct ServiceConfig {
  std::size_t max_upload_bytes = 20 * 1024 * 1024;
  std::chrono::seconds ttl{3600};
  SaliencyBackend backend = SpectralResidual{};
  int grid_step = kDefaultGridStep;
  double symmetry_tol = kDefaultSymmetryTolerance;
  int default_k = 3;
  int max_k = 10;
  std::vector<AspectRatio> default_ars{{1, 1}, {16, 9}};
  std::function<std::chrono::steady_clock::time_point()> now = [] {
    return std::chrono::steady_clock::now();
  };
};

struct HttpResponse {
  int status = 200;
  std::string content_type;
  std::string body;
};

class CropService {
 public:
  explicit CropService(ServiceConfig config = {}) : config_(std::move(config)) {
    if (config_.max_k < 1 || config_.default_k < 1 || config_.default_k > config_.max_k)
      throw InvalidArgument("service k limits must satisfy 1 <= default_k <= max_k");
  }

  const ServiceConfig& config() const noexcept { return config_; }

  /// Register an already decoded image. Pinned sessions never expire.
  std::string add_image(ImageBuffer image, std::optional<std::string> id = std::nullopt,
                        bool pinned = false) {
    auto session = std::make_shared<Session>(std::move(image), config_.now(), pinned);
    std::unique_lock lock(sessions_mutex_);
    std::string key = id ? *id : "img-" + std::to_string(++next_id_);
    sessions_[key] = std::move(session);
    return key;
  }

  HttpResponse upload(std::string_view body) {
    evict_expired();
    if (body.size() > config_.max_upload_bytes) return error(413, "image exceeds the upload size limit");
    try {
      const std::string id = add_image(decode_image_bytes(body));
      return json_response(201, {{"image_id", id}});
    } catch (const Error& e) {
      return error(400, e.what());
    }
  }

  HttpResponse candidates(const std::string& id, const std::optional<std::string>& k_param,
                          const std::optional<std::string>& ars_param) {
    const auto session = find(id);
    if (!session) return not_found(id);
    int k = config_.default_k;
    if (k_param) {
      const auto parsed = parse_int(*k_param);
      if (!parsed || *parsed < 1 || *parsed > config_.max_k)
        return error(400, "k must be an integer in [1, " + std::to_string(config_.max_k) + "]");
      k = *parsed;
    }
    std::vector<AspectRatio> ars = config_.default_ars;
    try {
      if (ars_param) ars = parse_ar_list(*ars_param);
      const SaliencyMap& map = saliency(*session);
      const int w = map.source_w();
      const int h = map.source_h();
      const bool symmetric = is_horizontally_symmetric(map, config_.symmetry_tol);
      std::vector<ScoredPoint> points;
      if (symmetric) {
        const Point center{w / 2, h / 2};
        points.push_back({center, map.at(map.cell_at_pixel(center))});
      } else {
        points = top_k_salient_points(map, k, default_min_separation(map));
        if (points.empty()) points.push_back(max_salient_point(map));
      }
      ordered_json list = ordered_json::array();
      for (const auto& c : points) {
        ordered_json previews = ordered_json::array();
        for (const auto& ar : ars) {
          const CropRect rect = symmetric ? center_crop(w, h, ar) : crop_around_focal(w, h, c.point, ar);
          previews.push_back({{"ar", ar.to_string()}, {"rect", rect_json(rect)}});
        }
        list.push_back({{"point", to_json(c.point)}, {"score", c.score}, {"previews", previews}});
      }
      return json_response(200, {{"image_id", id}, {"symmetric", symmetric}, {"candidates", list}});
    } catch (const InvalidArgument& e) {
      return error(400, e.what());
    } catch (const Error& e) {
      return error(500, e.what());
    }
  }

  HttpResponse select(const std::string& id, std::string_view body) {
    const auto session = find(id);
    if (!session) return not_found(id);
    nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("x") || !j.contains("y") ||
        !j["x"].is_number_integer() || !j["y"].is_number_integer())
      return error(400, "body must be {\"x\": <int>, \"y\": <int>}");
    const auto x = j["x"].get<long long>();
    const auto y = j["y"].get<long long>();
    if (x < 0 || y < 0 || x >= session->image.width() || y >= session->image.height())
      return error(422, "point lies outside the image");
    std::lock_guard lock(session->mutex);
    session->selection = Point{static_cast<int>(x), static_cast<int>(y)};
    return {204, "", ""};
  }

  HttpResponse crop(const std::string& id, const std::optional<std::string>& ar_param,
                    const std::optional<std::string>& format) {
    const auto session = find(id);
    if (!session) return not_found(id);
    if (!ar_param) return error(400, "missing ar parameter");
    const std::string fmt = format.value_or("json");
    if (fmt != "json" && fmt != "png") return error(400, "format must be json or png");
    try {
      const AspectRatio ar = AspectRatio::parse(*ar_param);
      std::optional<Point> selection;
      {
        std::lock_guard lock(session->mutex);
        selection = session->selection;
      }
      const int w = session->image.width();
      const int h = session->image.height();
      CropRect rect;
      std::optional<Point> focal;
      std::string source;
      if (selection) {
        rect = crop_around_focal(w, h, *selection, ar);
        focal = selection;
        source = "selection";
      } else {
        // Same decision as the batch pipeline under argmax, symmetry shortcut included.
        const auto result = crops_from_map(saliency(*session), Argmax{}, {ar}, config_.symmetry_tol);
        rect = std::get<CropRect>(result.crops.front());
        focal = result.focal;
        source = result.symmetric ? "center" : "argmax";
      }
      if (fmt == "png")
        return {200, "image/png", encode_image_bytes(render_crop(session->image, rect), ImageFormat::Png)};
      return json_response(200, {{"image_id", id},
                                 {"ar", ar.to_string()},
                                 {"rect", rect_json(rect)},
                                 {"focal", focal ? to_json(*focal) : ordered_json(nullptr)},
                                 {"source", source}});
    } catch (const InvalidArgument& e) {
      return error(400, e.what());
    } catch (const Error& e) {
      return error(500, e.what());
    }
  }

  HttpResponse saliency_grid(const std::string& id) {
    const auto session = find(id);
    if (!session) return not_found(id);
    try {
      const SaliencyMap& map = saliency(*session);
      return json_response(200, {{"image_id", id},
                                 {"grid_w", map.grid_w()},
                                 {"grid_h", map.grid_h()},
                                 {"source_w", map.source_w()},
                                 {"source_h", map.source_h()},
                                 {"scores", std::vector<double>(map.scores().begin(), map.scores().end())}});
    } catch (const Error& e) {
      return error(500, e.what());
    }
  }

  /// Drop expired, unpinned sessions; returns how many were removed.
  std::size_t evict_expired() {
    const auto now = config_.now();
    std::unique_lock lock(sessions_mutex_);
    return std::erase_if(sessions_, [&](const auto& kv) {
      return !kv.second->pinned && now - kv.second->created_at >= config_.ttl;
    });
  }

  std::size_t session_count() const {
    std::shared_lock lock(sessions_mutex_);
    return sessions_.size();
  }

  /// Install the routes on an httplib server.
  void bind(httplib::Server& server) {
    server.set_payload_max_length(config_.max_upload_bytes + 1);
    auto send = [](httplib::Response& res, const HttpResponse& r) {
      res.status = r.status;
      if (!r.content_type.empty()) res.set_content(r.body, r.content_type.c_str());
    };
    auto param = [](const httplib::Request& req, const char* name) -> std::optional<std::string> {
      if (!req.has_param(name)) return std::nullopt;
      return req.get_param_value(name);
    };
    server.Post("/images", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, upload(req.body));
    });
    server.Get(R"(/images/([^/]+)/candidates)", [=, this](const httplib::Request& req, httplib::Response& res) {
      send(res, candidates(req.matches[1], param(req, "k"), param(req, "ars")));
    });
    server.Post(R"(/images/([^/]+)/selection)", [=, this](const httplib::Request& req, httplib::Response& res) {
      send(res, select(req.matches[1], req.body));
    });
    server.Get(R"(/images/([^/]+)/crop)", [=, this](const httplib::Request& req, httplib::Response& res) {
      send(res, crop(req.matches[1], param(req, "ar"), param(req, "format")));
    });
    server.Get(R"(/images/([^/]+)/saliency)", [=, this](const httplib::Request& req, httplib::Response& res) {
      send(res, saliency_grid(req.matches[1]));
    });
  }

 private:
  struct Session {
    Session(ImageBuffer img, std::chrono::steady_clock::time_point t, bool pin)
        : image(std::move(img)), created_at(t), pinned(pin) {}
    const ImageBuffer image;
    const std::chrono::steady_clock::time_point created_at;
    const bool pinned;
    std::once_flag saliency_once;
    std::optional<SaliencyMap> map;  // written once under saliency_once
    std::mutex mutex;                // guards selection
    std::optional<Point> selection;
  };

  std::shared_ptr<Session> find(const std::string& id) {
    evict_expired();
    std::shared_lock lock(sessions_mutex_);
    const auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
  }

  const SaliencyMap& saliency(Session& s) {
    std::call_once(s.saliency_once, [&] {
      s.map.emplace(compute_saliency(s.image, config_.backend, config_.grid_step));
    });
    return *s.map;
  }

  static std::optional<int> parse_int(const std::string& text) {
    if (text.empty() || text.size() > 9 || text.find_first_not_of("0123456789") != std::string::npos)
      return std::nullopt;
    return std::stoi(text);
  }

  static std::vector<AspectRatio> parse_ar_list(const std::string& text) {
    std::vector<AspectRatio> out;
    std::size_t pos = 0;
    while (true) {
      const auto comma = text.find(',', pos);
      out.push_back(AspectRatio::parse(text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos)));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    return out;
  }

  static ordered_json rect_json(const CropRect& r) {
    return {{"x", r.x}, {"y", r.y}, {"w", r.w}, {"h", r.h}};
  }

  static HttpResponse json_response(int status, const ordered_json& body) {
    return {status, "application/json", body.dump()};
  }

  static HttpResponse error(int status, const std::string& message) {
    return json_response(status, {{"error", message}});
  }

  static HttpResponse not_found(const std::string& id) {
    return error(404, "unknown image id '" + id + "'");
  }

  ServiceConfig config_;
  mutable std::shared_mutex sessions_mutex_;
  std::unordered_map<std::string, std::shared_ptr<Session>> sessions_;
  std::size_t next_id_ = 0;  // guarded by sessions_mutex_
};

}  // namespace faircrop
