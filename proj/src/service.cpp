// Copyright 2026 The intrinsic-compose Authors.
// SPDX-License-Identifier: Apache-2.0

#include "icomp/service.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "icomp/error.hpp"
#include "icomp/io.hpp"
#include "icomp/scene_io.hpp"
#include "icomp/serialize.hpp"

namespace icomp::service {

namespace {

using nlohmann::json;

Reply json_reply(int status, const json& body) { return {status, "application/json", body.dump()}; }

Reply error_reply(int status, const std::string& message, const std::string& field = {}) {
  json body{{"error", message}};
  if (!field.empty()) body["field"] = field;
  return json_reply(status, body);
}

json describe(const SceneHandle& handle) {
  return {{"id", handle.id},
          {"dimensions", {{"height", handle.scene->height()}, {"width", handle.scene->width()}}},
          {"fitted_light", light_to_json(handle.fit.light)},
          {"residual", handle.fit.residual_mse},
          {"degenerate", handle.fit.degenerate},
          {"fit", fit_report_to_json(handle.fit)}};
}

std::string random_id() {
  std::random_device rd;
  const std::uint64_t v = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

FitReport fit_report_from_json(const json& doc) {
  FitReport r;
  r.light = light_from_json(doc.at("light"));
  r.residual_mse = doc.at("residual_mse").get<double>();
  r.iterations = doc.at("iterations").get<int>();
  r.degenerate = doc.at("degenerate").get<bool>();
  r.condition_number = doc.at("condition_number").is_null() ? INFINITY : doc.at("condition_number").get<double>();
  r.pixels = doc.at("pixels").get<std::size_t>();
  return r;
}

}  // namespace

SceneStore::SceneStore(std::size_t capacity, std::optional<std::filesystem::path> dir)
    : capacity_(capacity == 0 ? 1 : capacity), dir_(std::move(dir)) {
  if (dir_) std::filesystem::create_directories(*dir_);
}

std::shared_ptr<const SceneHandle> SceneStore::insert(Scene scene, FitReport fit, double gamma) {
  auto handle = std::make_shared<SceneHandle>();
  handle->scene = std::make_shared<const Scene>(std::move(scene));
  handle->fit = fit;
  handle->gamma = gamma;
  handle->created = std::chrono::system_clock::now();
  {
    std::lock_guard lock(mutex_);
    do {
      handle->id = random_id() + std::to_string(next_id_++);
    } while (table_.contains(handle->id));
  }
  if (dir_) {
    const auto path = *dir_ / handle->id;
    write_scene_dir(*handle->scene, path);
    json meta{{"fit", fit_report_to_json(fit)}, {"gamma", gamma}};
    io::write_file(path / "meta.json", meta.dump(2));
  }
  std::lock_guard lock(mutex_);
  admit_locked(handle);
  return handle;
}

std::shared_ptr<const SceneHandle> SceneStore::find(const std::string& id) {
  {
    std::lock_guard lock(mutex_);
    auto it = table_.find(id);
    if (it != table_.end()) {
      touch_locked(id);
      return it->second.first;
    }
  }
  return load_from_disk(id);
}

std::size_t SceneStore::size() const {
  std::lock_guard lock(mutex_);
  return table_.size();
}

std::shared_ptr<const SceneHandle> SceneStore::load_from_disk(const std::string& id) {
  if (!dir_ || id.empty() || id.find_first_of("/\\.") != std::string::npos) return nullptr;
  const auto path = *dir_ / id;
  if (!std::filesystem::exists(path / "meta.json")) return nullptr;
  auto handle = std::make_shared<SceneHandle>();
  handle->id = id;
  handle->scene = std::make_shared<const Scene>(read_scene_dir(path));
  std::ifstream in(path / "meta.json");
  const json meta = json::parse(in);
  handle->fit = fit_report_from_json(meta.at("fit"));
  handle->gamma = meta.at("gamma").get<double>();
  handle->created = std::chrono::system_clock::now();
  std::lock_guard lock(mutex_);
  auto it = table_.find(id);
  if (it != table_.end()) return it->second.first;
  admit_locked(handle);
  return handle;
}

void SceneStore::touch_locked(const std::string& id) {
  auto& entry = table_.at(id);
  recency_.splice(recency_.begin(), recency_, entry.second);
}

void SceneStore::admit_locked(std::shared_ptr<const SceneHandle> handle) {
  const std::string id = handle->id;
  recency_.push_front(id);
  table_[id] = {std::move(handle), recency_.begin()};
  while (table_.size() > capacity_) {
    const std::string victim = recency_.back();
    recency_.pop_back();
    table_.erase(victim);
    spdlog::debug("evicted scene {}", victim);
  }
}

RelightService::RelightService(ServiceConfig config)
    : config_(std::move(config)), store_(config_.store_capacity, config_.store_dir) {}

Reply RelightService::create_scene(const std::map<std::string, std::string, std::less<>>& parts) {
  for (auto name : kRequiredLayers) {
    if (!parts.contains(name)) {
      return error_reply(400, "missing required part \"" + std::string(name) + "\"", std::string(name));
    }
  }
  double gamma = kDefaultGamma;
  if (auto it = parts.find("gamma"); it != parts.end()) {
    const char* begin = it->second.data();
    auto [ptr, ec] = std::from_chars(begin, begin + it->second.size(), gamma);
    if (ec != std::errc() || !(gamma > 0.0)) return error_reply(400, "gamma must be a positive number", "gamma");
  }

  Scene scene;
  try {
    scene = scene_from_layers(parts, gamma);
  } catch (const InputError& e) {
    return error_reply(400, e.what());
  }

  FitReport fit;
  try {
    const AlphaMask background = scene.alpha.inverted();
    fit = fit_light_constrained(scene.bg_normals, scene.bg_shading, &background, config_.fit);
  } catch (const NumericalError& e) {
    return error_reply(422, e.what());
  }
  const auto handle = store_.insert(std::move(scene), fit, gamma);
  return json_reply(fit.degenerate ? 422 : 201, describe(*handle));
}

Reply RelightService::get_scene(const std::string& id) {
  std::shared_ptr<const SceneHandle> handle;
  try {
    handle = store_.find(id);
  } catch (const std::exception& e) {
    return error_reply(500, std::string("failed to load scene: ") + e.what());
  }
  if (!handle) return error_reply(404, "unknown scene \"" + id + "\"");
  return json_reply(200, describe(*handle));
}

Reply RelightService::render(const std::string& id, std::string_view body, std::optional<std::string> scale,
                             std::optional<std::string> view) {
  std::shared_ptr<const SceneHandle> handle;
  try {
    handle = store_.find(id);
  } catch (const std::exception& e) {
    return error_reply(500, std::string("failed to load scene: ") + e.what());
  }
  if (!handle) return error_reply(404, "unknown scene \"" + id + "\"");

  json request = json::object();
  if (!body.empty()) {
    try {
      request = json::parse(body);
    } catch (const json::exception& e) {
      return error_reply(400, std::string("malformed JSON body: ") + e.what());
    }
    if (!request.is_object()) return error_reply(400, "request body must be a JSON object");
  }

  HarmonizeOptions options;
  options.light = handle->fit.light;
  if (request.contains("light") && !request.at("light").is_null()) {
    try {
      options.light = light_from_json(request.at("light"));
    } catch (const ParseError& e) {
      return error_reply(400, e.what(), "light");
    }
    if (!(options.light->ambient >= 0.0)) return error_reply(400, "ambient must be >= 0", "light.ambient");
    if (!(options.light->direction.z() >= 0.0)) {
      return error_reply(400, "light must point into the camera-facing hemisphere (lz >= 0)", "light.lz");
    }
  }
  if (request.contains("edits") && !request.at("edits").is_null()) {
    try {
      options.edits = edit_params_from_json(request.at("edits"));
    } catch (const ParseError& e) {
      return error_reply(400, e.what(), "edits");
    }
  }
  std::string refiner_name = "identity";
  if (request.contains("refiner")) {
    if (!request.at("refiner").is_string()) return error_reply(400, "refiner must be a string", "refiner");
    refiner_name = request.at("refiner").get<std::string>();
    if (refiner_name != "identity" && refiner_name != "smooth") {
      return error_reply(400, "refiner must be \"identity\" or \"smooth\"", "refiner");
    }
  }

  double factor = 1.0;
  if (scale) {
    const char* begin = scale->data();
    auto [ptr, ec] = std::from_chars(begin, begin + scale->size(), factor);
    if (ec != std::errc() || ptr != begin + scale->size() || !(factor > 0.0 && factor <= 1.0)) {
      return error_reply(400, "scale must be a number in (0, 1]", "scale");
    }
  }
  const std::string view_name = view.value_or("harmonized");
  if (view_name != "harmonized" && view_name != "naive" && view_name != "lambertian" && view_name != "refined") {
    return error_reply(400, "view must be harmonized, naive, lambertian or refined", "view");
  }

  const Scene& scene = *handle->scene;
  FloatImage out;
  try {
    if (view_name == "naive") {
      out = composite(scene.fg_image, scene.bg_image, scene.alpha);
    } else {
      const auto refiner = make_refiner(refiner_name);
      HarmonizeResult result = harmonize(scene, *refiner, options);
      if (view_name == "harmonized") out = std::move(result.image);
      else if (view_name == "lambertian") out = std::move(result.lambertian_shading);
      else out = std::move(result.refined_shading);
    }
  } catch (const Error& e) {
    return error_reply(422, e.what());
  }
  if (factor < 1.0) {
    const int h = std::max(1, static_cast<int>(std::lround(out.height() * factor)));
    const int w = std::max(1, static_cast<int>(std::lround(out.width() * factor)));
    out = resize_bilinear(out, h, w);
  }
  const io::Bytes png = io::encode_srgb_png(out, handle->gamma);
  return {200, "image/png", std::string(io::as_view(png))};
}

void RelightService::mount(httplib::Server& server) {
  auto send = [](httplib::Response& res, const Reply& reply) {
    res.status = reply.status;
    res.set_content(reply.body, reply.content_type);
  };
  auto query = [](const httplib::Request& req, const char* key) -> std::optional<std::string> {
    if (!req.has_param(key)) return std::nullopt;
    return req.get_param_value(key);
  };

  server.Post("/scenes", [this, send](const httplib::Request& req, httplib::Response& res) {
    if (!req.is_multipart_form_data()) {
      send(res, error_reply(400, "expected multipart/form-data upload"));
      return;
    }
    std::map<std::string, std::string, std::less<>> parts;
    for (const auto& [name, file] : req.files) parts[name] = file.content;
    send(res, create_scene(parts));
  });
  server.Get(R"(/scenes/([^/]+))", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, get_scene(req.matches[1]));
  });
  server.Post(R"(/scenes/([^/]+)/render)", [this, send, query](const httplib::Request& req, httplib::Response& res) {
    send(res, render(req.matches[1], req.body, query(req, "scale"), query(req, "view")));
  });
  server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  server.set_post_routing_handler([origin = config_.cors_origin](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", origin);
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
  });
}

}  // namespace icomp::service
