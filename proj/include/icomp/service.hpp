// Copyright 2026 The intrinsic-compose Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>

#include "icomp/lighting.hpp"
#include "icomp/reshade.hpp"

namespace httplib {
class Server;
}

namespace icomp::service {

struct SceneHandle {
  std::string id;
  std::shared_ptr<const Scene> scene;
  FitReport fit;
  double gamma = kDefaultGamma;
  std::chrono::system_clock::time_point created;
};

/// Thread-safe LRU table of immutable scenes. With a directory, every scene
/// is also written to disk and evicted scenes are reloaded on demand.
class SceneStore {
 public:
  explicit SceneStore(std::size_t capacity, std::optional<std::filesystem::path> dir = std::nullopt);

  std::shared_ptr<const SceneHandle> insert(Scene scene, FitReport fit, double gamma);
  std::shared_ptr<const SceneHandle> find(const std::string& id);
  std::size_t size() const;

 private:
  std::shared_ptr<const SceneHandle> load_from_disk(const std::string& id);
  void touch_locked(const std::string& id);
  void admit_locked(std::shared_ptr<const SceneHandle> handle);

  std::size_t capacity_;
  std::optional<std::filesystem::path> dir_;
  mutable std::mutex mutex_;
  std::list<std::string> recency_;  // front = most recent
  std::unordered_map<std::string, std::pair<std::shared_ptr<const SceneHandle>, std::list<std::string>::iterator>> table_;
  std::uint64_t next_id_ = 1;
};

struct ServiceConfig {
  std::size_t store_capacity = 16;
  std::optional<std::filesystem::path> store_dir;
  std::string cors_origin = "*";
  FitOptions fit;
};

struct Reply {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

/// Endpoint logic, independent of the HTTP transport.
///
///   POST /scenes               multipart layers -> 201 {id, fitted_light, ...}
///   GET  /scenes/{id}          -> {dimensions, fitted_light, residual, degenerate}
///   POST /scenes/{id}/render   JSON {light?, edits?, refiner?} -> image/png
///
/// Render accepts ?scale=(0,1] to shrink the preview and ?view= one of
/// harmonized (default), naive, lambertian, refined.
class RelightService {
 public:
  explicit RelightService(ServiceConfig config = {});

  Reply create_scene(const std::map<std::string, std::string, std::less<>>& parts);
  Reply get_scene(const std::string& id);
  Reply render(const std::string& id, std::string_view body, std::optional<std::string> scale,
               std::optional<std::string> view);

  /// Registers the routes and CORS handling on an httplib server.
  void mount(httplib::Server& server);

  SceneStore& store() { return store_; }

 private:
  ServiceConfig config_;
  SceneStore store_;
};

}  // namespace icomp::service
