// Copyright 2026 The intrinsic-compose Authors.
// SPDX-License-Identifier: Apache-2.0
#include "synth.hpp"

#include <sys/wait.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

#include "icomp/io.hpp"
#include "icomp/scene_io.hpp"

namespace icomp::testing {

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

NormalMap random_hemisphere_normals(int height, int width, Rng& rng) {
  std::normal_distribution<double> gauss;
  std::vector<Eigen::Vector3d> normals;
  normals.reserve(static_cast<std::size_t>(height) * static_cast<std::size_t>(width));
  for (int i = 0; i < height * width; ++i) {
    Eigen::Vector3d v(gauss(rng), gauss(rng), std::abs(gauss(rng)));
    while (v.norm() < 1e-6) v = Eigen::Vector3d(gauss(rng), gauss(rng), std::abs(gauss(rng)));
    normals.push_back(v.normalized());
  }
  return NormalMap(height, width, std::move(normals));
}

NormalMap sphere_normals(int height, int width) {
  std::vector<Eigen::Vector3d> normals;
  const double cy = 0.5 * (height - 1);
  const double cx = 0.5 * (width - 1);
  const double r = 0.5 * std::min(height, width);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double u = (x - cx) / r;
      const double v = (y - cy) / r;
      const double rr = u * u + v * v;
      if (rr < 1.0) {
        normals.emplace_back(u, v, std::sqrt(1.0 - rr));
      } else {
        normals.emplace_back(0.0, 0.0, 1.0);
      }
      normals.back().normalize();
    }
  }
  return NormalMap(height, width, std::move(normals));
}

LightModel random_feasible_light(Rng& rng, double max_ambient) {
  const double azimuth = uniform(rng, -std::numbers::pi, std::numbers::pi);
  const double elevation = std::asin(uniform(rng, -1.0, 1.0));
  const double intensity = uniform(rng, 0.3, 1.5);
  LightModel light;
  // Direction uniform on the sphere, folded onto lz >= 0.
  light.direction = intensity * Eigen::Vector3d(std::cos(elevation) * std::sin(azimuth), std::sin(elevation),
                                                std::abs(std::cos(elevation) * std::cos(azimuth)));
  light.ambient = uniform(rng, 0.0, max_ambient);
  return light;
}

FloatImage smooth_albedo(int height, int width, Rng& rng) {
  FloatImage img(height, width, 3);
  for (int c = 0; c < 3; ++c) {
    const double base = uniform(rng, 0.3, 0.7);
    const double fy = uniform(rng, 0.5, 2.5) * 2.0 * std::numbers::pi / height;
    const double fx = uniform(rng, 0.5, 2.5) * 2.0 * std::numbers::pi / width;
    const double phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) img(y, x, c) = base + 0.2 * std::sin(fy * y + fx * x + phase);
    }
  }
  return img;
}

AlphaMask disc_mask(int height, int width, double cy, double cx, double radius) {
  FloatImage plane(height, width, 1);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double dy = y - cy;
      const double dx = x - cx;
      plane(y, x, 0) = dy * dy + dx * dx <= radius * radius ? 1.0 : 0.0;
    }
  }
  return AlphaMask(std::move(plane));
}

FloatImage render(const NormalMap& normals, const LightModel& light) { return render_lambertian(normals, light); }

namespace {

NormalMap bumpy_sphere(int height, int width, Rng& rng) {
  const NormalMap sphere = sphere_normals(height, width);
  std::vector<Eigen::Vector3d> out;
  const double fy = uniform(rng, 2.0, 4.0) * 2.0 * std::numbers::pi / height;
  const double fx = uniform(rng, 2.0, 4.0) * 2.0 * std::numbers::pi / width;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      Eigen::Vector3d n = sphere(y, x);
      n.x() += 0.3 * std::sin(fx * x);
      n.y() += 0.3 * std::cos(fy * y);
      n.z() = std::max(n.z(), 0.2);
      out.push_back(n.normalized());
    }
  }
  return NormalMap(height, width, std::move(out));
}

Scene scene_from_geometry(const NormalMap& normals, const LightModel& light, const AlphaMask& mask, Rng& rng) {
  const int h = normals.height();
  const int w = normals.width();
  Scene scene;
  scene.bg_albedo = smooth_albedo(h, w, rng);
  scene.bg_normals = normals;
  scene.bg_shading = render(normals, light);
  scene.bg_image = reconstruct(scene.bg_albedo, scene.bg_shading);
  scene.bg_depth = DepthMap::zeros(h, w);
  FloatImage depth(h, w, 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) depth(y, x, 0) = 1.0 + 0.01 * (y + x);
  }
  scene.bg_depth = DepthMap(std::move(depth));
  scene.fg_albedo = scene.bg_albedo;
  scene.fg_normals = scene.bg_normals;
  scene.fg_shading = scene.bg_shading;
  scene.fg_image = scene.bg_image;
  scene.alpha = mask;
  return scene;
}

}  // namespace

Scene self_composite_scene(int height, int width, const LightModel& light, Rng& rng) {
  const NormalMap normals = bumpy_sphere(height, width, rng);
  const AlphaMask mask = disc_mask(height, width, 0.45 * height, 0.55 * width, 0.2 * std::min(height, width));
  return scene_from_geometry(normals, light, mask, rng);
}

Scene flat_wall_scene(int height, int width, const LightModel& light, Rng& rng) {
  const NormalMap normals = NormalMap::constant(height, width, Eigen::Vector3d(0.0, 0.0, 1.0));
  const AlphaMask mask = disc_mask(height, width, 0.5 * height, 0.5 * width, 0.2 * std::min(height, width));
  return scene_from_geometry(normals, light, mask, rng);
}

std::filesystem::path write_scene_files(const Scene& scene, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_scene_dir(scene, dir);
  nlohmann::json manifest;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() == ".pfm") manifest[entry.path().stem().string()] = entry.path().filename().string();
  }
  manifest["resolution"] = 0;
  const auto path = dir / "manifest.json";
  std::ofstream(path) << manifest.dump(2);
  return path;
}

TempDir::TempDir() {
  std::string templ = (std::filesystem::temp_directory_path() / "icomp-test-XXXXXX").string();
  if (mkdtemp(templ.data()) == nullptr) throw std::runtime_error("mkdtemp failed");
  path_ = templ;
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

CommandResult run_command(const std::string& command) {
  CommandResult result;
  FILE* pipe = popen(command.c_str(), "r");
  if (pipe == nullptr) return result;
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) result.out.append(buf.data(), n);
  const int status = pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace icomp::testing
