// Copyright 2026 The intrinsic-compose Authors.
// SPDX-License-Identifier: Apache-2.0

#include "icomp/scene_io.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "icomp/error.hpp"
#include "icomp/io.hpp"

namespace icomp {

namespace {

FloatImage decode_color_layer(std::string_view bytes, std::string_view name, double gamma) {
  FloatImage img;
  try {
    img = io::decode_image(bytes);
  } catch (const InputError& e) {
    throw ParseError(std::string(name) + ": " + e.what());
  }
  if (io::sniff_format(bytes) == io::ImageFormat::kPng) img = srgb_to_linear(img, gamma);
  return img;
}

FloatImage decode_data_layer(std::string_view bytes, std::string_view name) {
  try {
    return io::decode_image(bytes);
  } catch (const InputError& e) {
    throw ParseError(std::string(name) + ": " + e.what());
  }
}

// Gray images promoted to RGB; RGB shading collapsed by luminance.
FloatImage as_rgb(FloatImage img) {
  if (img.channels() == 3) return img;
  FloatImage out(img.height(), img.width(), 3);
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    for (int c = 0; c < 3; ++c) out.data()[3 * i + static_cast<std::size_t>(c)] = img.data()[i];
  }
  return out;
}

FloatImage as_gray(FloatImage img) {
  if (img.channels() == 1) return img;
  if (img.channels() == 3) return luminance(img);
  throw DimensionError("expected a 1- or 3-channel layer");
}

NormalMap resize_normals(const NormalMap& normals, int height, int width) {
  if (normals.height() == height && normals.width() == width) return normals;
  return NormalMap::from_image(resize_bilinear(normals.to_image(), height, width), /*normalize=*/true);
}

}  // namespace

SceneManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("manifest " + path.string() + ": " + e.what());
  }
  if (!doc.is_object()) throw ParseError("manifest must be a JSON object");
  SceneManifest manifest;
  const auto base = path.parent_path();
  for (const auto& [key, value] : doc.items()) {
    if (key == "resolution") {
      if (!value.is_number_integer() || value.get<int>() < 0) throw ParseError("manifest resolution must be >= 0");
      manifest.resolution = value.get<int>();
    } else if (key == "gamma") {
      if (!value.is_number() || !(value.get<double>() > 0.0)) throw ParseError("manifest gamma must be positive");
      manifest.gamma = value.get<double>();
    } else if (value.is_string()) {
      std::filesystem::path p = value.get<std::string>();
      manifest.paths[key] = p.is_absolute() ? p : base / p;
    } else {
      throw ParseError("manifest field \"" + key + "\" must be a path string");
    }
  }
  return manifest;
}

Scene scene_from_layers(const std::map<std::string, std::string, std::less<>>& layers, double gamma) {
  for (auto name : kRequiredLayers) {
    if (layers.find(name) == layers.end()) throw InputError("missing required layer \"" + std::string(name) + "\"");
  }
  auto bytes = [&layers](std::string_view name) -> std::string_view { return layers.find(name)->second; };

  Scene scene;
  scene.fg_albedo = as_rgb(decode_color_layer(bytes(layer::kFgAlbedo), layer::kFgAlbedo, gamma));
  scene.bg_albedo = as_rgb(decode_color_layer(bytes(layer::kBgAlbedo), layer::kBgAlbedo, gamma));
  scene.fg_shading = as_gray(decode_color_layer(bytes(layer::kFgShading), layer::kFgShading, gamma));
  scene.bg_shading = as_gray(decode_color_layer(bytes(layer::kBgShading), layer::kBgShading, gamma));
  try {
    scene.fg_normals = io::decode_normals(bytes(layer::kFgNormals));
    scene.bg_normals = io::decode_normals(bytes(layer::kBgNormals));
  } catch (const InputError& e) {
    throw ParseError(std::string("normals: ") + e.what());
  }
  scene.alpha = AlphaMask(as_gray(decode_data_layer(bytes(layer::kMask), layer::kMask)));

  if (layers.contains(layer::kFgImage)) {
    scene.fg_image = as_rgb(decode_color_layer(bytes(layer::kFgImage), layer::kFgImage, gamma));
  } else {
    scene.fg_image = reconstruct(scene.fg_albedo, scene.fg_shading);
  }
  if (layers.contains(layer::kBgImage)) {
    scene.bg_image = as_rgb(decode_color_layer(bytes(layer::kBgImage), layer::kBgImage, gamma));
  } else {
    scene.bg_image = reconstruct(scene.bg_albedo, scene.bg_shading);
  }
  if (layers.contains(layer::kBgDepth)) {
    scene.bg_depth = DepthMap(as_gray(decode_data_layer(bytes(layer::kBgDepth), layer::kBgDepth)));
  } else {
    scene.bg_depth = DepthMap::zeros(scene.alpha.height(), scene.alpha.width());
  }
  scene.validate();
  return scene;
}

Scene load_scene(const SceneManifest& manifest) {
  std::map<std::string, std::string, std::less<>> layers;
  for (const auto& [name, path] : manifest.paths) {
    const io::Bytes data = io::read_file(path);
    layers.emplace(name, std::string(io::as_view(data)));
  }
  Scene scene = scene_from_layers(layers, manifest.gamma);
  if (manifest.resolution > 0) scene = resize_scene(scene, manifest.resolution);
  return scene;
}

Scene resize_scene(const Scene& scene, int long_side) {
  const auto [h, w] = fit_long_side(scene.height(), scene.width(), long_side);
  if (h == scene.height() && w == scene.width()) return scene;
  Scene out;
  out.fg_image = resize_bilinear(scene.fg_image, h, w);
  out.bg_image = resize_bilinear(scene.bg_image, h, w);
  out.fg_albedo = resize_bilinear(scene.fg_albedo, h, w);
  out.bg_albedo = resize_bilinear(scene.bg_albedo, h, w);
  out.fg_shading = resize_bilinear(scene.fg_shading, h, w);
  out.bg_shading = resize_bilinear(scene.bg_shading, h, w);
  out.fg_normals = resize_normals(scene.fg_normals, h, w);
  out.bg_normals = resize_normals(scene.bg_normals, h, w);
  out.bg_depth = DepthMap(resize_bilinear(scene.bg_depth.plane(), h, w));
  out.alpha = AlphaMask(resize_nearest(scene.alpha.plane(), h, w));
  return out;
}

void write_scene_dir(const Scene& scene, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  io::write_pfm(dir / "fg_image.pfm", scene.fg_image);
  io::write_pfm(dir / "bg_image.pfm", scene.bg_image);
  io::write_pfm(dir / "fg_albedo.pfm", scene.fg_albedo);
  io::write_pfm(dir / "bg_albedo.pfm", scene.bg_albedo);
  io::write_pfm(dir / "fg_shading.pfm", scene.fg_shading);
  io::write_pfm(dir / "bg_shading.pfm", scene.bg_shading);
  io::write_pfm(dir / "fg_normals.pfm", scene.fg_normals.to_image());
  io::write_pfm(dir / "bg_normals.pfm", scene.bg_normals.to_image());
  io::write_pfm(dir / "bg_depth.pfm", scene.bg_depth.plane());
  io::write_pfm(dir / "mask.pfm", scene.alpha.plane());
}

Scene read_scene_dir(const std::filesystem::path& dir) {
  Scene scene;
  scene.fg_image = io::read_pfm(dir / "fg_image.pfm");
  scene.bg_image = io::read_pfm(dir / "bg_image.pfm");
  scene.fg_albedo = io::read_pfm(dir / "fg_albedo.pfm");
  scene.bg_albedo = io::read_pfm(dir / "bg_albedo.pfm");
  scene.fg_shading = io::read_pfm(dir / "fg_shading.pfm");
  scene.bg_shading = io::read_pfm(dir / "bg_shading.pfm");
  scene.fg_normals = NormalMap::from_image(io::read_pfm(dir / "fg_normals.pfm"), /*normalize=*/true);
  scene.bg_normals = NormalMap::from_image(io::read_pfm(dir / "bg_normals.pfm"), /*normalize=*/true);
  scene.bg_depth = DepthMap(io::read_pfm(dir / "bg_depth.pfm"));
  scene.alpha = AlphaMask(io::read_pfm(dir / "mask.pfm"));
  scene.validate();
  return scene;
}

}  // namespace icomp
