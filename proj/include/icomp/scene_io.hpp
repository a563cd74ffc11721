// Copyright 2026 The intrinsic-compose Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "icomp/reshade.hpp"

namespace icomp {

/// Layer names shared by manifests, uploads and on-disk scene directories.
namespace layer {
inline constexpr std::string_view kFgImage = "fg_image";
inline constexpr std::string_view kBgImage = "bg_image";
inline constexpr std::string_view kFgAlbedo = "fg_albedo";
inline constexpr std::string_view kBgAlbedo = "bg_albedo";
inline constexpr std::string_view kFgShading = "fg_shading";
inline constexpr std::string_view kBgShading = "bg_shading";
inline constexpr std::string_view kFgNormals = "fg_normals";
inline constexpr std::string_view kBgNormals = "bg_normals";
inline constexpr std::string_view kBgDepth = "bg_depth";
inline constexpr std::string_view kMask = "mask";
}  // namespace layer

/// Layers that must be present; images and depth can be derived.
inline constexpr std::string_view kRequiredLayers[] = {layer::kFgAlbedo,  layer::kBgAlbedo,  layer::kFgShading,
                                                       layer::kBgShading, layer::kFgNormals, layer::kBgNormals,
                                                       layer::kMask};

/// JSON manifest naming the layer files of a scene. Relative paths resolve
/// against the manifest's directory.
struct SceneManifest {
  std::map<std::string, std::filesystem::path, std::less<>> paths;
  int resolution = 1024;  // long side; 0 keeps the native size
  double gamma = kDefaultGamma;
};

SceneManifest load_manifest(const std::filesystem::path& path);

/// Decodes raw layer bytes into a scene. PNG images, albedo and shading are
/// display referred and linearized with `gamma`; PFM layers are taken as
/// linear. Missing images are reconstructed, missing depth is zero.
/// Throws InputError naming the first missing or malformed layer.
Scene scene_from_layers(const std::map<std::string, std::string, std::less<>>& layers, double gamma);

/// Reads the files listed in the manifest, then resizes to its resolution.
Scene load_scene(const SceneManifest& manifest);

/// Resizes every layer so the long side equals `long_side`: bilinear for
/// images and maps, nearest for the mask, bilinear + renormalize for normals.
Scene resize_scene(const Scene& scene, int long_side);

/// Stores every layer as PFM (mask too) under `dir`, readable back with
/// read_scene_dir.
void write_scene_dir(const Scene& scene, const std::filesystem::path& dir);
Scene read_scene_dir(const std::filesystem::path& dir);

}  // namespace icomp
