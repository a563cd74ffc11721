// Copyright 2026 The intrinsic-compose Authors.
// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <fstream>

#include <gtest/gtest.h>

#include "icomp/error.hpp"
#include "icomp/io.hpp"
#include "icomp/scene_io.hpp"
#include "synth.hpp"

namespace icomp {
namespace {

using testing::Rng;
using Layers = std::map<std::string, std::string, std::less<>>;

Layers pfm_layers(const Scene& s) {
  auto enc = [](const FloatImage& img) { return std::string(io::as_view(io::encode_pfm(img))); };
  Layers layers;
  layers["fg_albedo"] = enc(s.fg_albedo);
  layers["bg_albedo"] = enc(s.bg_albedo);
  layers["fg_shading"] = enc(s.fg_shading);
  layers["bg_shading"] = enc(s.bg_shading);
  layers["fg_normals"] = enc(s.fg_normals.to_image());
  layers["bg_normals"] = enc(s.bg_normals.to_image());
  layers["mask"] = enc(s.alpha.plane());
  return layers;
}

TEST(SceneLayers, DerivesImagesAndDepth) {
  Rng rng(1);
  const Scene s = testing::self_composite_scene(8, 10, LightModel{Eigen::Vector3d(0.2, 0.1, 0.9), 0.1}, rng);
  const Scene loaded = scene_from_layers(pfm_layers(s), kDefaultGamma);
  EXPECT_EQ(loaded.height(), 8);
  EXPECT_EQ(loaded.width(), 10);
  EXPECT_EQ(loaded.fg_image, reconstruct(loaded.fg_albedo, loaded.fg_shading));
  for (double d : loaded.bg_depth.plane().data()) EXPECT_EQ(d, 0.0);
}

TEST(SceneLayers, MissingLayerIsNamed) {
  Rng rng(2);
  const Scene s = testing::self_composite_scene(8, 8, LightModel{Eigen::Vector3d(0, 0, 1), 0.1}, rng);
  Layers layers = pfm_layers(s);
  layers.erase("bg_normals");
  try {
    scene_from_layers(layers, kDefaultGamma);
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("bg_normals"), std::string::npos);
  }
}

TEST(SceneLayers, PngColorLayersAreLinearized) {
  Rng rng(3);
  const Scene s = testing::self_composite_scene(4, 4, LightModel{Eigen::Vector3d(0, 0, 1), 0.1}, rng);
  Layers layers = pfm_layers(s);
  FloatImage display(4, 4, 3, 0.5);
  layers["fg_albedo"] = std::string(io::as_view(io::encode_png(display, 16)));
  const Scene loaded = scene_from_layers(layers, 2.0);
  EXPECT_NEAR(loaded.fg_albedo(0, 0, 0), std::pow(std::round(0.5 * 65535) / 65535, 2.0), 1e-12);
}

TEST(SceneLayers, MismatchedSizesAreRejected) {
  Rng rng(4);
  const Scene s = testing::self_composite_scene(8, 8, LightModel{Eigen::Vector3d(0, 0, 1), 0.1}, rng);
  Layers layers = pfm_layers(s);
  layers["mask"] = std::string(io::as_view(io::encode_pfm(FloatImage(8, 7, 1))));
  EXPECT_THROW(scene_from_layers(layers, kDefaultGamma), DimensionError);
}

TEST(Manifest, ResolvesRelativePathsAndResizes) {
  Rng rng(5);
  const Scene s = testing::self_composite_scene(12, 16, LightModel{Eigen::Vector3d(0.1, 0.1, 0.9), 0.2}, rng);
  testing::TempDir dir;
  const auto manifest_path = testing::write_scene_files(s, dir.path());
  SceneManifest m = load_manifest(manifest_path);
  EXPECT_EQ(m.resolution, 0);
  EXPECT_EQ(m.paths.at("fg_albedo"), dir.path() / "fg_albedo.pfm");
  const Scene native = load_scene(m);
  EXPECT_EQ(native.width(), 16);
  m.resolution = 8;
  const Scene small = load_scene(m);
  EXPECT_EQ(small.width(), 8);
  EXPECT_EQ(small.height(), 6);
  for (double v : small.alpha.plane().data()) EXPECT_TRUE(v == 0.0 || v == 1.0);
  for (const auto& n : small.bg_normals.data()) EXPECT_NEAR(n.norm(), 1.0, 1e-12);
}

TEST(Manifest, RejectsBadFields) {
  testing::TempDir dir;
  std::ofstream(dir.path() / "m.json") << R"({"resolution": -3})";
  EXPECT_THROW(load_manifest(dir.path() / "m.json"), ParseError);
  std::ofstream(dir.path() / "n.json") << R"({"fg_albedo": 5})";
  EXPECT_THROW(load_manifest(dir.path() / "n.json"), ParseError);
  std::ofstream(dir.path() / "o.json") << "{not json";
  EXPECT_THROW(load_manifest(dir.path() / "o.json"), ParseError);
  EXPECT_THROW(load_manifest(dir.path() / "missing.json"), IoError);
}

TEST(SceneDir, RoundTripAtFloatPrecision) {
  Rng rng(6);
  const Scene s = testing::self_composite_scene(6, 5, LightModel{Eigen::Vector3d(0.1, 0.1, 0.9), 0.2}, rng);
  testing::TempDir dir;
  write_scene_dir(s, dir.path());
  const Scene back = read_scene_dir(dir.path());
  EXPECT_EQ(back.alpha.plane(), s.alpha.plane());
  for (std::size_t i = 0; i < s.bg_shading.size(); ++i) {
    EXPECT_NEAR(back.bg_shading.data()[i], s.bg_shading.data()[i], 1e-6);
  }
}

}  // namespace
}  // namespace icomp
