// Copyright 2026 The intrinsic-compose Authors.
// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <fstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "icomp/io.hpp"
#include "icomp/lighting.hpp"
#include "icomp/scene_io.hpp"
#include "synth.hpp"

namespace icomp {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using testing::Rng;

testing::CommandResult icomp_cli(const std::string& args) {
  return testing::run_command(std::string(ICOMP_CLI_PATH) + " " + args + " 2>&1");
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

double light_error(const json& l, const LightModel& truth) {
  const Eigen::Vector4d a(l["lx"].get<double>(), l["ly"].get<double>(), l["lz"].get<double>(), l["c"].get<double>());
  const Eigen::Vector4d b(truth.direction.x(), truth.direction.y(), truth.direction.z(), truth.ambient);
  return (a - b).norm();
}

void write_corpus_entry(const Scene& s, const fs::path& dir) {
  fs::create_directories(dir);
  io::write_pfm(dir / "image.pfm", s.fg_image);
  io::write_pfm(dir / "albedo.pfm", s.fg_albedo);
  io::write_pfm(dir / "shading.pfm", s.fg_shading);
  io::write_pfm(dir / "normals.pfm", s.fg_normals.to_image());
  io::write_pfm(dir / "depth.pfm", s.bg_depth.plane());
  io::write_png(dir / "mask.png", s.alpha.plane());
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    Rng rng(2024);
    truth_ = LightModel{Eigen::Vector3d(0.4, -0.3, 0.75), 0.2};
    scene_ = testing::self_composite_scene(24, 28, truth_, rng);
    manifest_ = testing::write_scene_files(scene_, tmp_.path() / "scene");
  }
  testing::TempDir tmp_;
  LightModel truth_;
  Scene scene_;
  fs::path manifest_;
};

TEST_F(CliTest, FitLightRecoversGeneratingLight) {
  const auto r = icomp_cli("fit-light " + q(manifest_) + " -o " + q(tmp_.path() / "fit.json"));
  ASSERT_EQ(r.exit_code, 0) << r.out;
  const json doc = json::parse(testing::read_text(tmp_.path() / "fit.json"));
  EXPECT_LT(light_error(doc["light"], truth_), 1e-3);
  EXPECT_EQ(doc["solver"], "constrained");
}

TEST_F(CliTest, FitLightLstsqMatchesClosedForm) {
  const auto r = icomp_cli("fit-light --lstsq " + q(manifest_) + " -o " + q(tmp_.path() / "fit.json"));
  ASSERT_EQ(r.exit_code, 0) << r.out;
  const json doc = json::parse(testing::read_text(tmp_.path() / "fit.json"));
  const Scene loaded = load_scene(load_manifest(manifest_));
  const AlphaMask bg = loaded.alpha.inverted();
  const FitReport expected = fit_light_lstsq(loaded.bg_normals, loaded.bg_shading, &bg);
  EXPECT_LT(light_error(doc["light"], expected.light), 1e-12);
}

TEST_F(CliTest, FlatWallExitsTwoUnlessAllowed) {
  Rng rng(3);
  const auto flat = testing::write_scene_files(testing::flat_wall_scene(16, 16, truth_, rng), tmp_.path() / "flat");
  const auto r = icomp_cli("fit-light " + q(flat));
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_NE(r.out.find("degenerate"), std::string::npos) << r.out;
  EXPECT_EQ(icomp_cli("fit-light --allow-degenerate " + q(flat)).exit_code, 0);
}

TEST_F(CliTest, MissingManifestExitsOne) {
  const auto r = icomp_cli("fit-light " + q(tmp_.path() / "nope.json"));
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(r.out.find("manifest"), std::string::npos) << r.out;
  EXPECT_EQ(icomp_cli("no-such-command").exit_code, 1);
}

TEST_F(CliTest, HarmonizeSelfCompositeAndIntermediates) {
  const fs::path out = tmp_.path() / "out";
  const auto r = icomp_cli("harmonize " + q(manifest_) + " -o " + q(out));
  ASSERT_EQ(r.exit_code, 0) << r.out;
  for (const char* name : {"composite.png", "composite.pfm", "light.json", "harmonized_albedo.pfm",
                           "composite_albedo.pfm", "lambertian_shading.pfm", "refined_shading.pfm"}) {
    EXPECT_TRUE(fs::exists(out / name)) << name;
  }
  const FloatImage result = io::read_pfm(out / "composite.pfm");
  EXPECT_LT(mean_relative_error(result, scene_.fg_image), 0.05);

  const fs::path bare = tmp_.path() / "bare";
  ASSERT_EQ(icomp_cli("harmonize --no-intermediates " + q(manifest_) + " -o " + q(bare)).exit_code, 0);
  EXPECT_TRUE(fs::exists(bare / "composite.png"));
  EXPECT_FALSE(fs::exists(bare / "refined_shading.pfm"));
}

TEST_F(CliTest, HarmonizeEmptyMaskGivesBackground) {
  Scene empty = scene_;
  empty.alpha = AlphaMask::constant(scene_.height(), scene_.width(), 0.0);
  const auto manifest = testing::write_scene_files(empty, tmp_.path() / "empty");
  const fs::path out = tmp_.path() / "out";
  ASSERT_EQ(icomp_cli("harmonize " + q(manifest) + " -o " + q(out)).exit_code, 0);
  const Scene loaded = load_scene(load_manifest(manifest));
  const FloatImage expected = reconstruct(loaded.bg_albedo, loaded.bg_shading);
  const FloatImage got = io::read_pfm(out / "composite.pfm");
  for (std::size_t i = 0; i < got.size(); ++i) {
    EXPECT_EQ(got.data()[i], static_cast<double>(static_cast<float>(expected.data()[i])));
  }
}

TEST_F(CliTest, HarmonizeLightOverride) {
  std::ofstream(tmp_.path() / "light.json") << R"({"lx": 0.0, "ly": 0.0, "lz": 0.0, "c": 1.0})";
  const fs::path out = tmp_.path() / "out";
  ASSERT_EQ(icomp_cli("harmonize " + q(manifest_) + " -o " + q(out) + " --light " + q(tmp_.path() / "light.json"))
                .exit_code,
            0);
  const json light = json::parse(testing::read_text(out / "light.json"));
  EXPECT_EQ(light["c"], 1.0);
  EXPECT_FALSE(light.contains("fit"));
  const FloatImage shading = io::read_pfm(out / "lambertian_shading.pfm");
  for (int y = 0; y < shading.height(); ++y) {
    for (int x = 0; x < shading.width(); ++x) {
      if (scene_.alpha(y, x) == 1.0) { EXPECT_EQ(shading(y, x), 1.0); }
    }
  }
}

TEST_F(CliTest, HarmonizeStageErrorsAreNamed) {
  std::ofstream(tmp_.path() / "bad_edits.json") << R"({"saturation": 7})";
  const auto r = icomp_cli("harmonize " + q(manifest_) + " -o " + q(tmp_.path() / "o") + " --edits " +
                           q(tmp_.path() / "bad_edits.json"));
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(r.out.find("edits: "), std::string::npos) << r.out;
  const auto bad_refiner = icomp_cli("harmonize " + q(manifest_) + " -o " + q(tmp_.path() / "o") + " --refiner magic");
  EXPECT_EQ(bad_refiner.exit_code, 1);
  EXPECT_NE(bad_refiner.out.find("refiner: "), std::string::npos) << bad_refiner.out;
}

TEST_F(CliTest, HarmonizeWithExternalRefiner) {
  const fs::path out = tmp_.path() / "out";
  const auto r = icomp_cli("harmonize " + q(manifest_) + " -o " + q(out) + " --refiner " +
                           q(std::string("external:") + ICOMP_STACK_REFINER));
  ASSERT_EQ(r.exit_code, 0) << r.out;
  const FloatImage lambert = io::read_pfm(out / "lambertian_shading.pfm");
  const FloatImage refined = io::read_pfm(out / "refined_shading.pfm");
  EXPECT_EQ(lambert, refined);
}

TEST_F(CliTest, GenPairsOnLambertianCorpus) {
  const fs::path corpus = tmp_.path() / "corpus";
  Rng rng(9);
  for (int i = 0; i < 3; ++i) {
    const LightModel l = testing::random_feasible_light(rng, 0.5);
    write_corpus_entry(testing::self_composite_scene(24, 24, l, rng), corpus / ("img" + std::to_string(i)));
  }
  const fs::path out = tmp_.path() / "pairs";
  const auto r = icomp_cli("gen-pairs --seed 5 " + q(corpus) + " " + q(out));
  ASSERT_EQ(r.exit_code, 0) << r.out;
  double total = 0.0;
  for (int i = 0; i < 3; ++i) {
    const fs::path dir = out / ("img" + std::to_string(i));
    for (const char* name : {"input.pfm", "gt_shading.pfm", "albedo.pfm", "mask.png", "meta.json"}) {
      EXPECT_TRUE(fs::exists(dir / name)) << name;
    }
    const FloatImage stack = io::read_pfm_stack(dir / "input.pfm", 9);
    const FloatImage gt = io::read_pfm(dir / "gt_shading.pfm");
    double mse = 0.0;
    for (int y = 0; y < gt.height(); ++y) {
      for (int x = 0; x < gt.width(); ++x) mse += std::pow(stack(y, x, 3) - gt(y, x), 2);
    }
    total += mse / static_cast<double>(gt.pixel_count());
    const json meta = json::parse(testing::read_text(dir / "meta.json"));
    EXPECT_TRUE(meta.contains("light"));
    EXPECT_TRUE(meta.contains("depth_channel"));
  }
  EXPECT_LT(total / 3.0, 1e-4);
}

TEST_F(CliTest, GenPairsEdgeCases) {
  fs::create_directories(tmp_.path() / "empty");
  const auto empty = icomp_cli("gen-pairs " + q(tmp_.path() / "empty") + " " + q(tmp_.path() / "o1"));
  EXPECT_EQ(empty.exit_code, 0);
  EXPECT_NE(empty.out.find("no entries"), std::string::npos) << empty.out;

  const fs::path corpus = tmp_.path() / "broken";
  fs::create_directories(corpus / "a");
  fs::create_directories(corpus / "b");
  const auto broken = icomp_cli("gen-pairs " + q(corpus) + " " + q(tmp_.path() / "o2"));
  EXPECT_NE(broken.exit_code, 0);

  // One good entry is enough for success; the bad one is logged.
  Rng rng(4);
  write_corpus_entry(testing::self_composite_scene(24, 24, truth_, rng), corpus / "c");
  const auto mixed = icomp_cli("gen-pairs " + q(corpus) + " " + q(tmp_.path() / "o3"));
  EXPECT_EQ(mixed.exit_code, 0) << mixed.out;
  EXPECT_NE(mixed.out.find("entry a"), std::string::npos) << mixed.out;
}

TEST_F(CliTest, BtRankExamples) {
  const fs::path csv = tmp_.path() / "two.csv";
  std::ofstream(csv) << "item_id,method_a,method_b,choice\n1,x,y,a\n2,x,y,a\n3,y,x,b\n4,x,y,b\n";
  const auto r = icomp_cli("bt-rank " + q(csv));
  ASSERT_EQ(r.exit_code, 0) << r.out;
  EXPECT_NE(r.out.find("x       0.7500"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("y       0.2500"), std::string::npos) << r.out;

  const fs::path sym = tmp_.path() / "sym.csv";
  std::ofstream(sym) << "item_id,method_a,method_b,choice\n"
                        "1,p,q,a\n2,p,q,b\n3,q,r,a\n4,q,r,b\n5,p,r,a\n6,p,r,b\n";
  const auto s = icomp_cli("bt-rank --json " + q(sym));
  ASSERT_EQ(s.exit_code, 0) << s.out;
  for (const auto& row : json::parse(s.out)) EXPECT_NEAR(row["score"].get<double>(), 1.0 / 3.0, 1e-9);

  const fs::path split = tmp_.path() / "split.csv";
  std::ofstream(split) << "item_id,method_a,method_b,choice\n1,a,b,a\n2,a,b,b\n3,c,d,a\n4,c,d,b\n";
  const auto d = icomp_cli("bt-rank " + q(split));
  EXPECT_EQ(d.exit_code, 2);
  EXPECT_NE(d.out.find("c, d"), std::string::npos) << d.out;

  const fs::path bad = tmp_.path() / "bad.csv";
  std::ofstream(bad) << "item_id,method_a,method_b,choice\n1,a,b,z\n";
  EXPECT_EQ(icomp_cli("bt-rank " + q(bad)).exit_code, 1);
}

TEST_F(CliTest, CommandsAreByteReproducible) {
  auto run_twice = [&](const std::string& args, const fs::path& out) {
    std::vector<std::string> outputs;
    for (int k = 0; k < 2; ++k) {
      fs::remove_all(out);
      const auto r = icomp_cli(args);
      EXPECT_EQ(r.exit_code, 0) << r.out;
      std::string all;
      if (fs::is_directory(out)) {
        std::vector<fs::path> files;
        for (const auto& f : fs::recursive_directory_iterator(out)) {
          if (f.is_regular_file()) files.push_back(f.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) all += f.string() + "\n" + testing::read_text(f);
      } else if (fs::exists(out)) {
        all = testing::read_text(out);
      }
      outputs.push_back(all + r.out);
    }
    EXPECT_EQ(outputs[0], outputs[1]) << args;
    EXPECT_FALSE(outputs[0].empty());
  };
  run_twice("fit-light " + q(manifest_) + " -o " + q(tmp_.path() / "fit.json"), tmp_.path() / "fit.json");
  run_twice("harmonize --auto-albedo --seed 3 --refiner smooth " + q(manifest_) + " -o " + q(tmp_.path() / "h"),
            tmp_.path() / "h");
  const fs::path corpus = tmp_.path() / "corpus";
  Rng rng(10);
  write_corpus_entry(testing::self_composite_scene(24, 24, truth_, rng), corpus / "e0");
  run_twice("gen-pairs --seed 11 " + q(corpus) + " " + q(tmp_.path() / "p"), tmp_.path() / "p");
  const fs::path csv = tmp_.path() / "r.csv";
  std::ofstream(csv) << "item_id,method_a,method_b,choice\n1,x,y,a\n2,y,x,a\n3,x,y,a\n";
  run_twice("bt-rank " + q(csv), tmp_.path() / "none");
}

}  // namespace
}  // namespace icomp
