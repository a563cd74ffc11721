// Copyright 2026 The intrinsic-compose Authors.
// SPDX-License-Identifier: Apache-2.0
//
// icomp: command-line front end for intrinsic compositing.
//
//   icomp fit-light  scene.json [--lstsq] [--octant-constraint] [--allow-degenerate] [-o fit.json]
//   icomp harmonize  scene.json -o out/ [--light l.json] [--edits e.json | --auto-albedo] [--refiner R]
//   icomp gen-pairs  corpus/ out/ [--seed N]
//   icomp bt-rank    responses.csv [--json] [--smoothing]
//   icomp serve      [--host H] [--port P] [--store-cap N] [--store-dir D]
//
// Exit codes: 0 success, 1 input or I/O failure, 2 numerical or degenerate
// failure. IC_LOG sets the log level (trace, debug, info, warn, error, off).

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "icomp/bradley_terry.hpp"
#include "icomp/edits.hpp"
#include "icomp/error.hpp"
#include "icomp/io.hpp"
#include "icomp/lighting.hpp"
#include "icomp/reshade.hpp"
#include "icomp/scene_io.hpp"
#include "icomp/serialize.hpp"
#include "icomp/service.hpp"

// After Eigen: <resolv.h>, pulled in by httplib, defines a `_res` macro.
#include <httplib.h>

namespace fs = std::filesystem;
using nlohmann::json;

namespace icomp::cli {
namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitNumerical = 2;

struct CommonFlags {
  std::optional<double> gamma;
  std::optional<int> resolution;
  std::uint64_t seed = 0;
  bool lstsq = false;
  bool octant = false;
};

// Re-throws a stage failure with the stage name prepended, keeping the
// input/numerical distinction that decides the exit code.
template <typename F>
auto stage(const char* name, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const NumericalError& e) {
    throw NumericalError(std::string(name) + ": " + e.what());
  } catch (const InputError& e) {
    throw InputError(std::string(name) + ": " + e.what());
  } catch (const json::exception& e) {
    throw ParseError(std::string(name) + ": " + e.what());
  }
}

json read_json_file(const fs::path& path) {
  const io::Bytes data = io::read_file(path);
  try {
    return json::parse(io::as_view(data));
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_json_file(const fs::path& path, const json& doc) { io::write_file(path, doc.dump(2) + "\n"); }

Scene load_scene_with_flags(const fs::path& manifest_path, const CommonFlags& flags, double* gamma_out) {
  SceneManifest manifest = stage("manifest", [&] { return load_manifest(manifest_path); });
  if (flags.gamma) manifest.gamma = *flags.gamma;
  if (flags.resolution) manifest.resolution = *flags.resolution;
  if (gamma_out != nullptr) *gamma_out = manifest.gamma;
  return stage("load", [&] { return load_scene(manifest); });
}

FitOptions fit_options(const CommonFlags& flags) {
  FitOptions options;
  options.constraint = flags.octant ? LightConstraint::kOctant : LightConstraint::kHemisphere;
  return options;
}

FitReport fit_background(const Scene& scene, const CommonFlags& flags) {
  const AlphaMask background = scene.alpha.inverted();
  if (flags.lstsq) return fit_light_lstsq(scene.bg_normals, scene.bg_shading, &background);
  return fit_light_constrained(scene.bg_normals, scene.bg_shading, &background, fit_options(flags));
}

// ---------------------------------------------------------------- fit-light

struct FitLightArgs {
  fs::path manifest;
  std::optional<fs::path> out;
  bool allow_degenerate = false;
};

int run_fit_light(const FitLightArgs& args, const CommonFlags& flags) {
  const Scene scene = load_scene_with_flags(args.manifest, flags, nullptr);
  const FitReport report = stage("light fit", [&] { return fit_background(scene, flags); });
  json doc = fit_report_to_json(report);
  doc["solver"] = flags.lstsq ? "lstsq" : "constrained";
  const std::string text = doc.dump(2) + "\n";
  if (args.out) {
    io::write_file(*args.out, text);
  } else {
    std::cout << text;
  }
  if (report.degenerate && !args.allow_degenerate) {
    spdlog::error("degenerate light fit: condition number {:.3g} exceeds {:.0e}; the background normals do not "
                  "constrain the light (pass --allow-degenerate to accept)",
                  report.condition_number, kDegenerateCondition);
    return kExitNumerical;
  }
  return kExitOk;
}

// ---------------------------------------------------------------- harmonize

struct HarmonizeArgs {
  fs::path manifest;
  fs::path out_dir;
  std::optional<fs::path> light;
  std::optional<fs::path> edits;
  bool auto_albedo = false;
  std::string refiner = "identity";
  bool no_intermediates = false;
};

// Picks an edit order from the seed and fits the edits toward the
// statistics-matching target.
EditParams auto_albedo_edits(const Scene& scene, std::uint64_t seed) {
  const FloatImage target = statistics_matching_target(scene.fg_albedo, scene.bg_albedo, scene.alpha);
  std::mt19937_64 rng(seed);
  const auto orders = all_edit_orders();
  const EditOrder order = orders[std::uniform_int_distribution<std::size_t>(0, orders.size() - 1)(rng)];
  return fit_edit_params(scene.fg_albedo, target, scene.alpha, order);
}

int run_harmonize(const HarmonizeArgs& args, const CommonFlags& flags) {
  if (args.edits && args.auto_albedo) throw InputError("--edits and --auto-albedo are mutually exclusive");
  double gamma = kDefaultGamma;
  const Scene scene = load_scene_with_flags(args.manifest, flags, &gamma);
  stage("scene", [&] { scene.validate(); });

  HarmonizeOptions options;
  options.fit = fit_options(flags);
  if (args.light) {
    options.light = stage("light", [&] { return light_from_json(read_json_file(*args.light)); });
  } else if (flags.lstsq) {
    const FitReport report = stage("light fit", [&] { return fit_background(scene, flags); });
    if (report.degenerate) spdlog::warn("background light fit is degenerate");
    options.light = report.light;
  }
  if (args.edits) {
    options.edits = stage("edits", [&] { return edit_params_from_json(read_json_file(*args.edits)); });
  } else if (args.auto_albedo) {
    options.edits = stage("albedo fit", [&] { return auto_albedo_edits(scene, flags.seed); });
  }
  const auto refiner = stage("refiner", [&] { return make_refiner(args.refiner); });

  const HarmonizeResult result = stage("harmonize", [&] { return harmonize(scene, *refiner, options); });

  fs::create_directories(args.out_dir);
  io::write_file(args.out_dir / "composite.png", io::encode_srgb_png(result.image, gamma));
  json light_doc = light_to_json(result.light);
  if (result.fit) light_doc["fit"] = fit_report_to_json(*result.fit);
  write_json_file(args.out_dir / "light.json", light_doc);
  if (options.edits) write_json_file(args.out_dir / "edits.json", edit_params_to_json(*options.edits));
  if (!args.no_intermediates) {
    io::write_pfm(args.out_dir / "harmonized_albedo.pfm", result.harmonized_albedo);
    io::write_pfm(args.out_dir / "composite_albedo.pfm", result.composite_albedo);
    io::write_pfm(args.out_dir / "lambertian_shading.pfm", result.lambertian_shading);
    io::write_pfm(args.out_dir / "refined_shading.pfm", result.refined_shading);
    io::write_pfm(args.out_dir / "composite.pfm", result.image);
  }
  spdlog::info("wrote {}", (args.out_dir / "composite.png").string());
  return kExitOk;
}

// ---------------------------------------------------------------- gen-pairs

struct GenPairsArgs {
  fs::path corpus;
  fs::path out_dir;
};

// A corpus entry is a directory holding image, mask, albedo, shading and
// normals (PFM or PNG) and optionally depth.pfm.
std::optional<fs::path> find_layer(const fs::path& dir, const std::string& stem) {
  for (const char* ext : {".pfm", ".png"}) {
    fs::path p = dir / (stem + ext);
    if (fs::exists(p)) return p;
  }
  return std::nullopt;
}

fs::path require_layer(const fs::path& dir, const std::string& stem) {
  auto p = find_layer(dir, stem);
  if (!p) throw InputError("missing " + stem + " in " + dir.string());
  return *p;
}

// Color layers stored as PNG are display referred.
FloatImage read_color_layer(const fs::path& path, double gamma) {
  FloatImage img = io::read_image(path);
  if (path.extension() == ".png") img = srgb_to_linear(img, gamma);
  return img;
}

// FNV-1a, so per-entry seeds do not depend on the standard library.
std::uint64_t stable_hash(std::string_view text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

void generate_entry(const fs::path& entry, const fs::path& out, const CommonFlags& flags) {
  const double gamma = flags.gamma.value_or(kDefaultGamma);
  FloatImage image = read_color_layer(require_layer(entry, "image"), gamma);
  FloatImage albedo = read_color_layer(require_layer(entry, "albedo"), gamma);
  FloatImage shading = read_color_layer(require_layer(entry, "shading"), gamma);
  if (shading.channels() == 3) shading = luminance(shading);
  NormalMap normals = io::read_normals(require_layer(entry, "normals"));
  FloatImage mask_img = io::read_image(require_layer(entry, "mask"));
  AlphaMask mask(mask_img.channel(0));
  DepthMap depth = DepthMap::zeros(image.height(), image.width());
  if (auto p = find_layer(entry, "depth")) depth = DepthMap(io::read_image(*p).channel(0));

  if (flags.resolution && *flags.resolution > 0) {
    const auto [h, w] = fit_long_side(image.height(), image.width(), *flags.resolution);
    if (h != image.height() || w != image.width()) {
      image = resize_bilinear(image, h, w);
      albedo = resize_bilinear(albedo, h, w);
      shading = resize_bilinear(shading, h, w);
      normals = NormalMap::from_image(resize_bilinear(normals.to_image(), h, w), true);
      mask = AlphaMask(resize_nearest(mask.plane(), h, w));
      depth = DepthMap(resize_bilinear(depth.plane(), h, w));
    }
  }

  const PairSample pair = generate_pair(image, mask, albedo, shading, normals, depth);
  const std::uint64_t entry_seed = flags.seed ^ stable_hash(entry.filename().string());
  const EditDraw draw = sample_random_edits(entry_seed);
  const FloatImage edited = apply_edit_sequence(albedo, mask, draw.params, draw.active);

  fs::create_directories(out);
  io::write_pfm_stack(out / "input.pfm", pair.input.stack());
  io::write_pfm(out / "gt_shading.pfm", pair.gt_shading);
  io::write_pfm(out / "gt_image.pfm", pair.gt_image);
  io::write_pfm(out / "albedo.pfm", pair.albedo);
  io::write_pfm(out / "edited_albedo.pfm", edited);
  io::write_png(out / "mask.png", pair.mask.plane());

  json meta;
  meta["id"] = entry.filename().string();
  meta["light"] = light_to_json(pair.fit.light);
  meta["fit"] = fit_report_to_json(pair.fit);
  meta["input_shading_mse"] = loss_mse(pair.input.shading(), pair.gt_shading);
  meta["depth_channel"] = "(1 - mask) * depth";
  meta["refiner_channels"] = {"r", "g", "b", "shading", "nx", "ny", "nz", "depth", "mask"};
  meta["seed"] = entry_seed;
  meta["edits"] = edit_params_to_json(draw.params);
  meta["edits"]["active"] = draw.active.letters();
  write_json_file(out / "meta.json", meta);
}

int run_gen_pairs(const GenPairsArgs& args, const CommonFlags& flags) {
  if (!fs::is_directory(args.corpus)) throw IoError("corpus directory not found: " + args.corpus.string());
  std::vector<fs::path> entries;
  for (const auto& item : fs::directory_iterator(args.corpus)) {
    if (item.is_directory()) entries.push_back(item.path());
  }
  std::sort(entries.begin(), entries.end());
  fs::create_directories(args.out_dir);
  if (entries.empty()) {
    spdlog::warn("corpus {} has no entries; nothing generated", args.corpus.string());
    return kExitOk;
  }

  std::size_t ok = 0;
  bool numerical_only = true;
  for (const auto& entry : entries) {
    const std::string id = entry.filename().string();
    try {
      generate_entry(entry, args.out_dir / id, flags);
      ++ok;
      spdlog::info("pair {} written", id);
    } catch (const NumericalError& e) {
      spdlog::error("entry {}: {}", id, e.what());
    } catch (const Error& e) {
      numerical_only = false;
      spdlog::error("entry {}: {}", id, e.what());
    }
  }
  spdlog::info("{} of {} entries generated", ok, entries.size());
  if (ok == 0) {
    spdlog::error("every corpus entry failed");
    return numerical_only ? kExitNumerical : kExitInput;
  }
  return kExitOk;
}

// ---------------------------------------------------------------- bt-rank

struct BtArgs {
  fs::path csv;
  bool json_output = false;
  bool smoothing = false;
};

int run_bt_rank(const BtArgs& args) {
  std::ifstream in(args.csv, std::ios::binary);
  if (!in) throw IoError("cannot open " + args.csv.string());
  const bt::PairwiseTally tally = bt::ingest_responses(in);
  bt::FitOptions options;
  options.smoothing = args.smoothing;
  const bt::Scores scores = bt::fit(tally, options);
  if (!scores.converged) spdlog::warn("Bradley-Terry fit stopped after {} iterations", scores.iterations);
  const auto rows = bt::rank(tally, scores);
  if (args.json_output) {
    std::cout << bt::to_json(rows).dump(2) << "\n";
  } else {
    std::cout << bt::format_table(rows);
  }
  return kExitOk;
}

// ---------------------------------------------------------------- serve

struct ServeArgs {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::size_t store_cap = 16;
  std::optional<fs::path> store_dir;
  std::string cors_origin = "*";
};

int run_serve(const ServeArgs& args, const CommonFlags& flags) {
  service::ServiceConfig config;
  config.store_capacity = args.store_cap;
  config.store_dir = args.store_dir;
  config.cors_origin = args.cors_origin;
  config.fit = fit_options(flags);
  service::RelightService svc(config);
  httplib::Server server;
  svc.mount(server);

  int port = args.port;
  if (port == 0) {
    port = server.bind_to_any_port(args.host);
  } else if (!server.bind_to_port(args.host, port)) {
    port = -1;
  }
  if (port < 0) throw IoError("cannot bind " + args.host + ":" + std::to_string(args.port));
  // Scripts wait for this line; keep it on stdout and flushed.
  std::cout << "listening on http://" << args.host << ":" << port << std::endl;
  server.listen_after_bind();
  return kExitOk;
}

void configure_logging() {
  auto logger = spdlog::stderr_color_mt("icomp");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::info);
  if (const char* level = std::getenv("IC_LOG")) spdlog::set_level(spdlog::level::from_str(level));
}

int run(int argc, char** argv) {
  CLI::App app{"Intrinsic-image compositing tools"};
  app.require_subcommand(1);

  CommonFlags flags;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--gamma", flags.gamma, "display gamma for PNG layers and output")->check(CLI::PositiveNumber);
    cmd->add_option("--resolution", flags.resolution, "working long side in pixels, 0 keeps native size")
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--seed", flags.seed, "random seed");
    cmd->add_flag("--lstsq", flags.lstsq, "unconstrained least-squares light fit");
    cmd->add_flag("--octant-constraint", flags.octant, "constrain the light to lx, ly, lz, c >= 0");
  };

  FitLightArgs fit_args;
  auto* fit_cmd = app.add_subcommand("fit-light", "fit the background light model");
  fit_cmd->add_option("manifest", fit_args.manifest, "scene manifest JSON")->required();
  fit_cmd->add_option("-o,--out", fit_args.out, "write the report here instead of stdout");
  fit_cmd->add_flag("--allow-degenerate", fit_args.allow_degenerate, "exit 0 on a degenerate fit");
  add_common(fit_cmd);

  HarmonizeArgs harm_args;
  auto* harm_cmd = app.add_subcommand("harmonize", "re-shade and harmonize a composite");
  harm_cmd->add_option("manifest", harm_args.manifest, "scene manifest JSON")->required();
  harm_cmd->add_option("-o,--out", harm_args.out_dir, "output directory")->required();
  harm_cmd->add_option("--light", harm_args.light, "light JSON overriding the background fit");
  harm_cmd->add_option("--edits", harm_args.edits, "albedo edit parameters JSON");
  harm_cmd->add_flag("--auto-albedo", harm_args.auto_albedo, "fit edits toward background albedo statistics");
  harm_cmd->add_option("--refiner", harm_args.refiner, "identity, smooth or external:<cmd>");
  harm_cmd->add_flag("--no-intermediates", harm_args.no_intermediates, "skip the intermediate PFMs");
  add_common(harm_cmd);

  GenPairsArgs pair_args;
  auto* pair_cmd = app.add_subcommand("gen-pairs", "generate self-supervised training pairs");
  pair_cmd->add_option("corpus", pair_args.corpus, "corpus directory")->required();
  pair_cmd->add_option("out", pair_args.out_dir, "output directory")->required();
  add_common(pair_cmd);

  BtArgs bt_args;
  auto* bt_cmd = app.add_subcommand("bt-rank", "Bradley-Terry ranking of pairwise responses");
  bt_cmd->add_option("csv", bt_args.csv, "responses CSV (item_id,method_a,method_b,choice)")->required();
  bt_cmd->add_flag("--json", bt_args.json_output, "print JSON instead of a table");
  bt_cmd->add_flag("--smoothing", bt_args.smoothing, "add 0.5 to every compared pair");

  ServeArgs serve_args;
  auto* serve_cmd = app.add_subcommand("serve", "run the relighting HTTP service");
  serve_cmd->add_option("--host", serve_args.host, "bind address");
  serve_cmd->add_option("--port", serve_args.port, "port, 0 picks a free one")->envname("IC_PORT");
  serve_cmd->add_option("--store-cap", serve_args.store_cap, "scenes kept in memory")
      ->envname("IC_STORE_CAP")
      ->check(CLI::PositiveNumber);
  serve_cmd->add_option("--store-dir", serve_args.store_dir, "persist scenes under this directory");
  serve_cmd->add_option("--cors-origin", serve_args.cors_origin, "Access-Control-Allow-Origin value");
  add_common(serve_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  configure_logging();
  try {
    if (fit_cmd->parsed()) return run_fit_light(fit_args, flags);
    if (harm_cmd->parsed()) return run_harmonize(harm_args, flags);
    if (pair_cmd->parsed()) return run_gen_pairs(pair_args, flags);
    if (bt_cmd->parsed()) return run_bt_rank(bt_args);
    if (serve_cmd->parsed()) return run_serve(serve_args, flags);
  } catch (const NumericalError& e) {
    spdlog::error("{}", e.what());
    return kExitNumerical;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitInput;
  }
  return kExitInput;
}

}  // namespace
}  // namespace icomp::cli

int main(int argc, char** argv) { return icomp::cli::run(argc, argv); }
