// Copyright 2026 The intrinsic-compose Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "icomp/edits.hpp"
#include "icomp/image.hpp"
#include "icomp/lighting.hpp"

namespace icomp {

/// All layers of a composite, already placed on a common canvas: foreground
/// and background images with their intrinsic decompositions, geometry and
/// the foreground mask. Images are linear RGB.
struct Scene {
  FloatImage fg_image;
  FloatImage bg_image;
  FloatImage fg_albedo;
  FloatImage bg_albedo;
  FloatImage fg_shading;
  FloatImage bg_shading;
  NormalMap fg_normals;
  NormalMap bg_normals;
  DepthMap bg_depth;
  AlphaMask alpha;

  int height() const { return alpha.height(); }
  int width() const { return alpha.width(); }

  /// Throws on size/channel mismatches or negative layers. Logs a warning when
  /// albedo * shading departs from an image by more than 5% mean relative
  /// error.
  void validate() const;
};

/// The refiner sees 9 channels per pixel in this order.
namespace refiner_channel {
inline constexpr int kRed = 0;
inline constexpr int kGreen = 1;
inline constexpr int kBlue = 2;
inline constexpr int kShading = 3;
inline constexpr int kNormalX = 4;
inline constexpr int kNormalY = 5;
inline constexpr int kNormalZ = 6;
inline constexpr int kDepth = 7;
inline constexpr int kMask = 8;
inline constexpr int kCount = 9;
}  // namespace refiner_channel

class RefinerInput {
 public:
  RefinerInput() = default;
  explicit RefinerInput(FloatImage stack);

  const FloatImage& stack() const { return stack_; }
  int height() const { return stack_.height(); }
  int width() const { return stack_.width(); }
  FloatImage shading() const { return stack_.channel(refiner_channel::kShading); }
  FloatImage mask() const { return stack_.channel(refiner_channel::kMask); }
  FloatImage rgb() const;

 private:
  FloatImage stack_;
};

/// Maps a refiner input to a refined single-channel composite shading.
class Refiner {
 public:
  virtual ~Refiner() = default;
  virtual FloatImage run(const RefinerInput& input) const = 0;
  virtual std::string name() const = 0;
};

/// Returns the Lambertian composite shading unchanged.
class IdentityRefiner final : public Refiner {
 public:
  FloatImage run(const RefinerInput& input) const override;
  std::string name() const override { return "identity"; }
};

/// Smooths the shading inside the mask with weights that drop across albedo
/// edges, so shading does not bleed over material boundaries.
class SmoothRefiner final : public Refiner {
 public:
  explicit SmoothRefiner(int iterations = 8, double albedo_sigma = 0.1)
      : iterations_(iterations), albedo_sigma_(albedo_sigma) {}
  FloatImage run(const RefinerInput& input) const override;
  std::string name() const override { return "smooth"; }

 private:
  int iterations_;
  double albedo_sigma_;
};

/// Runs `<command> <input.pfm> <output.pfm>` in a scratch directory. The input
/// is the 9-plane PFM stack, the output a single-channel PFM.
class ExternalRefiner final : public Refiner {
 public:
  explicit ExternalRefiner(std::string command) : command_(std::move(command)) {}
  FloatImage run(const RefinerInput& input) const override;
  std::string name() const override { return "external:" + command_; }

 private:
  std::string command_;
};

/// "identity", "smooth" or "external:<command>".
std::unique_ptr<Refiner> make_refiner(const std::string& spec);

/// alpha * render(fg_normals, light) + (1 - alpha) * bg_shading
FloatImage initial_composite_shading(const Scene& scene, const LightModel& light);

/// alpha-blend of two normal fields, renormalized; zero vectors become (0,0,1).
NormalMap blend_normals(const NormalMap& fg, const NormalMap& bg, const AlphaMask& alpha);

/// Background depth with the foreground region faded out: (1 - alpha) * depth.
FloatImage composite_depth(const DepthMap& depth, const AlphaMask& alpha);

RefinerInput build_refiner_input(const Scene& scene, const FloatImage& composite_shading,
                                 const FloatImage& composite_albedo);
RefinerInput assemble_refiner_input(const FloatImage& composite_albedo, const FloatImage& composite_shading,
                                    const NormalMap& normals, const FloatImage& depth, const AlphaMask& alpha);

double loss_mse(const FloatImage& pred, const FloatImage& gt);

inline constexpr int kDefaultScales = 4;

/// Sum over scales m = 0..scales-1 (m halvings) of MSE(dx) + MSE(dy).
double loss_multiscale_gradient(const FloatImage& pred, const FloatImage& gt, int scales = kDefaultScales);

struct LossBreakdown {
  double shading = 0.0;
  double image = 0.0;
  double shading_gradient = 0.0;
  double image_gradient = 0.0;
  double total() const { return shading + image + shading_gradient + image_gradient; }
};

LossBreakdown loss_components(const FloatImage& pred_shading, const FloatImage& gt_shading,
                              const FloatImage& albedo, int scales = kDefaultScales);

/// Shading MSE + image MSE + both multi-scale gradient terms, unit weights.
double loss_total(const FloatImage& pred_shading, const FloatImage& gt_shading, const FloatImage& albedo,
                  int scales = kDefaultScales);

/// d loss_mse / d pred.
FloatImage loss_mse_gradient(const FloatImage& pred, const FloatImage& gt);
/// d loss_multiscale_gradient / d pred.
FloatImage loss_multiscale_gradient_gradient(const FloatImage& pred, const FloatImage& gt,
                                             int scales = kDefaultScales);
/// d loss_total / d pred_shading.
FloatImage loss_total_gradient(const FloatImage& pred_shading, const FloatImage& gt_shading,
                               const FloatImage& albedo, int scales = kDefaultScales);

/// A self-supervised training pair.
struct PairSample {
  RefinerInput input;
  FloatImage gt_shading;
  FloatImage gt_image;
  FloatImage albedo;
  AlphaMask mask;
  FitReport fit;
};

inline constexpr std::size_t kMinPairPixels = 64;

/// Fits light on the masked region, renders it there, composites the render
/// onto the original shading and packs the refiner input. The original
/// shading is the target.
PairSample generate_pair(const FloatImage& image, const AlphaMask& mask, const FloatImage& albedo,
                         const FloatImage& shading, const NormalMap& normals, const DepthMap& depth);

/// Runs the refiner and checks its output (size, finiteness, >= 0).
FloatImage refine(const RefinerInput& input, const Refiner& refiner);

struct HarmonizeOptions {
  std::optional<LightModel> light;  // overrides the background fit
  std::optional<EditParams> edits;  // applied to the foreground albedo
  FitOptions fit;
};

struct HarmonizeResult {
  FloatImage image;               // linear RGB composite
  FloatImage harmonized_albedo;   // foreground albedo after edits
  FloatImage composite_albedo;
  FloatImage lambertian_shading;  // initial composite shading
  FloatImage refined_shading;
  LightModel light;
  std::optional<FitReport> fit;   // absent when the light was supplied
};

/// Albedo edits, background light fit, Lambertian composite shading,
/// refinement, reconstruction.
HarmonizeResult harmonize(const Scene& scene, const Refiner& refiner, const HarmonizeOptions& options = {});

}  // namespace icomp
