// Copyright 2026 The intrinsic-compose Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "icomp/image.hpp"

namespace icomp {

/// Camera-space unit normals, one per pixel, with nz >= 0 pointing toward the
/// camera.
class NormalMap {
 public:
  NormalMap() = default;
  NormalMap(int height, int width, std::vector<Eigen::Vector3d> normals);
  /// Interprets a 3-channel image as (nx, ny, nz). When `normalize` is set,
  /// vectors are rescaled to unit length first (quantized sources).
  static NormalMap from_image(const FloatImage& img, bool normalize = false);
  static NormalMap constant(int height, int width, const Eigen::Vector3d& n);

  int height() const { return height_; }
  int width() const { return width_; }
  const Eigen::Vector3d& operator()(int y, int x) const {
    return normals_[static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
                    static_cast<std::size_t>(x)];
  }
  std::span<const Eigen::Vector3d> data() const { return normals_; }
  FloatImage to_image() const;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<Eigen::Vector3d> normals_;
};

inline constexpr double kNormalTolerance = 1e-3;

/// Directional light plus ambient term. The direction is not normalized: its
/// length is the light intensity.
struct LightModel {
  Eigen::Vector3d direction = Eigen::Vector3d::Zero();
  double ambient = 0.0;
};

enum class LightConstraint {
  kHemisphere,  // lz >= 0, c >= 0
  kOctant,      // lx, ly, lz >= 0, c >= 0
};

bool is_feasible(const LightModel& light, LightConstraint constraint);

struct FitOptions {
  int iterations = 500;
  double learning_rate = 1e-2;
  LightConstraint constraint = LightConstraint::kHemisphere;
  int stride = 1;
};

struct FitReport {
  LightModel light;
  double residual_mse = 0.0;
  int iterations = 0;
  bool degenerate = false;
  double condition_number = 0.0;
  std::size_t pixels = 0;
};

inline constexpr double kRidgeLambda = 1e-6;
inline constexpr double kDegenerateCondition = 1e8;

/// max(0, n . l + c) per pixel.
FloatImage render_lambertian(const NormalMap& normals, const LightModel& light);

/// Least-squares lighting objective over the usable pixels of a shading map,
/// parameterized as theta = (lx, ly, lz, c).
///
/// Lit pixels (shading > 0) contribute (S - n.l - c)^2. Pixels with shading
/// exactly 0 are treated as clamped by the renderer and only contribute
/// max(0, n.l + c)^2, which makes the fit the inverse of render_lambertian.
/// With no zero pixels this is the plain linear least-squares problem.
/// The value is the mean over usable pixels.
class LightingObjective {
 public:
  LightingObjective(const NormalMap& normals, const FloatImage& shading, const AlphaMask* mask,
                    int stride = 1);

  std::size_t pixel_count() const { return count_; }
  double value(std::span<const double> theta) const;
  double value_and_gradient(std::span<const double> theta, std::span<double> grad) const;
  /// Same objective evaluated pixel by pixel; no cancellation, used for the
  /// reported residual.
  double residual_mse(const LightModel& light) const;

  /// lambda_max / lambda_min of sum(a a^T), a = (n, 1), over usable pixels.
  double condition_number() const;

  /// Ridge-regularized minimizer (lambda on the direction components only).
  /// Zero-shading pixels are handled by iterating on the set of those
  /// predicted positive.
  Eigen::Vector4d solve_ridge(double lambda) const;

 private:
  Eigen::Matrix4d lit_gram_ = Eigen::Matrix4d::Zero();
  Eigen::Vector4d lit_rhs_ = Eigen::Vector4d::Zero();
  double lit_sq_ = 0.0;
  Eigen::Matrix4d full_gram_ = Eigen::Matrix4d::Zero();
  std::vector<Eigen::Vector4d> shadow_rows_;
  std::vector<Eigen::Vector4d> lit_rows_;
  std::vector<double> lit_values_;
  std::size_t count_ = 0;
};

/// Projected Adam on the lighting objective, started from the ridge solution
/// projected onto the feasible set.
FitReport fit_light_constrained(const NormalMap& normals, const FloatImage& shading,
                                const AlphaMask* mask = nullptr, const FitOptions& options = {});

/// Closed-form ridge least squares, no positivity constraints.
FitReport fit_light_lstsq(const NormalMap& normals, const FloatImage& shading,
                          const AlphaMask* mask = nullptr, int stride = 1);

/// l = intensity * (cos e sin a, sin e, cos e cos a), c = ambient.
LightModel light_from_angles(double azimuth, double elevation, double intensity, double ambient);

struct LightAngles {
  double azimuth = 0.0;
  double elevation = 0.0;
  double intensity = 0.0;
  double ambient = 0.0;
};

/// Inverse of light_from_angles; a zero direction maps to zero angles.
LightAngles angles_from_light(const LightModel& light);

}  // namespace icomp
