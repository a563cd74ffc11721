// Copyright 2026 The intrinsic-compose Authors.
// SPDX-License-Identifier: Apache-2.0

#include "icomp/lighting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "icomp/error.hpp"
#include "icomp/optim.hpp"

namespace icomp {

namespace {

Eigen::Vector4d to_theta(const LightModel& light) {
  return {light.direction.x(), light.direction.y(), light.direction.z(), light.ambient};
}

LightModel from_theta(std::span<const double> theta) {
  LightModel light;
  light.direction = Eigen::Vector3d(theta[0], theta[1], theta[2]);
  light.ambient = theta[3];
  return light;
}

void project_light(std::span<double> theta, LightConstraint constraint) {
  if (constraint == LightConstraint::kOctant) {
    for (int i = 0; i < 3; ++i) theta[i] = std::max(theta[i], 0.0);
  } else {
    theta[2] = std::max(theta[2], 0.0);
  }
  theta[3] = std::max(theta[3], 0.0);
}

void check_normal(const Eigen::Vector3d& n, int index) {
  const double len = n.norm();
  if (!std::isfinite(len) || std::abs(len - 1.0) > kNormalTolerance) {
    throw DomainError("normal at pixel " + std::to_string(index) + " has length " +
                      std::to_string(len));
  }
  if (n.z() < -1e-9) {
    throw DomainError("normal at pixel " + std::to_string(index) +
                      " faces away from the camera (nz = " + std::to_string(n.z()) + ")");
  }
}

}  // namespace

NormalMap::NormalMap(int height, int width, std::vector<Eigen::Vector3d> normals)
    : height_(height), width_(width), normals_(std::move(normals)) {
  if (height < 0 || width < 0 ||
      normals_.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width)) {
    throw DimensionError("normal map data does not match " + std::to_string(height) + "x" +
                         std::to_string(width));
  }
  for (std::size_t i = 0; i < normals_.size(); ++i) check_normal(normals_[i], static_cast<int>(i));
}

NormalMap NormalMap::from_image(const FloatImage& img, bool normalize) {
  require_channels(img, 3, "normal map");
  std::vector<Eigen::Vector3d> normals(img.pixel_count());
  auto d = img.data();
  for (std::size_t i = 0; i < normals.size(); ++i) {
    Eigen::Vector3d n(d[3 * i], d[3 * i + 1], d[3 * i + 2]);
    if (normalize) {
      n.z() = std::max(n.z(), 0.0);
      const double len = n.norm();
      n = len > 1e-12 ? Eigen::Vector3d(n / len) : Eigen::Vector3d(0.0, 0.0, 1.0);
    }
    normals[i] = n;
  }
  return NormalMap(img.height(), img.width(), std::move(normals));
}

NormalMap NormalMap::constant(int height, int width, const Eigen::Vector3d& n) {
  return NormalMap(height, width,
                   std::vector<Eigen::Vector3d>(static_cast<std::size_t>(height) *
                                                    static_cast<std::size_t>(width),
                                                n));
}

FloatImage NormalMap::to_image() const {
  FloatImage out(height_, width_, 3);
  auto d = out.data();
  for (std::size_t i = 0; i < normals_.size(); ++i) {
    d[3 * i] = normals_[i].x();
    d[3 * i + 1] = normals_[i].y();
    d[3 * i + 2] = normals_[i].z();
  }
  return out;
}

bool is_feasible(const LightModel& light, LightConstraint constraint) {
  if (!light.direction.allFinite() || !std::isfinite(light.ambient)) return false;
  if (light.ambient < 0.0 || light.direction.z() < 0.0) return false;
  if (constraint == LightConstraint::kOctant) {
    return light.direction.x() >= 0.0 && light.direction.y() >= 0.0;
  }
  return true;
}

FloatImage render_lambertian(const NormalMap& normals, const LightModel& light) {
  FloatImage out(normals.height(), normals.width(), 1);
  auto n = normals.data();
  auto o = out.data();
  for (std::size_t i = 0; i < n.size(); ++i) {
    o[i] = std::max(0.0, n[i].dot(light.direction) + light.ambient);
  }
  return out;
}

LightingObjective::LightingObjective(const NormalMap& normals, const FloatImage& shading,
                                     const AlphaMask* mask, int stride) {
  require_channels(shading, 1, "shading");
  if (normals.height() != shading.height() || normals.width() != shading.width()) {
    throw DimensionError("normals and shading differ in size");
  }
  if (mask != nullptr) require_same_size(shading, mask->plane(), "fit mask");
  if (stride < 1) throw DomainError("fit stride must be >= 1");

  for (int y = 0; y < shading.height(); y += stride) {
    for (int x = 0; x < shading.width(); x += stride) {
      if (mask != nullptr && !((*mask)(y, x) > 0.5)) continue;
      const double s = shading(y, x);
      if (!std::isfinite(s)) throw DomainError("shading contains a non-finite sample");
      const Eigen::Vector3d& n = normals(y, x);
      const Eigen::Vector4d a(n.x(), n.y(), n.z(), 1.0);
      const Eigen::Matrix4d outer = a * a.transpose();
      full_gram_ += outer;
      if (s > 0.0) {
        lit_gram_ += outer;
        lit_rhs_ += s * a;
        lit_sq_ += s * s;
        lit_rows_.push_back(a);
        lit_values_.push_back(s);
      } else {
        shadow_rows_.push_back(a);
      }
      ++count_;
    }
  }
}

double LightingObjective::value(std::span<const double> theta) const {
  const Eigen::Vector4d t(theta[0], theta[1], theta[2], theta[3]);
  double total = t.dot(lit_gram_ * t) - 2.0 * lit_rhs_.dot(t) + lit_sq_;
  for (const auto& a : shadow_rows_) {
    const double p = a.dot(t);
    if (p > 0.0) total += p * p;
  }
  return total / static_cast<double>(count_);
}

double LightingObjective::value_and_gradient(std::span<const double> theta,
                                             std::span<double> grad) const {
  const Eigen::Vector4d t(theta[0], theta[1], theta[2], theta[3]);
  const Eigen::Vector4d gt = lit_gram_ * t;
  double total = t.dot(gt) - 2.0 * lit_rhs_.dot(t) + lit_sq_;
  Eigen::Vector4d g = 2.0 * (gt - lit_rhs_);
  for (const auto& a : shadow_rows_) {
    const double p = a.dot(t);
    if (p > 0.0) {
      total += p * p;
      g += 2.0 * p * a;
    }
  }
  const double inv = 1.0 / static_cast<double>(count_);
  for (int i = 0; i < 4; ++i) grad[i] = g[i] * inv;
  return total * inv;
}

double LightingObjective::residual_mse(const LightModel& light) const {
  if (count_ == 0) return 0.0;
  const Eigen::Vector4d t = to_theta(light);
  double total = 0.0;
  for (std::size_t i = 0; i < lit_rows_.size(); ++i) {
    const double r = lit_values_[i] - lit_rows_[i].dot(t);
    total += r * r;
  }
  for (const auto& a : shadow_rows_) {
    const double p = std::max(0.0, a.dot(t));
    total += p * p;
  }
  return total / static_cast<double>(count_);
}

double LightingObjective::condition_number() const {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(full_gram_, Eigen::EigenvaluesOnly);
  const auto& ev = eig.eigenvalues();
  const double hi = ev.maxCoeff();
  const double lo = ev.minCoeff();
  if (!(hi > 0.0)) return std::numeric_limits<double>::infinity();
  if (lo <= hi * std::numeric_limits<double>::epsilon()) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

Eigen::Vector4d LightingObjective::solve_ridge(double lambda) const {
  Eigen::Matrix4d ridge = Eigen::Matrix4d::Zero();
  for (int i = 0; i < 3; ++i) ridge(i, i) = lambda * static_cast<double>(count_);

  // Start with every zero pixel as an ordinary least-squares row, then keep
  // only the ones the current solution lights up.
  std::vector<char> active(shadow_rows_.size(), 1);
  Eigen::Vector4d best = Eigen::Vector4d::Zero();
  double best_value = std::numeric_limits<double>::infinity();
  constexpr int kMaxPasses = 64;
  for (int pass = 0; pass < kMaxPasses; ++pass) {
    Eigen::Matrix4d m = lit_gram_ + ridge;
    for (std::size_t i = 0; i < shadow_rows_.size(); ++i) {
      if (active[i]) m += shadow_rows_[i] * shadow_rows_[i].transpose();
    }
    const Eigen::Vector4d theta = m.ldlt().solve(lit_rhs_);
    if (!theta.allFinite()) break;
    const double v = value(std::span<const double>(theta.data(), 4)) +
                     lambda * theta.head<3>().squaredNorm();
    if (v < best_value) {
      best_value = v;
      best = theta;
    }
    bool changed = false;
    for (std::size_t i = 0; i < shadow_rows_.size(); ++i) {
      const char now = shadow_rows_[i].dot(theta) >= 0.0 ? 1 : 0;
      if (now != active[i]) {
        active[i] = now;
        changed = true;
      }
    }
    if (!changed) break;
  }
  return best;
}

FitReport fit_light_lstsq(const NormalMap& normals, const FloatImage& shading,
                          const AlphaMask* mask, int stride) {
  LightingObjective objective(normals, shading, mask, stride);
  if (objective.pixel_count() < 4) {
    throw InsufficientDataError("light fit needs at least 4 usable pixels, got " +
                                std::to_string(objective.pixel_count()));
  }
  const Eigen::Vector4d theta = objective.solve_ridge(kRidgeLambda);
  FitReport report;
  report.light = from_theta(std::span<const double>(theta.data(), 4));
  report.residual_mse = objective.residual_mse(report.light);
  report.iterations = 1;
  report.condition_number = objective.condition_number();
  report.degenerate = !(report.condition_number <= kDegenerateCondition);
  report.pixels = objective.pixel_count();
  return report;
}

FitReport fit_light_constrained(const NormalMap& normals, const FloatImage& shading,
                                const AlphaMask* mask, const FitOptions& options) {
  LightingObjective objective(normals, shading, mask, options.stride);
  if (objective.pixel_count() < 4) {
    throw InsufficientDataError("light fit needs at least 4 usable pixels, got " +
                                std::to_string(objective.pixel_count()));
  }
  const Eigen::Vector4d start = objective.solve_ridge(kRidgeLambda);
  std::vector<double> init(start.data(), start.data() + 4);
  project_light(init, options.constraint);

  const auto result = optim::minimize(
      [&objective](std::span<const double> theta, std::span<double> grad) {
        return objective.value_and_gradient(theta, grad);
      },
      std::move(init),
      [constraint = options.constraint](std::span<double> theta) { project_light(theta, constraint); },
      options.iterations, options.learning_rate);

  FitReport report;
  report.light = from_theta(result.params);
  report.residual_mse = objective.residual_mse(report.light);
  report.iterations = result.iterations;
  report.condition_number = objective.condition_number();
  report.degenerate = !(report.condition_number <= kDegenerateCondition);
  report.pixels = objective.pixel_count();
  return report;
}

LightModel light_from_angles(double azimuth, double elevation, double intensity, double ambient) {
  if (!(intensity >= 0.0)) throw DomainError("light intensity must be >= 0");
  if (!(ambient >= 0.0)) throw DomainError("ambient must be >= 0");
  if (!std::isfinite(azimuth) || !std::isfinite(elevation) || !std::isfinite(intensity) ||
      !std::isfinite(ambient)) {
    throw DomainError("light angles must be finite");
  }
  LightModel light;
  light.direction = intensity * Eigen::Vector3d(std::cos(elevation) * std::sin(azimuth),
                                                std::sin(elevation),
                                                std::cos(elevation) * std::cos(azimuth));
  light.ambient = ambient;
  return light;
}

LightAngles angles_from_light(const LightModel& light) {
  LightAngles out;
  out.ambient = light.ambient;
  out.intensity = light.direction.norm();
  if (out.intensity > 0.0) {
    const Eigen::Vector3d d = light.direction / out.intensity;
    out.elevation = std::asin(std::clamp(d.y(), -1.0, 1.0));
    out.azimuth = std::atan2(d.x(), d.z());
  }
  return out;
}

}  // namespace icomp
