// Copyright 2026 The intrinsic-compose Authors.
// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <numbers>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "icomp/error.hpp"
#include "icomp/lighting.hpp"
#include "icomp/optim.hpp"
#include "synth.hpp"

namespace icomp {
namespace {

using testing::Rng;
using testing::uniform;

Eigen::Vector4d theta_of(const LightModel& l) {
  return Eigen::Vector4d(l.direction.x(), l.direction.y(), l.direction.z(), l.ambient);
}

double light_error(const LightModel& a, const LightModel& b) { return (theta_of(a) - theta_of(b)).norm(); }

// Independent least-squares oracle: stack rows (n, 1) and solve by QR.
Eigen::Vector4d qr_oracle(const NormalMap& normals, const FloatImage& shading) {
  const int n = normals.height() * normals.width();
  Eigen::MatrixXd a(n, 4);
  Eigen::VectorXd b(n);
  int row = 0;
  for (int y = 0; y < normals.height(); ++y) {
    for (int x = 0; x < normals.width(); ++x, ++row) {
      a.row(row) << normals(y, x).transpose(), 1.0;
      b(row) = shading(y, x);
    }
  }
  return a.colPivHouseholderQr().solve(b);
}

TEST(NormalMap, RejectsNonUnitAndBackFacing) {
  EXPECT_THROW(NormalMap(1, 1, {Eigen::Vector3d(0, 0, 2)}), DomainError);
  EXPECT_THROW(NormalMap(1, 1, {Eigen::Vector3d(0, 0.6, -0.8)}), DomainError);
  EXPECT_THROW(NormalMap(1, 2, {Eigen::Vector3d(0, 0, 1)}), DimensionError);
  FloatImage raw(1, 1, 3, std::vector<double>{0.0, 0.0, 3.0});
  EXPECT_NO_THROW(NormalMap::from_image(raw, true));
  EXPECT_THROW(NormalMap::from_image(raw, false), DomainError);
}

TEST(Render, MatchesClampedDotProduct) {
  Rng rng(1);
  const NormalMap normals = testing::random_hemisphere_normals(6, 6, rng);
  LightModel light{Eigen::Vector3d(0.4, -0.9, 0.2), 0.1};
  const FloatImage s = render_lambertian(normals, light);
  for (int y = 0; y < 6; ++y) {
    for (int x = 0; x < 6; ++x) {
      const auto& n = normals(y, x);
      const double dot = n.x() * 0.4 + n.y() * -0.9 + n.z() * 0.2 + 0.1;
      EXPECT_EQ(s(y, x), std::max(0.0, dot));
    }
  }
}

TEST(LeastSquares, MatchesQrOracleOnUnclampedData) {
  Rng rng(2);
  const NormalMap normals = testing::random_hemisphere_normals(16, 16, rng);
  FloatImage shading(16, 16, 1);
  for (double& v : shading.data()) v = uniform(rng, 0.1, 2.0);
  const FitReport r = fit_light_lstsq(normals, shading);
  const Eigen::Vector4d oracle = qr_oracle(normals, shading);
  // The ridge term is tiny relative to the normalized Gram matrix.
  EXPECT_LT((theta_of(r.light) - oracle).norm(), 1e-5);
  EXPECT_EQ(r.pixels, 256u);
  EXPECT_FALSE(r.degenerate);
}

TEST(LeastSquares, RecoversLightThroughShadows) {
  // Zero ambient and a grazing light leave many pixels clamped at zero.
  Rng rng(3);
  const NormalMap normals = testing::random_hemisphere_normals(32, 32, rng);
  const LightModel truth{Eigen::Vector3d(0.9, 0.3, 0.1), 0.0};
  const FloatImage s = render_lambertian(normals, truth);
  std::size_t zeros = 0;
  for (double v : s.data()) zeros += v == 0.0;
  ASSERT_GT(zeros, 100u);
  EXPECT_LT(light_error(fit_light_lstsq(normals, s).light, truth), 1e-4);
  EXPECT_LT(light_error(fit_light_constrained(normals, s).light, truth), 1e-3);
}

TEST(Constrained, RecoversFeasibleLight) {
  Rng rng(4);
  for (int trial = 0; trial < 5; ++trial) {
    const NormalMap normals = testing::random_hemisphere_normals(24, 24, rng);
    const LightModel truth = testing::random_feasible_light(rng);
    const FloatImage s = render_lambertian(normals, truth);
    const FitReport r = fit_light_constrained(normals, s);
    EXPECT_LT(light_error(r.light, truth), 1e-3) << "trial " << trial;
    EXPECT_TRUE(is_feasible(r.light, LightConstraint::kHemisphere));
  }
}

TEST(Constrained, StaysFeasibleWhenOptimumIsNot) {
  // Shading generated by a light behind the surface: the unconstrained
  // optimum has lz < 0, so the constrained fit must sit on lz = 0.
  Rng rng(5);
  const NormalMap normals = testing::random_hemisphere_normals(24, 24, rng);
  FloatImage s(24, 24, 1);
  for (int y = 0; y < 24; ++y) {
    for (int x = 0; x < 24; ++x) s(y, x) = 1.5 - 0.8 * normals(y, x).z() + 0.1 * normals(y, x).x();
  }
  const FitReport free_fit = fit_light_lstsq(normals, s);
  ASSERT_LT(free_fit.light.direction.z(), 0.0);
  const FitReport r = fit_light_constrained(normals, s);
  EXPECT_TRUE(is_feasible(r.light, LightConstraint::kHemisphere));
  EXPECT_NEAR(r.light.direction.z(), 0.0, 1e-12);
  EXPECT_GE(r.residual_mse, free_fit.residual_mse);
}

TEST(Constrained, OctantConstraintProjectsEveryComponent) {
  Rng rng(6);
  const NormalMap normals = testing::random_hemisphere_normals(20, 20, rng);
  const LightModel truth{Eigen::Vector3d(-0.5, 0.4, 0.6), 0.3};
  FitOptions options;
  options.constraint = LightConstraint::kOctant;
  const FitReport r = fit_light_constrained(normals, render_lambertian(normals, truth), nullptr, options);
  EXPECT_TRUE(is_feasible(r.light, LightConstraint::kOctant));
  EXPECT_EQ(r.light.direction.x(), 0.0);
}

TEST(Objective, GradientMatchesCentralDifferences) {
  Rng rng(7);
  const NormalMap normals = testing::random_hemisphere_normals(12, 12, rng);
  const FloatImage s = render_lambertian(normals, LightModel{Eigen::Vector3d(0.7, 0.1, 0.3), 0.05});
  const LightingObjective objective(normals, s, nullptr);
  for (int k = 0; k < 10; ++k) {
    const std::vector<double> theta{uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, 0, 1),
                                    uniform(rng, 0, 1)};
    std::vector<double> grad(4);
    objective.value_and_gradient(theta, grad);
    const auto numeric =
        optim::numeric_gradient([&](std::span<const double> t) { return objective.value(t); }, theta, 1e-6);
    EXPECT_LT(optim::max_relative_difference(grad, numeric, 1e-6), 1e-4);
  }
}

TEST(Objective, MaskSelectsPixels) {
  Rng rng(8);
  const NormalMap normals = testing::random_hemisphere_normals(8, 8, rng);
  const FloatImage s(8, 8, 1, 0.5);
  const AlphaMask mask = testing::disc_mask(8, 8, 3.5, 3.5, 2.0);
  EXPECT_EQ(LightingObjective(normals, s, &mask).pixel_count(), mask.active_count());
  EXPECT_EQ(LightingObjective(normals, s, nullptr, 2).pixel_count(), 16u);
}

TEST(Degeneracy, FlatWallIsFlagged) {
  const NormalMap flat = NormalMap::constant(16, 16, Eigen::Vector3d(0, 0, 1));
  const FloatImage s(16, 16, 1, 0.8);
  const FitReport r = fit_light_lstsq(flat, s);
  EXPECT_TRUE(r.degenerate);
  EXPECT_GT(r.condition_number, kDegenerateCondition);
  EXPECT_TRUE(fit_light_constrained(flat, s).degenerate);
}

TEST(Degeneracy, TooFewPixelsThrows) {
  Rng rng(9);
  const NormalMap normals = testing::random_hemisphere_normals(4, 4, rng);
  const AlphaMask mask = testing::disc_mask(4, 4, 0, 0, 1.0);  // 3 pixels
  EXPECT_THROW(fit_light_lstsq(normals, FloatImage(4, 4, 1, 1.0), &mask), InsufficientDataError);
  EXPECT_THROW(fit_light_constrained(normals, FloatImage(4, 4, 1, 1.0), &mask), InsufficientDataError);
}

TEST(Angles, RoundTrip) {
  const LightModel l = light_from_angles(0.4, 0.3, 1.2, 0.25);
  EXPECT_NEAR(l.direction.norm(), 1.2, 1e-12);
  EXPECT_NEAR(l.direction.x(), 1.2 * std::cos(0.3) * std::sin(0.4), 1e-12);
  EXPECT_NEAR(l.direction.y(), 1.2 * std::sin(0.3), 1e-12);
  const LightAngles a = angles_from_light(l);
  EXPECT_NEAR(a.azimuth, 0.4, 1e-12);
  EXPECT_NEAR(a.elevation, 0.3, 1e-12);
  EXPECT_NEAR(a.intensity, 1.2, 1e-12);
  EXPECT_EQ(a.ambient, 0.25);
  const LightAngles zero = angles_from_light(LightModel{});
  EXPECT_EQ(zero.intensity, 0.0);
}

TEST(Feasibility, Boxes) {
  EXPECT_TRUE(is_feasible(LightModel{Eigen::Vector3d(-1, 0, 0), 0}, LightConstraint::kHemisphere));
  EXPECT_FALSE(is_feasible(LightModel{Eigen::Vector3d(-1, 0, 0), 0}, LightConstraint::kOctant));
  EXPECT_FALSE(is_feasible(LightModel{Eigen::Vector3d(0, 0, -0.1), 0}, LightConstraint::kHemisphere));
  EXPECT_FALSE(is_feasible(LightModel{Eigen::Vector3d(0, 0, 1), -0.1}, LightConstraint::kHemisphere));
}

}  // namespace
}  // namespace icomp
