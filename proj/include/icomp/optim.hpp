// Copyright 2026 The intrinsic-compose Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <span>
#include <vector>

namespace icomp::optim {

struct AdamConfig {
  double learning_rate = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Parameters plus first/second moment estimates (Kingma & Ba).
struct AdamState {
  std::vector<double> params;
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  long step_count = 0;
  AdamConfig config;

  AdamState() = default;
  AdamState(std::vector<double> initial, AdamConfig cfg);
};

/// One bias-corrected Adam update. Throws DomainError on a non-finite gradient
/// or a gradient whose size differs from the parameters.
AdamState adam_step(AdamState state, std::span<const double> gradient);

/// Writes the gradient into `grad` (same size as the parameters) and returns
/// the objective value.
using Objective = std::function<double(std::span<const double> params, std::span<double> grad)>;

/// Maps a parameter vector onto the feasible set in place.
using Projection = std::function<void(std::span<double> params)>;

struct MinimizeResult {
  std::vector<double> params;
  double value = 0.0;
  int iterations = 0;
};

/// Projected Adam: step, project, evaluate. Returns the best feasible point
/// seen, so the result is never worse than `init`.
MinimizeResult minimize(const Objective& objective, std::vector<double> init,
                        const Projection& project, int iterations, double learning_rate);

MinimizeResult minimize(const Objective& objective, std::vector<double> init,
                        const Projection& project, int iterations, const AdamConfig& config);

/// Central differences, one coordinate at a time.
std::vector<double> numeric_gradient(const std::function<double(std::span<const double>)>& f,
                                     std::span<const double> x, double h = 1e-5);

/// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor)
double max_relative_difference(std::span<const double> a, std::span<const double> b,
                               double floor = 1e-8);

}  // namespace icomp::optim
