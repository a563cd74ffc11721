// Copyright 2026 The intrinsic-compose Authors.
// SPDX-License-Identifier: Apache-2.0

#include "icomp/optim.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "icomp/error.hpp"

namespace icomp::optim {

AdamState::AdamState(std::vector<double> initial, AdamConfig cfg)
    : params(std::move(initial)),
      first_moment(params.size(), 0.0),
      second_moment(params.size(), 0.0),
      config(cfg) {
  if (!(config.beta1 >= 0.0 && config.beta1 < 1.0) || !(config.beta2 >= 0.0 && config.beta2 < 1.0)) {
    throw DomainError("Adam betas must lie in [0, 1)");
  }
  if (!(config.epsilon > 0.0)) throw DomainError("Adam epsilon must be positive");
}

AdamState adam_step(AdamState state, std::span<const double> gradient) {
  if (gradient.size() != state.params.size()) {
    throw DomainError("adam_step: gradient has " + std::to_string(gradient.size()) +
                      " entries, parameters have " + std::to_string(state.params.size()));
  }
  for (std::size_t i = 0; i < gradient.size(); ++i) {
    if (!std::isfinite(gradient[i])) {
      throw DomainError("adam_step: non-finite gradient component " + std::to_string(i));
    }
  }
  const auto& cfg = state.config;
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < gradient.size(); ++i) {
    const double g = gradient[i];
    state.first_moment[i] = cfg.beta1 * state.first_moment[i] + (1.0 - cfg.beta1) * g;
    state.second_moment[i] = cfg.beta2 * state.second_moment[i] + (1.0 - cfg.beta2) * g * g;
    const double m_hat = state.first_moment[i] / correction1;
    const double v_hat = state.second_moment[i] / correction2;
    state.params[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
  }
  return state;
}

MinimizeResult minimize(const Objective& objective, std::vector<double> init,
                        const Projection& project, int iterations, double learning_rate) {
  AdamConfig cfg;
  cfg.learning_rate = learning_rate;
  return minimize(objective, std::move(init), project, iterations, cfg);
}

MinimizeResult minimize(const Objective& objective, std::vector<double> init,
                        const Projection& project, int iterations, const AdamConfig& config) {
  std::vector<double> grad(init.size(), 0.0);
  double value = objective(init, grad);
  if (!std::isfinite(value)) throw DomainError("minimize: objective is non-finite at the initial point");

  MinimizeResult best{init, value, 0};
  AdamState state(std::move(init), config);
  for (int it = 1; it <= iterations; ++it) {
    state = adam_step(std::move(state), grad);
    if (project) project(state.params);
    value = objective(state.params, grad);
    if (!std::isfinite(value)) break;
    if (value < best.value) {
      best.params = state.params;
      best.value = value;
    }
    best.iterations = it;
    bool all_zero = std::all_of(grad.begin(), grad.end(), [](double g) { return g == 0.0; });
    if (all_zero) break;
  }
  return best;
}

std::vector<double> numeric_gradient(const std::function<double(std::span<const double>)>& f,
                                     std::span<const double> x, double h) {
  std::vector<double> point(x.begin(), x.end());
  std::vector<double> out(x.size(), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = point[i];
    point[i] = saved + h;
    const double plus = f(point);
    point[i] = saved - h;
    const double minus = f(point);
    point[i] = saved;
    if (!std::isfinite(plus) || !std::isfinite(minus)) {
      throw DomainError("numeric_gradient: non-finite evaluation at coordinate " + std::to_string(i));
    }
    out[i] = (plus - minus) / (2.0 * h);
  }
  return out;
}

double max_relative_difference(std::span<const double> a, std::span<const double> b, double floor) {
  if (a.size() != b.size()) throw DomainError("max_relative_difference: size mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

}  // namespace icomp::optim
