// Copyright 2026 The intrinsic-compose Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <utility>
#include <vector>

#include "icomp/image.hpp"

// Scalar reference implementations of the reshading losses, written against
// plain nested vectors and sharing no code with the library.
namespace icomp::testing {

using Grid = std::vector<std::vector<std::vector<double>>>;  // [y][x][c]

inline Grid to_grid(const FloatImage& img) {
  Grid g(static_cast<std::size_t>(img.height()),
         std::vector<std::vector<double>>(static_cast<std::size_t>(img.width()),
                                          std::vector<double>(static_cast<std::size_t>(img.channels()))));
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < img.channels(); ++c) g[y][x][c] = img(y, x, c);
  return g;
}

inline double oracle_mse(const Grid& a, const Grid& b) {
  double sum = 0.0;
  double n = 0.0;
  for (std::size_t y = 0; y < a.size(); ++y)
    for (std::size_t x = 0; x < a[y].size(); ++x)
      for (std::size_t c = 0; c < a[y][x].size(); ++c) {
        sum += (a[y][x][c] - b[y][x][c]) * (a[y][x][c] - b[y][x][c]);
        n += 1.0;
      }
  return sum / n;
}

inline Grid oracle_half(const Grid& g) {
  const std::size_t h = g.size();
  const std::size_t w = g[0].size();
  Grid out((h + 1) / 2, std::vector<std::vector<double>>((w + 1) / 2, std::vector<double>(g[0][0].size())));
  for (std::size_t y = 0; y < out.size(); ++y)
    for (std::size_t x = 0; x < out[0].size(); ++x)
      for (std::size_t c = 0; c < g[0][0].size(); ++c) {
        const std::size_t y1 = std::min(2 * y + 1, h - 1);
        const std::size_t x1 = std::min(2 * x + 1, w - 1);
        out[y][x][c] = (g[2 * y][2 * x][c] + g[2 * y][x1][c] + g[y1][2 * x][c] + g[y1][x1][c]) / 4.0;
      }
  return out;
}

// Forward differences; the last column/row has no neighbour and reads 0.
inline std::pair<Grid, Grid> oracle_diff(const Grid& g) {
  Grid dx = g;
  Grid dy = g;
  for (std::size_t y = 0; y < g.size(); ++y)
    for (std::size_t x = 0; x < g[0].size(); ++x)
      for (std::size_t c = 0; c < g[0][0].size(); ++c) {
        dx[y][x][c] = x + 1 < g[0].size() ? g[y][x + 1][c] - g[y][x][c] : 0.0;
        dy[y][x][c] = y + 1 < g.size() ? g[y + 1][x][c] - g[y][x][c] : 0.0;
      }
  return {dx, dy};
}

inline double oracle_grad_loss(Grid p, Grid g, int scales) {
  double total = 0.0;
  for (int m = 0; m < scales; ++m) {
    if (m > 0) {
      p = oracle_half(p);
      g = oracle_half(g);
    }
    const auto [pdx, pdy] = oracle_diff(p);
    const auto [gdx, gdy] = oracle_diff(g);
    total += oracle_mse(pdx, gdx) + oracle_mse(pdy, gdy);
  }
  return total;
}

inline Grid oracle_image(const Grid& albedo, const Grid& shading) {
  Grid out = albedo;
  for (std::size_t y = 0; y < albedo.size(); ++y)
    for (std::size_t x = 0; x < albedo[0].size(); ++x)
      for (std::size_t c = 0; c < 3; ++c) out[y][x][c] = albedo[y][x][c] * shading[y][x][0];
  return out;
}

inline double oracle_total(const FloatImage& ps, const FloatImage& gs, const FloatImage& a, int scales) {
  const Grid p = to_grid(ps), g = to_grid(gs), al = to_grid(a);
  const Grid pi = oracle_image(al, p), gi = oracle_image(al, g);
  return oracle_mse(p, g) + oracle_mse(pi, gi) + oracle_grad_loss(p, g, scales) + oracle_grad_loss(pi, gi, scales);
}

}  // namespace icomp::testing
