// Copyright 2026 The intrinsic-compose Authors.
// SPDX-License-Identifier: Apache-2.0

#include "icomp/image.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "icomp/error.hpp"

namespace icomp {

namespace {

std::string shape_string(const FloatImage& img) {
  std::ostringstream out;
  out << img.height() << "x" << img.width() << "x" << img.channels();
  return out.str();
}

void check_dims(int height, int width, int channels) {
  if (height < 0 || width < 0 || channels < 1) {
    throw DimensionError("invalid image dimensions " + std::to_string(height) + "x" +
                         std::to_string(width) + "x" + std::to_string(channels));
  }
}

}  // namespace

FloatImage::FloatImage(int height, int width, int channels, double fill)
    : height_(height), width_(width), channels_(channels) {
  check_dims(height, width, channels);
  data_.assign(static_cast<std::size_t>(height) * static_cast<std::size_t>(width) *
                   static_cast<std::size_t>(channels),
               fill);
}

FloatImage::FloatImage(int height, int width, int channels, std::vector<double> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
  check_dims(height, width, channels);
  const auto expected = static_cast<std::size_t>(height) * static_cast<std::size_t>(width) *
                        static_cast<std::size_t>(channels);
  if (data_.size() != expected) {
    throw DimensionError("image data holds " + std::to_string(data_.size()) +
                         " samples, expected " + std::to_string(expected));
  }
}

FloatImage FloatImage::channel(int c) const {
  if (c < 0 || c >= channels_) {
    throw DimensionError("channel " + std::to_string(c) + " out of range for " +
                         shape_string(*this));
  }
  FloatImage out(height_, width_, 1);
  for (std::size_t i = 0; i < pixel_count(); ++i) {
    out.data_[i] = data_[i * static_cast<std::size_t>(channels_) + static_cast<std::size_t>(c)];
  }
  return out;
}

AlphaMask::AlphaMask(FloatImage plane) : plane_(std::move(plane)) {
  require_channels(plane_, 1, "alpha mask");
  for (double v : plane_.data()) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw DomainError("alpha mask sample " + std::to_string(v) + " outside [0, 1]");
    }
  }
}

AlphaMask AlphaMask::constant(int height, int width, double value) {
  return AlphaMask(FloatImage(height, width, 1, value));
}

AlphaMask AlphaMask::inverted() const {
  FloatImage out(plane_.height(), plane_.width(), 1);
  auto src = plane_.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = 1.0 - src[i];
  return AlphaMask(std::move(out));
}

std::size_t AlphaMask::active_count() const {
  auto d = plane_.data();
  return static_cast<std::size_t>(std::count_if(d.begin(), d.end(), [](double v) { return v > 0.5; }));
}

DepthMap::DepthMap(FloatImage plane) : plane_(std::move(plane)) {
  require_channels(plane_, 1, "depth map");
  require_nonnegative(plane_, "depth map");
}

DepthMap DepthMap::zeros(int height, int width) { return DepthMap(FloatImage(height, width, 1)); }

void require_finite(const FloatImage& img, std::string_view what) {
  for (double v : img.data()) {
    if (!std::isfinite(v)) throw DomainError(std::string(what) + " contains a non-finite sample");
  }
}

void require_nonnegative(const FloatImage& img, std::string_view what) {
  require_finite(img, what);
  auto d = img.data();
  if (d.empty()) return;
  const double lo = *std::min_element(d.begin(), d.end());
  if (lo < 0.0) {
    throw DomainError(std::string(what) + " has negative sample (min " + std::to_string(lo) + ")");
  }
}

void require_channels(const FloatImage& img, int channels, std::string_view what) {
  if (img.channels() != channels) {
    throw DimensionError(std::string(what) + " must have " + std::to_string(channels) +
                         " channel(s), got " + shape_string(img));
  }
}

void require_same_size(const FloatImage& a, const FloatImage& b, std::string_view what) {
  if (!a.same_size(b)) {
    throw DimensionError(std::string(what) + ": size mismatch " + shape_string(a) + " vs " +
                         shape_string(b));
  }
}

FloatImage srgb_to_linear(const FloatImage& img, double gamma) {
  auto d = img.data();
  if (!d.empty()) {
    const auto [lo, hi] = std::minmax_element(d.begin(), d.end());
    if (!std::isfinite(*lo) || !std::isfinite(*hi)) {
      throw DomainError("srgb_to_linear: non-finite sample");
    }
    if (*lo < 0.0) {
      throw DomainError("srgb_to_linear: minimum sample " + std::to_string(*lo) + " below 0");
    }
    if (*hi > 1.0) {
      throw DomainError("srgb_to_linear: maximum sample " + std::to_string(*hi) + " above 1");
    }
  }
  FloatImage out = img;
  for (double& v : out.data()) v = std::pow(v, gamma);
  return out;
}

FloatImage linear_to_srgb(const FloatImage& img, double gamma) {
  require_finite(img, "linear_to_srgb input");
  FloatImage out = img;
  const double inv = 1.0 / gamma;
  for (double& v : out.data()) v = std::pow(std::clamp(v, 0.0, 1.0), inv);
  return out;
}

FloatImage reconstruct(const FloatImage& albedo, const FloatImage& shading) {
  require_channels(shading, 1, "shading");
  require_same_size(albedo, shading, "reconstruct");
  const int channels = albedo.channels();
  FloatImage out(albedo.height(), albedo.width(), channels);
  auto a = albedo.data();
  auto s = shading.data();
  auto o = out.data();
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (int k = 0; k < channels; ++k) {
      const std::size_t j = i * static_cast<std::size_t>(channels) + static_cast<std::size_t>(k);
      o[j] = a[j] * s[i];
    }
  }
  return out;
}

FloatImage composite(const FloatImage& fg, const FloatImage& bg, const AlphaMask& alpha) {
  if (!fg.same_shape(bg)) {
    throw DimensionError("composite: foreground " + shape_string(fg) + " vs background " +
                         shape_string(bg));
  }
  require_same_size(fg, alpha.plane(), "composite alpha");
  const int channels = fg.channels();
  FloatImage out(fg.height(), fg.width(), channels);
  auto f = fg.data();
  auto b = bg.data();
  auto a = alpha.data();
  auto o = out.data();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double w = a[i];
    for (int k = 0; k < channels; ++k) {
      const std::size_t j = i * static_cast<std::size_t>(channels) + static_cast<std::size_t>(k);
      if (w == 1.0) {
        o[j] = f[j];
      } else if (w == 0.0) {
        o[j] = b[j];
      } else {
        o[j] = w * f[j] + (1.0 - w) * b[j];
      }
    }
  }
  return out;
}

FloatImage luminance(const FloatImage& rgb) {
  require_channels(rgb, 3, "luminance input");
  FloatImage out(rgb.height(), rgb.width(), 1);
  auto src = rgb.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    dst[i] = kLumaR * src[3 * i] + kLumaG * src[3 * i + 1] + kLumaB * src[3 * i + 2];
  }
  return out;
}

FloatImage downsample_half(const FloatImage& img) {
  if (img.height() < 2 || img.width() < 2) {
    throw DimensionError("downsample_half needs at least 2x2, got " + shape_string(img));
  }
  const int oh = (img.height() + 1) / 2;
  const int ow = (img.width() + 1) / 2;
  const int channels = img.channels();
  FloatImage out(oh, ow, channels);
  for (int y = 0; y < oh; ++y) {
    const int y0 = 2 * y;
    const int y1 = std::min(2 * y + 1, img.height() - 1);
    for (int x = 0; x < ow; ++x) {
      const int x0 = 2 * x;
      const int x1 = std::min(2 * x + 1, img.width() - 1);
      for (int c = 0; c < channels; ++c) {
        out(y, x, c) = 0.25 * (img(y0, x0, c) + img(y0, x1, c) + img(y1, x0, c) + img(y1, x1, c));
      }
    }
  }
  return out;
}

std::pair<FloatImage, FloatImage> gradient_xy(const FloatImage& img) {
  if (img.height() < 2 || img.width() < 2) {
    throw DimensionError("gradient_xy needs at least 2x2, got " + shape_string(img));
  }
  const int h = img.height();
  const int w = img.width();
  const int channels = img.channels();
  FloatImage dx(h, w, channels);
  FloatImage dy(h, w, channels);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < channels; ++c) {
        if (x + 1 < w) dx(y, x, c) = img(y, x + 1, c) - img(y, x, c);
        if (y + 1 < h) dy(y, x, c) = img(y + 1, x, c) - img(y, x, c);
      }
    }
  }
  return {std::move(dx), std::move(dy)};
}

FloatImage resize_bilinear(const FloatImage& img, int height, int width) {
  if (height < 1 || width < 1 || img.empty()) {
    throw DimensionError("resize_bilinear: bad target size");
  }
  if (height == img.height() && width == img.width()) return img;
  const int channels = img.channels();
  FloatImage out(height, width, channels);
  const double sy = static_cast<double>(img.height()) / height;
  const double sx = static_cast<double>(img.width()) / width;
  for (int y = 0; y < height; ++y) {
    // Pixel-center alignment.
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, img.height() - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, img.height() - 1);
    const double ty = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, img.width() - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, img.width() - 1);
      const double tx = fx - x0;
      for (int c = 0; c < channels; ++c) {
        const double top = (1 - tx) * img(y0, x0, c) + tx * img(y0, x1, c);
        const double bot = (1 - tx) * img(y1, x0, c) + tx * img(y1, x1, c);
        out(y, x, c) = (1 - ty) * top + ty * bot;
      }
    }
  }
  return out;
}

FloatImage resize_nearest(const FloatImage& img, int height, int width) {
  if (height < 1 || width < 1 || img.empty()) {
    throw DimensionError("resize_nearest: bad target size");
  }
  if (height == img.height() && width == img.width()) return img;
  const int channels = img.channels();
  FloatImage out(height, width, channels);
  for (int y = 0; y < height; ++y) {
    const int sy = std::min(static_cast<int>((y + 0.5) * img.height() / height), img.height() - 1);
    for (int x = 0; x < width; ++x) {
      const int sx = std::min(static_cast<int>((x + 0.5) * img.width() / width), img.width() - 1);
      for (int c = 0; c < channels; ++c) out(y, x, c) = img(sy, sx, c);
    }
  }
  return out;
}

std::pair<int, int> fit_long_side(int height, int width, int long_side) {
  if (height <= 0 || width <= 0 || long_side <= 0) {
    throw DimensionError("fit_long_side: non-positive size");
  }
  if (height >= width) {
    const int w = std::max(1, static_cast<int>(std::lround(static_cast<double>(width) * long_side / height)));
    return {long_side, w};
  }
  const int h = std::max(1, static_cast<int>(std::lround(static_cast<double>(height) * long_side / width)));
  return {h, long_side};
}

FloatImage scaled(const FloatImage& img, double factor) {
  FloatImage out = img;
  for (double& v : out.data()) v *= factor;
  return out;
}

double mean_relative_error(const FloatImage& a, const FloatImage& ref, double floor) {
  if (!a.same_shape(ref)) {
    throw DimensionError("mean_relative_error: " + shape_string(a) + " vs " + shape_string(ref));
  }
  if (a.empty()) return 0.0;
  auto x = a.data();
  auto r = ref.data();
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    total += std::abs(x[i] - r[i]) / std::max(std::abs(r[i]), floor);
  }
  return total / static_cast<double>(x.size());
}

}  // namespace icomp
