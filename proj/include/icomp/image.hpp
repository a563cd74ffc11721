// Copyright 2026 The intrinsic-compose Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace icomp {

/// Row-major, interleaved raster. Samples are stored in double precision so
/// that losses and fits can be checked against scalar oracles at 1e-9; files
/// on disk are float32.
///
/// The type itself only requires finite samples. Gradient fields and the
/// refiner stack carry signed values, so non-negativity of albedo, shading
/// and composites is checked where those layers enter the system (see
/// require_nonnegative).
class FloatImage {
 public:
  FloatImage() = default;
  FloatImage(int height, int width, int channels, double fill = 0.0);
  FloatImage(int height, int width, int channels, std::vector<double> data);

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  std::size_t pixel_count() const {
    return static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_);
  }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(int y, int x, int c = 0) { return data_[index(y, x, c)]; }
  double operator()(int y, int x, int c = 0) const { return data_[index(y, x, c)]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool same_size(const FloatImage& other) const {
    return height_ == other.height_ && width_ == other.width_;
  }
  bool same_shape(const FloatImage& other) const {
    return same_size(other) && channels_ == other.channels_;
  }

  /// Copies one channel into a single-channel image.
  FloatImage channel(int c) const;

  friend bool operator==(const FloatImage&, const FloatImage&) = default;

 private:
  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(x)) *
               static_cast<std::size_t>(channels_) +
           static_cast<std::size_t>(c);
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

/// Per-pixel blend weight in [0, 1]; 1 selects the foreground.
class AlphaMask {
 public:
  AlphaMask() = default;
  explicit AlphaMask(FloatImage plane);
  static AlphaMask constant(int height, int width, double value);

  int height() const { return plane_.height(); }
  int width() const { return plane_.width(); }
  double operator()(int y, int x) const { return plane_(y, x); }
  std::span<const double> data() const { return plane_.data(); }
  const FloatImage& plane() const { return plane_; }

  /// 1 - alpha, used to select the background region.
  AlphaMask inverted() const;
  /// Number of pixels with alpha > 0.5.
  std::size_t active_count() const;

 private:
  FloatImage plane_;
};

/// Relative inverse depth as produced by a monocular estimator; only the
/// refiner consumes it.
class DepthMap {
 public:
  DepthMap() = default;
  explicit DepthMap(FloatImage plane);
  static DepthMap zeros(int height, int width);

  int height() const { return plane_.height(); }
  int width() const { return plane_.width(); }
  double operator()(int y, int x) const { return plane_(y, x); }
  const FloatImage& plane() const { return plane_; }

 private:
  FloatImage plane_;
};

void require_finite(const FloatImage& img, std::string_view what);
void require_nonnegative(const FloatImage& img, std::string_view what);
void require_channels(const FloatImage& img, int channels, std::string_view what);
void require_same_size(const FloatImage& a, const FloatImage& b, std::string_view what);

inline constexpr double kDefaultGamma = 2.2;

/// Display-encoded values in [0, 1] to linear light: v^gamma.
FloatImage srgb_to_linear(const FloatImage& img, double gamma = kDefaultGamma);
/// Linear light to display encoding: clamp(v, 0, 1)^(1/gamma).
FloatImage linear_to_srgb(const FloatImage& img, double gamma = kDefaultGamma);

/// image = albedo * shading, shading broadcast over the albedo channels.
FloatImage reconstruct(const FloatImage& albedo, const FloatImage& shading);

/// alpha * fg + (1 - alpha) * bg. Pixels with alpha exactly 0 or 1 copy the
/// corresponding layer unchanged.
FloatImage composite(const FloatImage& fg, const FloatImage& bg, const AlphaMask& alpha);

/// Rec. 709 luma weights applied to linear RGB.
inline constexpr double kLumaR = 0.2126;
inline constexpr double kLumaG = 0.7152;
inline constexpr double kLumaB = 0.0722;
FloatImage luminance(const FloatImage& rgb);

/// 2x2 box filter. Odd dimensions replicate the last row/column, so the
/// output is ceil(h/2) x ceil(w/2).
FloatImage downsample_half(const FloatImage& img);

/// Forward differences (dx, dy). The last column of dx and the last row of dy
/// are zero.
std::pair<FloatImage, FloatImage> gradient_xy(const FloatImage& img);

FloatImage resize_bilinear(const FloatImage& img, int height, int width);
FloatImage resize_nearest(const FloatImage& img, int height, int width);

/// Output size that maps the longer side to `long_side` keeping aspect.
std::pair<int, int> fit_long_side(int height, int width, int long_side);

FloatImage scaled(const FloatImage& img, double factor);

/// Mean over samples of |a - ref| / max(|ref|, floor).
double mean_relative_error(const FloatImage& a, const FloatImage& ref, double floor = 1e-3);

}  // namespace icomp
