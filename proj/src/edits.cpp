// Copyright 2026 The intrinsic-compose Authors.
// SPDX-License-Identifier: Apache-2.0

#include "icomp/edits.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <random>
#include <string>

#include "icomp/error.hpp"
#include "icomp/optim.hpp"

namespace icomp {

namespace {

void check_range(double v, EditRange range, std::string_view field) {
  if (!(v >= range.lo && v <= range.hi)) {
    throw DomainError(std::string(field) + " = " + std::to_string(v) + " outside [" +
                      std::to_string(range.lo) + ", " + std::to_string(range.hi) + "]");
  }
}

double sigmoid(double u) { return 1.0 / (1.0 + std::exp(-u)); }

EditRange range_of(int param) {
  if (param < 3) return kWhiteBalanceRange;
  if (param == 3) return kSaturationRange;
  if (param < 7) return kColorCurveRange;
  return kExposureRange;
}

EditKind kind_of(int param) {
  if (param < 3) return EditKind::kWhiteBalance;
  if (param == 3) return EditKind::kSaturation;
  if (param < 7) return EditKind::kColorCurve;
  return EditKind::kExposure;
}

constexpr int kP = EditObjective::kParamCount;

// A pixel value together with its derivative with respect to the 8 box
// parameters.
struct DualPixel {
  std::array<double, 3> v{};
  std::array<std::array<double, kP>, 3> d{};
};

void dual_edit(DualPixel& px, EditKind kind, const EditParams& p) {
  switch (kind) {
    case EditKind::kExposure:
      for (int c = 0; c < 3; ++c) {
        for (int j = 0; j < kP; ++j) px.d[c][j] *= p.exposure;
        px.d[c][7] += px.v[c];
        px.v[c] *= p.exposure;
      }
      break;
    case EditKind::kWhiteBalance:
      for (int c = 0; c < 3; ++c) {
        for (int j = 0; j < kP; ++j) px.d[c][j] *= p.white_balance[c];
        px.d[c][c] += px.v[c];
        px.v[c] *= p.white_balance[c];
      }
      break;
    case EditKind::kSaturation: {
      const double lum = kLumaR * px.v[0] + kLumaG * px.v[1] + kLumaB * px.v[2];
      std::array<double, kP> dlum{};
      for (int j = 0; j < kP; ++j) dlum[j] = kLumaR * px.d[0][j] + kLumaG * px.d[1][j] + kLumaB * px.d[2][j];
      const double s = p.saturation;
      for (int c = 0; c < 3; ++c) {
        const double out = lum + s * (px.v[c] - lum);
        if (out < 0.0) {
          px.d[c].fill(0.0);
          px.v[c] = 0.0;
          continue;
        }
        for (int j = 0; j < kP; ++j) px.d[c][j] = dlum[j] + s * (px.d[c][j] - dlum[j]);
        px.d[c][3] += px.v[c] - lum;
        px.v[c] = out;
      }
      break;
    }
    case EditKind::kColorCurve:
      for (int c = 0; c < 3; ++c) {
        const double k = p.color_curve[c];
        const double e = 1.0 / std::max(k, kMinCurve);
        const double x = px.v[c];
        if (x <= 0.0 || x >= 1.0) {
          px.d[c].fill(0.0);
          px.v[c] = std::clamp(x, 0.0, 1.0);
          continue;
        }
        const double y = std::pow(x, e);
        const double dy_dx = e * y / x;
        for (int j = 0; j < kP; ++j) px.d[c][j] *= dy_dx;
        if (k > kMinCurve) px.d[c][4 + c] += y * std::log(x) * (-1.0 / (k * k));
        px.v[c] = y;
      }
      break;
  }
}

}  // namespace

char edit_letter(EditKind kind) {
  switch (kind) {
    case EditKind::kWhiteBalance: return 'W';
    case EditKind::kSaturation: return 'S';
    case EditKind::kColorCurve: return 'C';
    case EditKind::kExposure: return 'E';
  }
  return '?';
}

EditKind edit_from_letter(char letter) {
  switch (letter) {
    case 'W': return EditKind::kWhiteBalance;
    case 'S': return EditKind::kSaturation;
    case 'C': return EditKind::kColorCurve;
    case 'E': return EditKind::kExposure;
    default: break;
  }
  throw ParseError(std::string("unknown edit letter '") + letter + "' (expected W, S, C or E)");
}

EditSelection EditSelection::parse(std::string_view letters) {
  EditSelection out;
  for (char ch : letters) out = out.with(edit_from_letter(ch));
  return out;
}

int EditSelection::size() const { return std::popcount(bits_); }

std::string EditSelection::letters() const {
  std::string out;
  for (EditKind k : kAllEditKinds) {
    if (contains(k)) out.push_back(edit_letter(k));
  }
  return out;
}

void EditParams::validate() const {
  for (int c = 0; c < 3; ++c) {
    check_range(white_balance[c], kWhiteBalanceRange, "white_balance[" + std::to_string(c) + "]");
  }
  check_range(saturation, kSaturationRange, "saturation");
  for (int c = 0; c < 3; ++c) {
    check_range(color_curve[c], kColorCurveRange, "color_curve[" + std::to_string(c) + "]");
  }
  check_range(exposure, kExposureRange, "exposure");
  std::array<int, 4> seen{};
  for (EditKind k : order) seen[static_cast<int>(k)] += 1;
  if (std::any_of(seen.begin(), seen.end(), [](int n) { return n != 1; })) {
    throw DomainError("order must be a permutation of W, S, C, E");
  }
}

EditSelection EditParams::non_identity() const {
  EditSelection out;
  if (white_balance != std::array<double, 3>{1.0, 1.0, 1.0}) out = out.with(EditKind::kWhiteBalance);
  if (saturation != 1.0) out = out.with(EditKind::kSaturation);
  if (color_curve != std::array<double, 3>{1.0, 1.0, 1.0}) out = out.with(EditKind::kColorCurve);
  if (exposure != 1.0) out = out.with(EditKind::kExposure);
  return out;
}

std::string EditParams::order_string() const {
  std::string out;
  for (EditKind k : order) out.push_back(edit_letter(k));
  return out;
}

EditOrder parse_edit_order(std::string_view letters) {
  if (letters.size() != 4) {
    throw ParseError("edit order must have 4 letters, got \"" + std::string(letters) + "\"");
  }
  EditOrder order{};
  for (std::size_t i = 0; i < 4; ++i) order[i] = edit_from_letter(letters[i]);
  EditParams probe;
  probe.order = order;
  try {
    probe.validate();
  } catch (const DomainError&) {
    throw ParseError("edit order \"" + std::string(letters) + "\" repeats a letter");
  }
  return order;
}

std::array<EditOrder, 24> all_edit_orders() {
  std::array<EditOrder, 24> out{};
  EditOrder current = kAllEditKinds;
  std::size_t i = 0;
  do {
    out[i++] = current;
  } while (std::next_permutation(current.begin(), current.end()));
  return out;
}

FloatImage apply_exposure(const FloatImage& albedo, double k) {
  require_channels(albedo, 3, "albedo");
  check_range(k, kExposureRange, "exposure");
  return scaled(albedo, k);
}

FloatImage apply_saturation(const FloatImage& albedo, double s) {
  require_channels(albedo, 3, "albedo");
  check_range(s, kSaturationRange, "saturation");
  FloatImage out = albedo;
  auto d = out.data();
  for (std::size_t i = 0; i < albedo.pixel_count(); ++i) {
    double* px = &d[3 * i];
    const double lum = kLumaR * px[0] + kLumaG * px[1] + kLumaB * px[2];
    for (int c = 0; c < 3; ++c) px[c] = std::max(0.0, lum + s * (px[c] - lum));
  }
  return out;
}

FloatImage apply_white_balance(const FloatImage& albedo, const std::array<double, 3>& gains) {
  require_channels(albedo, 3, "albedo");
  for (int c = 0; c < 3; ++c) check_range(gains[c], kWhiteBalanceRange, "white_balance");
  FloatImage out = albedo;
  auto d = out.data();
  for (std::size_t i = 0; i < albedo.pixel_count(); ++i) {
    for (int c = 0; c < 3; ++c) d[3 * i + c] *= gains[c];
  }
  return out;
}

FloatImage apply_color_curve(const FloatImage& albedo, const std::array<double, 3>& curve) {
  require_channels(albedo, 3, "albedo");
  for (int c = 0; c < 3; ++c) check_range(curve[c], kColorCurveRange, "color_curve");
  std::array<double, 3> exponent{};
  for (int c = 0; c < 3; ++c) exponent[c] = 1.0 / std::max(curve[c], kMinCurve);
  FloatImage out = albedo;
  auto d = out.data();
  for (std::size_t i = 0; i < albedo.pixel_count(); ++i) {
    for (int c = 0; c < 3; ++c) d[3 * i + c] = std::pow(std::clamp(d[3 * i + c], 0.0, 1.0), exponent[c]);
  }
  return out;
}

FloatImage apply_edit_sequence(const FloatImage& albedo, const AlphaMask& mask,
                               const EditParams& params, EditSelection active) {
  require_channels(albedo, 3, "albedo");
  require_same_size(albedo, mask.plane(), "edit mask");
  params.validate();
  if (active.empty()) return albedo;
  FloatImage edited = albedo;
  for (EditKind kind : params.order) {
    if (!active.contains(kind)) continue;
    switch (kind) {
      case EditKind::kWhiteBalance: edited = apply_white_balance(edited, params.white_balance); break;
      case EditKind::kSaturation: edited = apply_saturation(edited, params.saturation); break;
      case EditKind::kColorCurve: edited = apply_color_curve(edited, params.color_curve); break;
      case EditKind::kExposure: edited = apply_exposure(edited, params.exposure); break;
    }
  }
  return composite(edited, albedo, mask);
}

EditDraw sample_random_edits(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  EditDraw draw;
  std::uniform_int_distribution<int> count_dist(1, 4);
  const int count = count_dist(rng);

  EditOrder kinds = kAllEditKinds;
  std::shuffle(kinds.begin(), kinds.end(), rng);
  for (int i = 0; i < count; ++i) draw.active = draw.active.with(kinds[static_cast<std::size_t>(i)]);

  draw.params.order = kAllEditKinds;
  std::shuffle(draw.params.order.begin(), draw.params.order.end(), rng);

  auto uniform = [&rng](EditRange r) { return std::uniform_real_distribution<double>(r.lo, r.hi)(rng); };
  for (double& g : draw.params.white_balance) g = uniform(kWhiteBalanceRange);
  draw.params.saturation = uniform(kSaturationRange);
  for (double& k : draw.params.color_curve) k = uniform(kColorCurveRange);
  draw.params.exposure = uniform(kExposureRange);
  return draw;
}

EditObjective::EditObjective(const FloatImage& albedo, const FloatImage& target,
                             const AlphaMask& mask, const EditOrder& order, EditSelection active)
    : albedo_(albedo), target_(target), order_(order), active_(active) {
  require_channels(albedo, 3, "foreground albedo");
  require_channels(target, 3, "target albedo");
  require_same_size(albedo, target, "edit fit");
  require_same_size(albedo, mask.plane(), "edit fit mask");
  auto m = mask.data();
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m[i] > 0.5) indices_.push_back(i);
  }
  // Mask weights are needed in the compositing step; keep them alongside.
  weights_.reserve(indices_.size());
  for (std::size_t i : indices_) weights_.push_back(m[i]);
}

EditParams EditObjective::decode(std::span<const double> raw) const {
  EditParams p;
  p.order = order_;
  for (int j = 0; j < kP; ++j) {
    if (!active_.contains(kind_of(j))) continue;
    const EditRange r = range_of(j);
    const double v = r.lo + (r.hi - r.lo) * sigmoid(raw[j]);
    if (j < 3) p.white_balance[j] = v;
    else if (j == 3) p.saturation = v;
    else if (j < 7) p.color_curve[j - 4] = v;
    else p.exposure = v;
  }
  return p;
}

std::array<double, EditObjective::kParamCount> EditObjective::encode(const EditParams& params) const {
  std::array<double, kP> raw{};
  const std::array<double, kP> values = {params.white_balance[0], params.white_balance[1],
                                         params.white_balance[2], params.saturation,
                                         params.color_curve[0],   params.color_curve[1],
                                         params.color_curve[2],   params.exposure};
  for (int j = 0; j < kP; ++j) {
    const EditRange r = range_of(j);
    const double t = std::clamp((values[j] - r.lo) / (r.hi - r.lo), 0.01, 0.99);
    raw[j] = std::log(t / (1.0 - t));
  }
  return raw;
}

double EditObjective::value(std::span<const double> raw) const {
  std::array<double, kP> grad{};
  return value_and_gradient(raw, grad);
}

double EditObjective::value_and_gradient(std::span<const double> raw, std::span<double> grad) const {
  const EditParams p = decode(raw);
  std::array<double, kP> grad_p{};
  double total = 0.0;
  auto a = albedo_.data();
  auto t = target_.data();
  for (std::size_t n = 0; n < indices_.size(); ++n) {
    const std::size_t i = indices_[n];
    const double w = weights_[n];
    DualPixel px;
    for (int c = 0; c < 3; ++c) px.v[c] = a[3 * i + c];
    for (EditKind kind : order_) {
      if (active_.contains(kind)) dual_edit(px, kind, p);
    }
    for (int c = 0; c < 3; ++c) {
      const double out = w * px.v[c] + (1.0 - w) * a[3 * i + c];
      const double r = out - t[3 * i + c];
      total += r * r;
      for (int j = 0; j < kP; ++j) grad_p[j] += 2.0 * r * w * px.d[c][j];
    }
  }
  const double inv = 1.0 / (3.0 * static_cast<double>(indices_.size()));
  for (int j = 0; j < kP; ++j) {
    if (!active_.contains(kind_of(j))) {
      grad[j] = 0.0;
      continue;
    }
    const EditRange r = range_of(j);
    const double s = sigmoid(raw[j]);
    grad[j] = grad_p[j] * inv * (r.hi - r.lo) * s * (1.0 - s);
  }
  return total * inv;
}

double EditObjective::masked_mse(const EditParams& params) const {
  auto a = albedo_.data();
  auto t = target_.data();
  double total = 0.0;
  for (std::size_t n = 0; n < indices_.size(); ++n) {
    const std::size_t i = indices_[n];
    const double w = weights_[n];
    DualPixel px;
    for (int c = 0; c < 3; ++c) px.v[c] = a[3 * i + c];
    for (EditKind kind : params.order) {
      if (active_.contains(kind)) dual_edit(px, kind, params);
    }
    for (int c = 0; c < 3; ++c) {
      const double r = w * px.v[c] + (1.0 - w) * a[3 * i + c] - t[3 * i + c];
      total += r * r;
    }
  }
  return total / (3.0 * static_cast<double>(indices_.size()));
}

EditParams fit_edit_params(const FloatImage& fg_albedo, const FloatImage& target_albedo,
                           const AlphaMask& mask, const EditOrder& order, EditSelection active,
                           const EditFitOptions& options) {
  EditObjective objective(fg_albedo, target_albedo, mask, order, active);
  if (objective.pixel_count() <= 16) {
    throw InsufficientDataError("edit fit needs more than 16 masked pixels, got " +
                                std::to_string(objective.pixel_count()));
  }
  EditParams identity;
  identity.order = order;
  identity.validate();

  const auto start = objective.encode(identity);
  const auto result = optim::minimize(
      [&objective](std::span<const double> raw, std::span<double> grad) {
        return objective.value_and_gradient(raw, grad);
      },
      std::vector<double>(start.begin(), start.end()), nullptr, options.iterations,
      options.learning_rate);

  EditParams fitted = objective.decode(result.params);
  if (objective.masked_mse(fitted) > objective.masked_mse(identity)) return identity;
  return fitted;
}

FloatImage statistics_matching_target(const FloatImage& fg_albedo, const FloatImage& bg_albedo,
                                      const AlphaMask& mask) {
  require_channels(fg_albedo, 3, "foreground albedo");
  require_channels(bg_albedo, 3, "background albedo");
  require_same_size(fg_albedo, bg_albedo, "statistics matching");
  require_same_size(fg_albedo, mask.plane(), "statistics matching mask");

  std::array<double, 3> fg_sum{}, fg_sq{}, bg_sum{}, bg_sq{};
  std::size_t fg_n = 0;
  std::size_t bg_n = 0;
  auto f = fg_albedo.data();
  auto b = bg_albedo.data();
  auto m = mask.data();
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m[i] > 0.5) {
      ++fg_n;
      for (int c = 0; c < 3; ++c) {
        fg_sum[c] += f[3 * i + c];
        fg_sq[c] += f[3 * i + c] * f[3 * i + c];
      }
    } else {
      ++bg_n;
      for (int c = 0; c < 3; ++c) {
        bg_sum[c] += b[3 * i + c];
        bg_sq[c] += b[3 * i + c] * b[3 * i + c];
      }
    }
  }
  if (fg_n == 0 || bg_n == 0) {
    throw InsufficientDataError("statistics matching needs both foreground and background pixels");
  }
  std::array<double, 3> gain{}, offset{};
  for (int c = 0; c < 3; ++c) {
    const double fm = fg_sum[c] / static_cast<double>(fg_n);
    const double bm = bg_sum[c] / static_cast<double>(bg_n);
    const double fs = std::sqrt(std::max(0.0, fg_sq[c] / static_cast<double>(fg_n) - fm * fm));
    const double bs = std::sqrt(std::max(0.0, bg_sq[c] / static_cast<double>(bg_n) - bm * bm));
    gain[c] = fs > 1e-8 ? bs / fs : 1.0;
    offset[c] = bm - gain[c] * fm;
  }
  FloatImage out = fg_albedo;
  auto o = out.data();
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (int c = 0; c < 3; ++c) o[3 * i + c] = std::max(0.0, gain[c] * f[3 * i + c] + offset[c]);
  }
  return out;
}

}  // namespace icomp
