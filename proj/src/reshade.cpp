// Copyright 2026 The intrinsic-compose Authors.
// SPDX-License-Identifier: Apache-2.0

#include "icomp/reshade.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>
#include <unistd.h>

#include "icomp/error.hpp"
#include "icomp/io.hpp"

namespace icomp {

namespace {

void require_normals_size(const NormalMap& n, const FloatImage& ref, std::string_view what) {
  if (n.height() != ref.height() || n.width() != ref.width()) {
    throw DimensionError(std::string(what) + " size differs from the scene");
  }
}

// Forward differences that tolerate a 1-pixel axis (coarsest pyramid level):
// the missing neighbor contributes a zero difference.
std::pair<FloatImage, FloatImage> forward_differences(const FloatImage& img) {
  if (img.height() >= 2 && img.width() >= 2) return gradient_xy(img);
  const int h = img.height();
  const int w = img.width();
  const int ch = img.channels();
  FloatImage dx(h, w, ch);
  FloatImage dy(h, w, ch);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < ch; ++c) {
        if (x + 1 < w) dx(y, x, c) = img(y, x + 1, c) - img(y, x, c);
        if (y + 1 < h) dy(y, x, c) = img(y + 1, x, c) - img(y, x, c);
      }
    }
  }
  return {std::move(dx), std::move(dy)};
}

// Adjoint of forward_differences applied to (gx, gy).
FloatImage forward_differences_adjoint(const FloatImage& gx, const FloatImage& gy) {
  const int h = gx.height();
  const int w = gx.width();
  const int ch = gx.channels();
  FloatImage out(h, w, ch);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < ch; ++c) {
        if (x + 1 < w) {
          out(y, x + 1, c) += gx(y, x, c);
          out(y, x, c) -= gx(y, x, c);
        }
        if (y + 1 < h) {
          out(y + 1, x, c) += gy(y, x, c);
          out(y, x, c) -= gy(y, x, c);
        }
      }
    }
  }
  return out;
}

// Adjoint of downsample_half from a coarse gradient back onto the fine grid.
FloatImage downsample_half_adjoint(const FloatImage& coarse, int fine_height, int fine_width) {
  FloatImage out(fine_height, fine_width, coarse.channels());
  for (int y = 0; y < coarse.height(); ++y) {
    const int y0 = 2 * y;
    const int y1 = std::min(2 * y + 1, fine_height - 1);
    for (int x = 0; x < coarse.width(); ++x) {
      const int x0 = 2 * x;
      const int x1 = std::min(2 * x + 1, fine_width - 1);
      for (int c = 0; c < coarse.channels(); ++c) {
        const double g = 0.25 * coarse(y, x, c);
        out(y0, x0, c) += g;
        out(y0, x1, c) += g;
        out(y1, x0, c) += g;
        out(y1, x1, c) += g;
      }
    }
  }
  return out;
}

void check_loss_inputs(const FloatImage& pred, const FloatImage& gt, std::string_view what) {
  if (!pred.same_shape(gt)) {
    throw DimensionError(std::string(what) + ": prediction " + std::to_string(pred.height()) + "x" +
                         std::to_string(pred.width()) + "x" + std::to_string(pred.channels()) +
                         " vs target " + std::to_string(gt.height()) + "x" + std::to_string(gt.width()) +
                         "x" + std::to_string(gt.channels()));
  }
  if (pred.empty()) throw DimensionError(std::string(what) + ": empty images");
}

void check_scales(const FloatImage& img, int scales) {
  if (scales < 1) throw DomainError("loss needs at least one scale");
  const int need = 1 << (scales - 1);
  if (img.height() < need || img.width() < need) {
    throw DimensionError("image " + std::to_string(img.height()) + "x" + std::to_string(img.width()) +
                         " too small for " + std::to_string(scales) + " scales (needs " +
                         std::to_string(need) + " per axis)");
  }
}

std::vector<FloatImage> pyramid(const FloatImage& img, int scales) {
  std::vector<FloatImage> levels;
  levels.reserve(static_cast<std::size_t>(scales));
  levels.push_back(img);
  for (int m = 1; m < scales; ++m) levels.push_back(downsample_half(levels.back()));
  return levels;
}

// Collapses an RGB gradient onto shading through I = A * S.
FloatImage image_to_shading_gradient(const FloatImage& grad_image, const FloatImage& albedo) {
  FloatImage out(albedo.height(), albedo.width(), 1);
  auto g = grad_image.data();
  auto a = albedo.data();
  auto o = out.data();
  const auto ch = static_cast<std::size_t>(albedo.channels());
  for (std::size_t i = 0; i < o.size(); ++i) {
    double sum = 0.0;
    for (std::size_t k = 0; k < ch; ++k) sum += a[i * ch + k] * g[i * ch + k];
    o[i] = sum;
  }
  return out;
}

void add_into(FloatImage& acc, const FloatImage& term) {
  auto a = acc.data();
  auto t = term.data();
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += t[i];
}

}  // namespace

void Scene::validate() const {
  const FloatImage& ref = alpha.plane();
  if (ref.empty()) throw DimensionError("scene has an empty mask");
  const std::pair<const FloatImage*, const char*> rgb[] = {
      {&fg_image, "fg_image"}, {&bg_image, "bg_image"}, {&fg_albedo, "fg_albedo"}, {&bg_albedo, "bg_albedo"}};
  for (const auto& [img, name] : rgb) {
    require_channels(*img, 3, name);
    require_same_size(*img, ref, name);
    require_nonnegative(*img, name);
  }
  const std::pair<const FloatImage*, const char*> gray[] = {{&fg_shading, "fg_shading"},
                                                            {&bg_shading, "bg_shading"}};
  for (const auto& [img, name] : gray) {
    require_channels(*img, 1, name);
    require_same_size(*img, ref, name);
    require_nonnegative(*img, name);
  }
  require_normals_size(fg_normals, ref, "fg_normals");
  require_normals_size(bg_normals, ref, "bg_normals");
  require_same_size(bg_depth.plane(), ref, "bg_depth");

  const double fg_err = mean_relative_error(reconstruct(fg_albedo, fg_shading), fg_image, 1e-2);
  const double bg_err = mean_relative_error(reconstruct(bg_albedo, bg_shading), bg_image, 1e-2);
  if (fg_err > 0.05) spdlog::warn("foreground albedo*shading departs from the image ({:.1f}% mean)", 100 * fg_err);
  if (bg_err > 0.05) spdlog::warn("background albedo*shading departs from the image ({:.1f}% mean)", 100 * bg_err);
}

RefinerInput::RefinerInput(FloatImage stack) : stack_(std::move(stack)) {
  require_channels(stack_, refiner_channel::kCount, "refiner input");
  require_finite(stack_, "refiner input");
}

FloatImage RefinerInput::rgb() const {
  FloatImage out(height(), width(), 3);
  for (int y = 0; y < height(); ++y) {
    for (int x = 0; x < width(); ++x) {
      for (int c = 0; c < 3; ++c) out(y, x, c) = stack_(y, x, refiner_channel::kRed + c);
    }
  }
  return out;
}

FloatImage IdentityRefiner::run(const RefinerInput& input) const { return input.shading(); }

FloatImage SmoothRefiner::run(const RefinerInput& input) const {
  const FloatImage& stack = input.stack();
  const int h = input.height();
  const int w = input.width();
  const FloatImage original = input.shading();

  // Recover albedo from the stacked composite: rgb / shading.
  FloatImage albedo(h, w, 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double s = original(y, x);
      for (int c = 0; c < 3; ++c) albedo(y, x, c) = s > 1e-6 ? stack(y, x, c) / s : 0.0;
    }
  }
  const double inv_two_sigma_sq = 1.0 / (2.0 * albedo_sigma_ * albedo_sigma_);
  auto weight = [&](int y0, int x0, int y1, int x1) {
    double d2 = 0.0;
    for (int c = 0; c < 3; ++c) {
      const double d = albedo(y0, x0, c) - albedo(y1, x1, c);
      d2 += d * d;
    }
    return std::exp(-d2 * inv_two_sigma_sq);
  };

  FloatImage current = original;
  constexpr int kDy[4] = {-1, 1, 0, 0};
  constexpr int kDx[4] = {0, 0, -1, 1};
  for (int it = 0; it < iterations_; ++it) {
    FloatImage next = current;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double m = stack(y, x, refiner_channel::kMask);
        if (m <= 0.0) continue;
        double num = current(y, x);
        double den = 1.0;
        for (int k = 0; k < 4; ++k) {
          const int ny = y + kDy[k];
          const int nx = x + kDx[k];
          if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
          const double wt = weight(y, x, ny, nx);
          num += wt * current(ny, nx);
          den += wt;
        }
        next(y, x) = m * (num / den) + (1.0 - m) * original(y, x);
      }
    }
    current = std::move(next);
  }
  return current;
}

FloatImage ExternalRefiner::run(const RefinerInput& input) const {
  std::string dir_template = (std::filesystem::temp_directory_path() / "icomp-refiner-XXXXXX").string();
  if (mkdtemp(dir_template.data()) == nullptr) throw IoError("cannot create scratch directory for refiner");
  const std::filesystem::path dir(dir_template);
  const auto in_path = dir / "input.pfm";
  const auto out_path = dir / "output.pfm";
  struct Cleanup {
    std::filesystem::path dir;
    ~Cleanup() {
      std::error_code ec;
      std::filesystem::remove_all(dir, ec);
    }
  } cleanup{dir};

  io::write_pfm_stack(in_path, input.stack());
  const std::string cmd = command_ + " '" + in_path.string() + "' '" + out_path.string() + "'";
  const int status = std::system(cmd.c_str());
  if (status != 0) {
    throw IoError("external refiner \"" + command_ + "\" exited with status " + std::to_string(status));
  }
  if (!std::filesystem::exists(out_path)) throw IoError("external refiner wrote no output");
  return io::read_pfm(out_path);
}

std::unique_ptr<Refiner> make_refiner(const std::string& spec) {
  if (spec == "identity") return std::make_unique<IdentityRefiner>();
  if (spec == "smooth") return std::make_unique<SmoothRefiner>();
  constexpr std::string_view kExternal = "external:";
  if (spec.rfind(kExternal, 0) == 0 && spec.size() > kExternal.size()) {
    return std::make_unique<ExternalRefiner>(spec.substr(kExternal.size()));
  }
  throw ParseError("unknown refiner \"" + spec + "\" (expected identity, smooth or external:<cmd>)");
}

FloatImage initial_composite_shading(const Scene& scene, const LightModel& light) {
  require_normals_size(scene.fg_normals, scene.bg_shading, "fg_normals");
  require_same_size(scene.bg_shading, scene.alpha.plane(), "composite shading");
  const FloatImage rendered = render_lambertian(scene.fg_normals, light);
  return composite(rendered, scene.bg_shading, scene.alpha);
}

NormalMap blend_normals(const NormalMap& fg, const NormalMap& bg, const AlphaMask& alpha) {
  if (fg.height() != bg.height() || fg.width() != bg.width() || fg.height() != alpha.height() ||
      fg.width() != alpha.width()) {
    throw DimensionError("blend_normals: size mismatch");
  }
  std::vector<Eigen::Vector3d> out(fg.data().size());
  auto f = fg.data();
  auto b = bg.data();
  auto a = alpha.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (a[i] == 1.0) {
      out[i] = f[i];
    } else if (a[i] == 0.0) {
      out[i] = b[i];
    } else {
      Eigen::Vector3d n = a[i] * f[i] + (1.0 - a[i]) * b[i];
      const double len = n.norm();
      out[i] = len > 1e-12 ? Eigen::Vector3d(n / len) : Eigen::Vector3d(0.0, 0.0, 1.0);
    }
  }
  return NormalMap(fg.height(), fg.width(), std::move(out));
}

FloatImage composite_depth(const DepthMap& depth, const AlphaMask& alpha) {
  require_same_size(depth.plane(), alpha.plane(), "composite depth");
  FloatImage out = depth.plane();
  auto o = out.data();
  auto a = alpha.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= (1.0 - a[i]);
  return out;
}

RefinerInput assemble_refiner_input(const FloatImage& composite_albedo, const FloatImage& composite_shading,
                                    const NormalMap& normals, const FloatImage& depth, const AlphaMask& alpha) {
  require_channels(composite_albedo, 3, "composite albedo");
  require_channels(composite_shading, 1, "composite shading");
  require_channels(depth, 1, "depth");
  require_same_size(composite_albedo, composite_shading, "refiner input");
  require_same_size(depth, composite_shading, "refiner depth");
  require_same_size(alpha.plane(), composite_shading, "refiner mask");
  require_normals_size(normals, composite_shading, "refiner normals");

  const FloatImage rgb = reconstruct(composite_albedo, composite_shading);
  const int h = composite_shading.height();
  const int w = composite_shading.width();
  FloatImage stack(h, w, refiner_channel::kCount);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) stack(y, x, refiner_channel::kRed + c) = rgb(y, x, c);
      stack(y, x, refiner_channel::kShading) = composite_shading(y, x);
      const Eigen::Vector3d& n = normals(y, x);
      stack(y, x, refiner_channel::kNormalX) = n.x();
      stack(y, x, refiner_channel::kNormalY) = n.y();
      stack(y, x, refiner_channel::kNormalZ) = n.z();
      stack(y, x, refiner_channel::kDepth) = depth(y, x);
      stack(y, x, refiner_channel::kMask) = alpha(y, x);
    }
  }
  return RefinerInput(std::move(stack));
}

RefinerInput build_refiner_input(const Scene& scene, const FloatImage& composite_shading,
                                 const FloatImage& composite_albedo) {
  return assemble_refiner_input(composite_albedo, composite_shading,
                                blend_normals(scene.fg_normals, scene.bg_normals, scene.alpha),
                                composite_depth(scene.bg_depth, scene.alpha), scene.alpha);
}

double loss_mse(const FloatImage& pred, const FloatImage& gt) {
  check_loss_inputs(pred, gt, "loss_mse");
  auto p = pred.data();
  auto g = gt.data();
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = p[i] - g[i];
    total += d * d;
  }
  return total / static_cast<double>(p.size());
}

FloatImage loss_mse_gradient(const FloatImage& pred, const FloatImage& gt) {
  check_loss_inputs(pred, gt, "loss_mse_gradient");
  FloatImage out(pred.height(), pred.width(), pred.channels());
  auto p = pred.data();
  auto g = gt.data();
  auto o = out.data();
  const double scale = 2.0 / static_cast<double>(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) o[i] = scale * (p[i] - g[i]);
  return out;
}

double loss_multiscale_gradient(const FloatImage& pred, const FloatImage& gt, int scales) {
  check_loss_inputs(pred, gt, "loss_multiscale_gradient");
  check_scales(pred, scales);
  const auto pp = pyramid(pred, scales);
  const auto gp = pyramid(gt, scales);
  double total = 0.0;
  for (int m = 0; m < scales; ++m) {
    const auto [pdx, pdy] = forward_differences(pp[static_cast<std::size_t>(m)]);
    const auto [gdx, gdy] = forward_differences(gp[static_cast<std::size_t>(m)]);
    total += loss_mse(pdx, gdx) + loss_mse(pdy, gdy);
  }
  return total;
}

FloatImage loss_multiscale_gradient_gradient(const FloatImage& pred, const FloatImage& gt, int scales) {
  check_loss_inputs(pred, gt, "loss_multiscale_gradient_gradient");
  check_scales(pred, scales);
  const auto pp = pyramid(pred, scales);
  const auto gp = pyramid(gt, scales);
  // Walk from the coarsest level back to full resolution, accumulating each
  // level's own term and the adjoint of the downsample above it.
  FloatImage carried;
  for (int m = scales - 1; m >= 0; --m) {
    const auto& p = pp[static_cast<std::size_t>(m)];
    const auto& g = gp[static_cast<std::size_t>(m)];
    const auto [pdx, pdy] = forward_differences(p);
    const auto [gdx, gdy] = forward_differences(g);
    FloatImage level = forward_differences_adjoint(loss_mse_gradient(pdx, gdx), loss_mse_gradient(pdy, gdy));
    if (!carried.empty()) add_into(level, downsample_half_adjoint(carried, p.height(), p.width()));
    carried = std::move(level);
  }
  return carried;
}

LossBreakdown loss_components(const FloatImage& pred_shading, const FloatImage& gt_shading,
                              const FloatImage& albedo, int scales) {
  require_channels(pred_shading, 1, "predicted shading");
  check_loss_inputs(pred_shading, gt_shading, "loss_total");
  require_channels(albedo, 3, "albedo");
  require_same_size(albedo, pred_shading, "loss_total albedo");
  const FloatImage pred_image = reconstruct(albedo, pred_shading);
  const FloatImage gt_image = reconstruct(albedo, gt_shading);
  LossBreakdown out;
  out.shading = loss_mse(pred_shading, gt_shading);
  out.image = loss_mse(pred_image, gt_image);
  out.shading_gradient = loss_multiscale_gradient(pred_shading, gt_shading, scales);
  out.image_gradient = loss_multiscale_gradient(pred_image, gt_image, scales);
  return out;
}

double loss_total(const FloatImage& pred_shading, const FloatImage& gt_shading, const FloatImage& albedo,
                  int scales) {
  return loss_components(pred_shading, gt_shading, albedo, scales).total();
}

FloatImage loss_total_gradient(const FloatImage& pred_shading, const FloatImage& gt_shading,
                               const FloatImage& albedo, int scales) {
  require_channels(pred_shading, 1, "predicted shading");
  check_loss_inputs(pred_shading, gt_shading, "loss_total_gradient");
  require_channels(albedo, 3, "albedo");
  require_same_size(albedo, pred_shading, "loss_total albedo");
  const FloatImage pred_image = reconstruct(albedo, pred_shading);
  const FloatImage gt_image = reconstruct(albedo, gt_shading);

  FloatImage grad = loss_mse_gradient(pred_shading, gt_shading);
  add_into(grad, loss_multiscale_gradient_gradient(pred_shading, gt_shading, scales));
  FloatImage image_grad = loss_mse_gradient(pred_image, gt_image);
  add_into(image_grad, loss_multiscale_gradient_gradient(pred_image, gt_image, scales));
  add_into(grad, image_to_shading_gradient(image_grad, albedo));
  return grad;
}

PairSample generate_pair(const FloatImage& image, const AlphaMask& mask, const FloatImage& albedo,
                         const FloatImage& shading, const NormalMap& normals, const DepthMap& depth) {
  require_channels(image, 3, "image");
  require_channels(albedo, 3, "albedo");
  require_channels(shading, 1, "shading");
  require_same_size(image, albedo, "pair albedo");
  require_same_size(image, shading, "pair shading");
  require_same_size(image, mask.plane(), "pair mask");
  require_same_size(image, depth.plane(), "pair depth");
  require_normals_size(normals, image, "pair normals");
  if (mask.active_count() < kMinPairPixels) {
    throw InsufficientDataError("pair generation needs at least " + std::to_string(kMinPairPixels) +
                                " masked pixels, got " + std::to_string(mask.active_count()));
  }

  PairSample pair;
  pair.fit = fit_light_lstsq(normals, shading, &mask);
  if (pair.fit.degenerate) spdlog::warn("foreground normals are degenerate for the light fit");
  const FloatImage rendered = render_lambertian(normals, pair.fit.light);
  const FloatImage input_shading = composite(rendered, shading, mask);
  pair.input = assemble_refiner_input(albedo, input_shading, normals, composite_depth(depth, mask), mask);
  pair.gt_shading = shading;
  pair.gt_image = reconstruct(albedo, shading);
  pair.albedo = albedo;
  pair.mask = mask;
  return pair;
}

FloatImage refine(const RefinerInput& input, const Refiner& refiner) {
  FloatImage out = refiner.run(input);
  if (out.channels() != 1 || out.height() != input.height() || out.width() != input.width()) {
    throw NumericalError("refiner \"" + refiner.name() + "\" returned " + std::to_string(out.height()) + "x" +
                         std::to_string(out.width()) + "x" + std::to_string(out.channels()) + ", expected " +
                         std::to_string(input.height()) + "x" + std::to_string(input.width()) + "x1");
  }
  for (double v : out.data()) {
    if (!std::isfinite(v) || v < 0.0) {
      throw NumericalError("refiner \"" + refiner.name() + "\" returned a negative or non-finite shading value");
    }
  }
  return out;
}

HarmonizeResult harmonize(const Scene& scene, const Refiner& refiner, const HarmonizeOptions& options) {
  scene.validate();
  HarmonizeResult result;

  if (options.edits) {
    result.harmonized_albedo =
        apply_edit_sequence(scene.fg_albedo, scene.alpha, *options.edits, options.edits->non_identity());
  } else {
    result.harmonized_albedo = scene.fg_albedo;
  }
  result.composite_albedo = composite(result.harmonized_albedo, scene.bg_albedo, scene.alpha);

  if (options.light) {
    result.light = *options.light;
  } else {
    const AlphaMask background = scene.alpha.inverted();
    result.fit = fit_light_constrained(scene.bg_normals, scene.bg_shading, &background, options.fit);
    if (result.fit->degenerate) spdlog::warn("background light fit is degenerate");
    result.light = result.fit->light;
  }

  result.lambertian_shading = initial_composite_shading(scene, result.light);
  const RefinerInput input = build_refiner_input(scene, result.lambertian_shading, result.composite_albedo);
  result.refined_shading = refine(input, refiner);
  result.image = reconstruct(result.composite_albedo, result.refined_shading);
  return result;
}

}  // namespace icomp
