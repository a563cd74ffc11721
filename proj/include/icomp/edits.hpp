// Copyright 2026 The intrinsic-compose Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <span>
#include <string_view>
#include <vector>

#include "icomp/image.hpp"

namespace icomp {

enum class EditKind : std::uint8_t { kWhiteBalance = 0, kSaturation = 1, kColorCurve = 2, kExposure = 3 };

inline constexpr std::array<EditKind, 4> kAllEditKinds = {
    EditKind::kWhiteBalance, EditKind::kSaturation, EditKind::kColorCurve, EditKind::kExposure};

char edit_letter(EditKind kind);
EditKind edit_from_letter(char letter);

/// A subset of the four edit kinds.
class EditSelection {
 public:
  constexpr EditSelection() = default;
  static constexpr EditSelection all() { return EditSelection(0b1111); }
  static EditSelection parse(std::string_view letters);

  bool contains(EditKind kind) const { return (bits_ >> static_cast<int>(kind)) & 1U; }
  EditSelection with(EditKind kind) const {
    return EditSelection(static_cast<std::uint8_t>(bits_ | (1U << static_cast<int>(kind))));
  }
  int size() const;
  bool empty() const { return bits_ == 0; }
  /// Letters in canonical W, S, C, E order.
  std::string letters() const;

  friend bool operator==(EditSelection, EditSelection) = default;

 private:
  constexpr explicit EditSelection(std::uint8_t bits) : bits_(bits) {}
  std::uint8_t bits_ = 0;
};

struct EditRange {
  double lo;
  double hi;
};

inline constexpr EditRange kWhiteBalanceRange{0.1, 1.0};
inline constexpr EditRange kSaturationRange{0.0, 2.0};
inline constexpr EditRange kColorCurveRange{0.0, 2.0};
inline constexpr EditRange kExposureRange{0.5, 2.0};

/// Smallest curve value used in the exponent; keeps 1/k finite at k = 0.
inline constexpr double kMinCurve = 0.01;

using EditOrder = std::array<EditKind, 4>;

/// Parameters of the four albedo edits plus the order they are applied in.
/// Defaults are the identity edit.
struct EditParams {
  std::array<double, 3> white_balance{1.0, 1.0, 1.0};
  double saturation = 1.0;
  std::array<double, 3> color_curve{1.0, 1.0, 1.0};
  double exposure = 1.0;
  EditOrder order = kAllEditKinds;

  /// Throws DomainError naming the first field outside its range.
  void validate() const;
  /// Kinds whose parameters differ from identity.
  EditSelection non_identity() const;
  std::string order_string() const;

  friend bool operator==(const EditParams&, const EditParams&) = default;
};

/// Parses a 4-letter permutation such as "WSCE".
EditOrder parse_edit_order(std::string_view letters);
/// The 24 orders, lexicographic by kind index.
std::array<EditOrder, 24> all_edit_orders();

FloatImage apply_exposure(const FloatImage& albedo, double k);
FloatImage apply_saturation(const FloatImage& albedo, double s);
FloatImage apply_white_balance(const FloatImage& albedo, const std::array<double, 3>& gains);
FloatImage apply_color_curve(const FloatImage& albedo, const std::array<double, 3>& curve);

/// Applies the selected edits in params.order to the whole image, then
/// composites the result over the original through the mask.
FloatImage apply_edit_sequence(const FloatImage& albedo, const AlphaMask& mask,
                               const EditParams& params, EditSelection active);

struct EditDraw {
  EditParams params;
  EditSelection active;
};

/// 1-4 edits, a uniformly random order and uniformly drawn values.
/// Deterministic for a given seed.
EditDraw sample_random_edits(std::uint64_t seed);

struct EditFitOptions {
  int iterations = 1500;
  double learning_rate = 0.05;
};

/// Masked albedo MSE between the edited foreground and a target, over pixels
/// with mask > 0.5. Parameters are box-constrained through a sigmoid map, so
/// the optimizer itself runs unconstrained.
class EditObjective {
 public:
  EditObjective(const FloatImage& albedo, const FloatImage& target, const AlphaMask& mask,
                const EditOrder& order, EditSelection active);

  static constexpr int kParamCount = 8;  // wb[3], saturation, curve[3], exposure

  /// Box parameters from unconstrained coordinates, inactive kinds at identity.
  EditParams decode(std::span<const double> raw) const;
  /// Unconstrained coordinates for params (clamped slightly inside each box).
  std::array<double, kParamCount> encode(const EditParams& params) const;

  double value(std::span<const double> raw) const;
  double value_and_gradient(std::span<const double> raw, std::span<double> grad) const;
  double masked_mse(const EditParams& params) const;
  std::size_t pixel_count() const { return indices_.size(); }

 private:
  const FloatImage& albedo_;
  const FloatImage& target_;
  EditOrder order_;
  EditSelection active_;
  std::vector<std::size_t> indices_;
  std::vector<double> weights_;
};

/// Fits edit parameters so that the edited foreground matches `target` inside
/// the mask. Never returns parameters worse than identity.
EditParams fit_edit_params(const FloatImage& fg_albedo, const FloatImage& target_albedo,
                           const AlphaMask& mask, const EditOrder& order,
                           EditSelection active = EditSelection::all(),
                           const EditFitOptions& options = {});

/// Heuristic target for inference without ground truth: the foreground albedo
/// with its per-channel mean and standard deviation inside the mask mapped to
/// the background albedo's statistics outside the mask.
FloatImage statistics_matching_target(const FloatImage& fg_albedo, const FloatImage& bg_albedo,
                                      const AlphaMask& mask);

}  // namespace icomp
