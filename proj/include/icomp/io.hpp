// Copyright 2026 The intrinsic-compose Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "icomp/image.hpp"
#include "icomp/lighting.hpp"

namespace icomp::io {

using Bytes = std::vector<std::uint8_t>;

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);
void write_file(const std::filesystem::path& path, const Bytes& contents);

/// Portable float map: "PF" (RGB) or "Pf" (gray), float32, scanlines stored
/// bottom to top. Writes little-endian (negative scale); reads either byte
/// order.
Bytes encode_pfm(const FloatImage& img);
FloatImage decode_pfm(std::string_view bytes);
FloatImage read_pfm(const std::filesystem::path& path);
void write_pfm(const std::filesystem::path& path, const FloatImage& img);

/// Multi-plane container: a gray PFM of height planes*H whose k-th block of
/// H rows (counting from the top of the image) holds channel k.
Bytes encode_pfm_stack(const FloatImage& img);
FloatImage decode_pfm_stack(std::string_view bytes, int planes);
void write_pfm_stack(const std::filesystem::path& path, const FloatImage& img);
FloatImage read_pfm_stack(const std::filesystem::path& path, int planes);

/// 8- or 16-bit PNG. Decoding yields values in [0, 1] with 1 or 3 channels
/// (alpha is dropped, gray+alpha becomes gray). Encoding clamps to [0, 1].
Bytes encode_png(const FloatImage& img, int bit_depth = 8);
FloatImage decode_png(std::string_view bytes);
FloatImage read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const FloatImage& img, int bit_depth = 8);

enum class ImageFormat { kPfm, kPng, kUnknown };
ImageFormat sniff_format(std::string_view bytes);

/// Decodes PNG or PFM by content. PNG data is returned as stored (display
/// referred); callers linearize where needed.
FloatImage decode_image(std::string_view bytes);
FloatImage read_image(const std::filesystem::path& path);

/// Normals from a 3-channel PFM (raw vectors) or a PNG using the (n+1)/2
/// encoding. PNG normals are renormalized after decoding.
NormalMap decode_normals(std::string_view bytes);
NormalMap read_normals(const std::filesystem::path& path);

/// Encodes linear RGB as display-referred 8-bit PNG with the given gamma.
Bytes encode_srgb_png(const FloatImage& linear, double gamma = kDefaultGamma);

inline std::string_view as_view(const Bytes& bytes) {
  return {reinterpret_cast<const char*>(bytes.data()), bytes.size()};
}

}  // namespace icomp::io
