// Copyright 2026 The intrinsic-compose Authors.
// SPDX-License-Identifier: Apache-2.0

#include "icomp/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include <png.h>

#include "icomp/error.hpp"

namespace icomp::io {

namespace {

float byteswap_float(float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  bits = ((bits & 0xFF000000U) >> 24) | ((bits & 0x00FF0000U) >> 8) | ((bits & 0x0000FF00U) << 8) |
         ((bits & 0x000000FFU) << 24);
  std::memcpy(&v, &bits, 4);
  return v;
}

// Reads one whitespace-delimited header token starting at pos.
std::string next_token(std::string_view bytes, std::size_t& pos) {
  while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
  const std::size_t start = pos;
  while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
  if (start == pos) throw ParseError("truncated PFM header");
  return std::string(bytes.substr(start, pos - start));
}

struct PngReadState {
  std::string_view data;
  std::size_t offset = 0;
};

void png_read_callback(png_structp png, png_bytep out, png_size_t length) {
  auto* state = static_cast<PngReadState*>(png_get_io_ptr(png));
  if (state->offset + length > state->data.size()) png_error(png, "truncated PNG stream");
  std::memcpy(out, state->data.data() + state->offset, length);
  state->offset += length;
}

void png_write_callback(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<Bytes*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

void png_flush_callback(png_structp) {}

[[noreturn]] void png_error_callback(png_structp png, png_const_charp message) {
  // libpng requires the error handler not to return; unwind through longjmp
  // and rethrow outside.
  auto* msg = static_cast<std::string*>(png_get_error_ptr(png));
  if (msg != nullptr) *msg = message;
  png_longjmp(png, 1);
}

void png_warning_callback(png_structp, png_const_charp) {}

}  // namespace

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

void write_file(const std::filesystem::path& path, const Bytes& contents) {
  write_file(path, as_view(contents));
}

Bytes encode_pfm(const FloatImage& img) {
  if (img.channels() != 1 && img.channels() != 3) {
    throw DimensionError("PFM holds 1 or 3 channels, got " + std::to_string(img.channels()));
  }
  require_finite(img, "PFM output");
  std::ostringstream header;
  header << (img.channels() == 3 ? "PF" : "Pf") << "\n" << img.width() << " " << img.height() << "\n-1.0\n";
  const std::string h = header.str();
  Bytes out(h.begin(), h.end());
  const std::size_t row_floats = static_cast<std::size_t>(img.width()) * static_cast<std::size_t>(img.channels());
  std::vector<float> row(row_floats);
  for (int y = img.height() - 1; y >= 0; --y) {
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < img.channels(); ++c) {
        float v = static_cast<float>(img(y, x, c));
        if constexpr (std::endian::native == std::endian::big) v = byteswap_float(v);
        row[static_cast<std::size_t>(x) * static_cast<std::size_t>(img.channels()) + static_cast<std::size_t>(c)] = v;
      }
    }
    const auto* p = reinterpret_cast<const std::uint8_t*>(row.data());
    out.insert(out.end(), p, p + row_floats * sizeof(float));
  }
  return out;
}

FloatImage decode_pfm(std::string_view bytes) {
  std::size_t pos = 0;
  const std::string magic = next_token(bytes, pos);
  int channels = 0;
  if (magic == "PF") channels = 3;
  else if (magic == "Pf") channels = 1;
  else throw ParseError("not a PFM file (magic \"" + magic.substr(0, 8) + "\")");
  int width = 0;
  int height = 0;
  double scale = 0.0;
  try {
    width = std::stoi(next_token(bytes, pos));
    height = std::stoi(next_token(bytes, pos));
    scale = std::stod(next_token(bytes, pos));
  } catch (const std::logic_error&) {
    throw ParseError("malformed PFM header");
  }
  if (width <= 0 || height <= 0 || scale == 0.0) throw ParseError("invalid PFM dimensions or scale");
  ++pos;  // single whitespace byte after the scale
  const bool little = scale < 0.0;
  const bool swap = little != (std::endian::native == std::endian::little);
  const std::size_t count = static_cast<std::size_t>(width) * static_cast<std::size_t>(height) *
                            static_cast<std::size_t>(channels);
  if (bytes.size() < pos + count * sizeof(float)) throw ParseError("truncated PFM payload");

  FloatImage img(height, width, channels);
  const char* src = bytes.data() + pos;
  std::size_t k = 0;
  for (int y = height - 1; y >= 0; --y) {
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < channels; ++c) {
        float v;
        std::memcpy(&v, src + k * sizeof(float), sizeof(float));
        if (swap) v = byteswap_float(v);
        img(y, x, c) = static_cast<double>(v);
        ++k;
      }
    }
  }
  require_finite(img, "PFM input");
  return img;
}

FloatImage read_pfm(const std::filesystem::path& path) {
  const Bytes bytes = read_file(path);
  try {
    return decode_pfm(as_view(bytes));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_pfm(const std::filesystem::path& path, const FloatImage& img) { write_file(path, encode_pfm(img)); }

Bytes encode_pfm_stack(const FloatImage& img) {
  FloatImage planes(img.height() * img.channels(), img.width(), 1);
  for (int c = 0; c < img.channels(); ++c) {
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x) planes(c * img.height() + y, x) = img(y, x, c);
    }
  }
  return encode_pfm(planes);
}

FloatImage decode_pfm_stack(std::string_view bytes, int planes) {
  const FloatImage flat = decode_pfm(bytes);
  if (flat.channels() != 1 || planes < 1 || flat.height() % planes != 0) {
    throw ParseError("PFM stack height " + std::to_string(flat.height()) + " is not a multiple of " +
                     std::to_string(planes) + " planes");
  }
  const int h = flat.height() / planes;
  FloatImage out(h, flat.width(), planes);
  for (int c = 0; c < planes; ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < flat.width(); ++x) out(y, x, c) = flat(c * h + y, x);
    }
  }
  return out;
}

void write_pfm_stack(const std::filesystem::path& path, const FloatImage& img) {
  write_file(path, encode_pfm_stack(img));
}

FloatImage read_pfm_stack(const std::filesystem::path& path, int planes) {
  const Bytes bytes = read_file(path);
  return decode_pfm_stack(as_view(bytes), planes);
}

namespace {

// libpng reports errors through longjmp, so the setjmp frames below hold
// only trivially destructible locals.
bool png_encode_raw(png_bytepp rows, int width, int height, int bit_depth, int color_type, Bytes* out,
                    std::string* error) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, error, png_error_callback, png_warning_callback);
  if (png == nullptr) return false;
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_set_write_fn(png, out, png_write_callback, png_flush_callback);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bit_depth, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_rows(png, info, rows);
  png_write_png(png, info, PNG_TRANSFORM_IDENTITY, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

struct PngDecoded {
  png_structp png = nullptr;
  png_infop info = nullptr;
};

bool png_decode_raw(PngReadState* state, PngDecoded* decoded, std::string* error) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, error, png_error_callback, png_warning_callback);
  if (png == nullptr) return false;
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_set_read_fn(png, state, png_read_callback);
  png_read_png(png, info, PNG_TRANSFORM_EXPAND | PNG_TRANSFORM_STRIP_ALPHA, nullptr);
  decoded->png = png;
  decoded->info = info;
  return true;
}

}  // namespace

Bytes encode_png(const FloatImage& img, int bit_depth) {
  if (img.channels() != 1 && img.channels() != 3) {
    throw DimensionError("PNG output holds 1 or 3 channels, got " + std::to_string(img.channels()));
  }
  if (bit_depth != 8 && bit_depth != 16) throw DomainError("PNG bit depth must be 8 or 16");
  require_finite(img, "PNG output");
  if (img.empty()) throw DimensionError("cannot encode an empty PNG");

  const double max_code = bit_depth == 8 ? 255.0 : 65535.0;
  const std::size_t bytes_per_sample = static_cast<std::size_t>(bit_depth / 8);
  const std::size_t row_bytes =
      static_cast<std::size_t>(img.width()) * static_cast<std::size_t>(img.channels()) * bytes_per_sample;
  std::vector<std::uint8_t> pixels(row_bytes * static_cast<std::size_t>(img.height()));
  auto d = img.data();
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto code = static_cast<std::uint32_t>(std::lround(std::clamp(d[i], 0.0, 1.0) * max_code));
    if (bit_depth == 8) {
      pixels[i] = static_cast<std::uint8_t>(code);
    } else {
      pixels[2 * i] = static_cast<std::uint8_t>(code >> 8);
      pixels[2 * i + 1] = static_cast<std::uint8_t>(code & 0xFF);
    }
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(img.height()));
  for (std::size_t y = 0; y < rows.size(); ++y) rows[y] = pixels.data() + y * row_bytes;

  Bytes out;
  std::string error;
  if (!png_encode_raw(rows.data(), img.width(), img.height(), bit_depth,
                      img.channels() == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, &out, &error)) {
    throw IoError("PNG encode failed: " + error);
  }
  return out;
}

FloatImage decode_png(std::string_view bytes) {
  if (bytes.size() < 8 || png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) != 0) {
    throw ParseError("not a PNG stream");
  }
  std::string error;
  PngReadState state{bytes, 0};
  PngDecoded decoded;
  if (!png_decode_raw(&state, &decoded, &error)) throw ParseError("PNG decode failed: " + error);
  png_structp png = decoded.png;
  png_infop info = decoded.info;

  const int width = static_cast<int>(png_get_image_width(png, info));
  const int height = static_cast<int>(png_get_image_height(png, info));
  const int depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);
  const int channels = (color & PNG_COLOR_MASK_COLOR) ? 3 : 1;
  png_bytepp rows = png_get_rows(png, info);

  FloatImage img(height, width, channels);
  const double max_code = depth == 16 ? 65535.0 : 255.0;
  for (int y = 0; y < height; ++y) {
    const png_bytep row = rows[y];
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < channels; ++c) {
        const std::size_t s =
            static_cast<std::size_t>(x) * static_cast<std::size_t>(channels) + static_cast<std::size_t>(c);
        const double code = depth == 16 ? static_cast<double>((row[2 * s] << 8) | row[2 * s + 1])
                                        : static_cast<double>(row[s]);
        img(y, x, c) = code / max_code;
      }
    }
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

FloatImage read_png(const std::filesystem::path& path) {
  const Bytes bytes = read_file(path);
  try {
    return decode_png(as_view(bytes));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_png(const std::filesystem::path& path, const FloatImage& img, int bit_depth) {
  write_file(path, encode_png(img, bit_depth));
}

ImageFormat sniff_format(std::string_view bytes) {
  if (bytes.size() >= 8 && png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) == 0) {
    return ImageFormat::kPng;
  }
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == 'F' || bytes[1] == 'f')) return ImageFormat::kPfm;
  return ImageFormat::kUnknown;
}

FloatImage decode_image(std::string_view bytes) {
  switch (sniff_format(bytes)) {
    case ImageFormat::kPng: return decode_png(bytes);
    case ImageFormat::kPfm: return decode_pfm(bytes);
    case ImageFormat::kUnknown: break;
  }
  throw ParseError("unrecognized image format (expected PNG or PFM)");
}

FloatImage read_image(const std::filesystem::path& path) {
  const Bytes bytes = read_file(path);
  try {
    return decode_image(as_view(bytes));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

NormalMap decode_normals(std::string_view bytes) {
  const ImageFormat format = sniff_format(bytes);
  if (format == ImageFormat::kPfm) return NormalMap::from_image(decode_pfm(bytes));
  if (format == ImageFormat::kPng) {
    FloatImage img = decode_png(bytes);
    require_channels(img, 3, "normal PNG");
    for (double& v : img.data()) v = 2.0 * v - 1.0;
    return NormalMap::from_image(img, /*normalize=*/true);
  }
  throw ParseError("unrecognized normal map format (expected PFM or PNG)");
}

NormalMap read_normals(const std::filesystem::path& path) {
  const Bytes bytes = read_file(path);
  try {
    return decode_normals(as_view(bytes));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

Bytes encode_srgb_png(const FloatImage& linear, double gamma) {
  return encode_png(linear_to_srgb(linear, gamma), 8);
}

}  // namespace icomp::io
