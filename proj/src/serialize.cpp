// Copyright 2026 The intrinsic-compose Authors.
// SPDX-License-Identifier: Apache-2.0

#include "icomp/serialize.hpp"

#include <cmath>
#include <string>

#include "icomp/error.hpp"

namespace icomp {

namespace {

double number_field(const nlohmann::json& doc, const char* key) {
  const auto it = doc.find(key);
  if (it == doc.end() || !it->is_number()) throw ParseError(std::string("missing numeric field \"") + key + "\"");
  const double v = it->get<double>();
  if (!std::isfinite(v)) throw ParseError(std::string("field \"") + key + "\" is not finite");
  return v;
}

std::array<double, 3> triple_field(const nlohmann::json& doc, const char* key) {
  const auto& v = doc.at(key);
  if (!v.is_array() || v.size() != 3) throw ParseError(std::string("field \"") + key + "\" must be a 3-number array");
  std::array<double, 3> out{};
  for (std::size_t i = 0; i < 3; ++i) {
    if (!v[i].is_number()) throw ParseError(std::string("field \"") + key + "\" must hold numbers");
    out[i] = v[i].get<double>();
  }
  return out;
}

}  // namespace

nlohmann::json light_to_json(const LightModel& light) {
  return {{"lx", light.direction.x()}, {"ly", light.direction.y()}, {"lz", light.direction.z()}, {"c", light.ambient}};
}

LightModel light_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ParseError("light must be a JSON object");
  if (doc.contains("light") && doc.at("light").is_object()) return light_from_json(doc.at("light"));
  if (doc.contains("lx")) {
    LightModel light;
    light.direction = {number_field(doc, "lx"), number_field(doc, "ly"), number_field(doc, "lz")};
    light.ambient = number_field(doc, "c");
    return light;
  }
  if (doc.contains("direction")) {
    const auto d = triple_field(doc, "direction");
    LightModel light;
    light.direction = {d[0], d[1], d[2]};
    light.ambient = number_field(doc, "ambient");
    return light;
  }
  if (doc.contains("azimuth")) {
    try {
      return light_from_angles(number_field(doc, "azimuth"), number_field(doc, "elevation"),
                               number_field(doc, "intensity"), number_field(doc, "ambient"));
    } catch (const DomainError& e) {
      throw ParseError(e.what());
    }
  }
  throw ParseError("light needs {lx, ly, lz, c}, {direction, ambient} or {azimuth, elevation, intensity, ambient}");
}

nlohmann::json fit_report_to_json(const FitReport& report) {
  nlohmann::json doc;
  doc["light"] = light_to_json(report.light);
  doc["residual_mse"] = report.residual_mse;
  doc["iterations"] = report.iterations;
  doc["degenerate"] = report.degenerate;
  // Rank-deficient fits have an infinite condition number; JSON has no inf.
  if (std::isfinite(report.condition_number)) doc["condition_number"] = report.condition_number;
  else doc["condition_number"] = nullptr;
  doc["pixels"] = report.pixels;
  return doc;
}

nlohmann::json edit_params_to_json(const EditParams& params) {
  return {{"white_balance", params.white_balance},
          {"saturation", params.saturation},
          {"color_curve", params.color_curve},
          {"exposure", params.exposure},
          {"order", params.order_string()}};
}

EditParams edit_params_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ParseError("edit parameters must be a JSON object");
  EditParams p;
  try {
    if (doc.contains("white_balance")) p.white_balance = triple_field(doc, "white_balance");
    if (doc.contains("saturation")) p.saturation = number_field(doc, "saturation");
    if (doc.contains("color_curve")) p.color_curve = triple_field(doc, "color_curve");
    if (doc.contains("exposure")) p.exposure = number_field(doc, "exposure");
    if (doc.contains("order")) {
      if (!doc.at("order").is_string()) throw ParseError("field \"order\" must be a 4-letter string");
      p.order = parse_edit_order(doc.at("order").get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("edit parameters: ") + e.what());
  }
  try {
    p.validate();
  } catch (const DomainError& e) {
    throw ParseError(e.what());
  }
  return p;
}

}  // namespace icomp
