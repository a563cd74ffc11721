// Copyright 2026 The intrinsic-compose Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <nlohmann/json.hpp>

#include "icomp/edits.hpp"
#include "icomp/lighting.hpp"

namespace icomp {

/// {"lx": .., "ly": .., "lz": .., "c": ..}
nlohmann::json light_to_json(const LightModel& light);

/// Accepts the record written by light_to_json, {"direction": [x, y, z],
/// "ambient": c}, or {"azimuth", "elevation", "intensity", "ambient"} in
/// radians. Throws ParseError on anything else.
LightModel light_from_json(const nlohmann::json& doc);

nlohmann::json fit_report_to_json(const FitReport& report);

/// {"white_balance": [3], "saturation", "color_curve": [3], "exposure",
/// "order": "WSCE"}. Missing fields keep their identity value.
nlohmann::json edit_params_to_json(const EditParams& params);
EditParams edit_params_from_json(const nlohmann::json& doc);

}  // namespace icomp
