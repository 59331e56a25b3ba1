#pragma once

#include <string>

#include <json.hpp>

#include "tdiff/estimators.hpp"
#include "tdiff/gof.hpp"
#include "tdiff/misspec.hpp"
#include "tdiff/model.hpp"
#include "tdiff/simulate.hpp"

namespace tdiff {

using Json = nlohmann::json;

/// {"kind": "TOU", "rho1": .., "rho2": .., "sigma": .., "theta": ..} and the
/// analogous shapes; general models are written as affine pieces
///   {"kind": "GeneralThreshold", "trends": [{"intercept": a, "slope": b}, ..],
///    "sigma": s, "thresholds": [..]}
/// and only when built from such pieces.
Json model_to_json(const ModelSpec& model);
/// Throws ConfigError naming the offending field, prefixed by `where`.
ModelSpec model_from_json(const Json& j, const std::string& where = "model");

/// [[lo, hi], ...]
Json box_to_json(const ParamBox& box);
ParamBox box_from_json(const Json& j, const std::string& where = "box");

/// {"family": "none" | "linear" | "scaled-threshold" | "tabulated", ...}
Contamination contamination_from_json(const Json& j, const Tou& base, const std::string& where = "contamination");

/// "stationary", {"kind": "fixed", "x0": ..} or {"kind": "burnin", "x0": .., "duration": ..}.
InitRule init_from_json(const Json& j, const std::string& where = "init");

Json estimate_to_json(const ThresholdEstimate& est);
Json gof_report_to_json(const GofReport& report);

/// Typed field access with ConfigError on missing or mistyped entries.
double require_number(const Json& j, const std::string& key, const std::string& where);
double number_or(const Json& j, const std::string& key, double fallback, const std::string& where);

}  // namespace tdiff
