#pragma once

#include <string>

#include "bimc/estimators.hpp"
#include "json.hpp"

namespace bimc {

/// Structured report: every field of EstimateReport, including the tuned
/// parameters and solver reports. Doubles are written in shortest round-trip
/// form so report_from_json(to_json(r)) reproduces r exactly.
nlohmann::json to_json(const EstimateReport& r);
EstimateReport report_from_json(const nlohmann::json& j);

nlohmann::json to_json(const SolverReport& r);
nlohmann::json to_json(const TunedParams& t);

/// Field-by-field equality; doubles compared bitwise (NaN equal to NaN).
bool identical(const EstimateReport& a, const EstimateReport& b);

}  // namespace bimc
