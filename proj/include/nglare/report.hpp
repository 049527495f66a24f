#pragma once

#include <json.hpp>

#include "nglare/divergence.hpp"
#include "nglare/scores.hpp"
#include "nglare/stats.hpp"

namespace nglare {

inline constexpr int kReportSchemaVersion = 1;

nlohmann::json to_json(const JssReport& report);
JssReport jss_report_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ProxyScores& s);
nlohmann::json to_json(const BootstrapResult& r);
nlohmann::json to_json(const RankingComparison& r);
nlohmann::json to_json(const AnmCurve& c);

// NaN and infinities become null.
nlohmann::json number_or_null(double v);

}  // namespace nglare
