#pragma once

#include <iosfwd>
#include <string>

#include <nlohmann/json.hpp>

#include "herding/sim.hpp"

namespace herding
{

inline constexpr const char* kScenarioSchema = "herding-scenario/1";
inline constexpr const char* kSummarySchema  = "herding-summary/1";

// Missing keys keep their defaults; unknown keys and wrong types raise
// ValidationError with the dotted field path.
Scenario       scenario_from_json( const nlohmann::json& j );
nlohmann::json scenario_to_json( const Scenario& sc );
Scenario       load_scenario( const std::string& path );

// "a.b.c=value"; value is parsed as JSON, or taken as a string when that fails.
// A bare key ("p1") is resolved to its unique section ("gains.p1").
void apply_override( nlohmann::json& j, const std::string& assignment );

nlohmann::json summary_to_json( const RunLog& log );
void           write_summary_json( std::ostream& os, const RunLog& log );

} // namespace herding
