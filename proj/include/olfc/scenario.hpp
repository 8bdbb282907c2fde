#pragma once

#include <string>
#include <vector>

#include "olfc/sim.hpp"

namespace olfc {

/// Reads and fully validates a scenario file (JSON, one document = one
/// reproducible experiment). Throws ParseError for structural problems,
/// ValidationError with every violated invariant for semantic ones.
Scenario load_scenario(const std::string& path);

/// Same, from an in-memory document.
Scenario parse_scenario(const std::string& text, const std::string& origin = "<string>");

/// Serializes the fully-resolved scenario; load(parse(dump(s))) reproduces
/// the same run byte for byte.
std::string scenario_to_json(const Scenario& scenario);

/// Built-in, fully-specified example scenarios.
std::vector<std::string> preset_names();
bool is_preset(const std::string& name);
Scenario preset_scenario(const std::string& name);

}  // namespace olfc
