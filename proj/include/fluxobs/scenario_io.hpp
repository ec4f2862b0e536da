#pragma once

#include <istream>
#include <string>
#include <vector>

#include "fluxobs/harness.hpp"

namespace fluxobs {

/// Raised when a scenario argument is neither a readable file nor a preset.
class ScenarioNotFound : public ConfigError {
 public:
  explicit ScenarioNotFound(const std::string& what);
};

const std::vector<std::string>& preset_names();

/// Throws ScenarioNotFound for an unknown name.
Scenario preset(const std::string& name);

/// Parses the key = value format. A leading `preset = <name>` line selects the
/// base scenario; otherwise keys override a default-constructed Scenario.
/// Unknown keys and malformed values throw ConfigError with key and line.
Scenario parse_scenario(std::istream& in);
Scenario parse_scenario_string(const std::string& text);

/// A path to a scenario file, or a preset name.
Scenario load_scenario(const std::string& path_or_preset);

/// Sets one key as it would appear in a file. `line` is only used in errors.
void apply_setting(Scenario& sc, const std::string& key, const std::string& value, int line = 0);

/// Full key = value listing; parse_scenario_string(serialize_scenario(s)) == s.
std::string serialize_scenario(const Scenario& sc);

/// Keys accepted by apply_setting, in serialization order (bias keys shown
/// with index 0).
std::vector<std::string> scenario_keys();

}  // namespace fluxobs
