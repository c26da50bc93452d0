#pragma once

#include <string>

#include <json.hpp>

namespace fluctuant {

// Parse a TOML subset into a JSON document. Supported: [dotted.table]
// headers, `key = value` pairs, strings with basic escapes, booleans,
// integers, floats, and (nested) arrays which may span lines. Not supported:
// inline tables, arrays of tables, dotted keys, dates. Errors raise
// ConfigError with the offending line number.
nlohmann::json parse_toml(const std::string& text);

// Load a config file: .json parsed as JSON, anything else as TOML.
nlohmann::json load_config_file(const std::string& path);

}  // namespace fluctuant
