#pragma once

#include <string>

#include "json.hpp"

namespace geomcarve::detail {

using Json = nlohmann::ordered_json;

// Serializes like Json::dump(indent) except that floating-point numbers use
// format_real, so every run prints the same 17 significant digits.
std::string dump_json(const Json& value, int indent = 2);

}  // namespace geomcarve::detail
