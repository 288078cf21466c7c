#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>

namespace geomcarve {

/// Runs one `geomcarve` command. `args` excludes the program name.
///
/// Every successful command writes a single JSON object to `out` and returns 0.
/// Runtime failures write {"error": ...} to `out` and return 1; malformed
/// command lines print usage to `err` and return 2.
int run_command(std::span<const std::string> args, std::ostream& out, std::ostream& err);

/// GEOMCARVE_SEED when set to an unsigned integer, otherwise kDefaultSeed.
std::uint64_t default_seed();

}  // namespace geomcarve
