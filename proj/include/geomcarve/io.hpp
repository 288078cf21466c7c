#pragma once

#include <filesystem>
#include <string>

#include "geomcarve/sequence.hpp"

namespace geomcarve {

/// On-disk sequence layout: a directory holding manifest.json plus one raw
/// little-endian float32 (or uint8 for masks) file per tensor, row-major.
///
///   depth.f32       T x H x W
///   points.f32      T x H x W x 3
///   mask.u8         T x H x W, one byte per pixel (0/1)
///   conf_depth.f32  T x H x W      (optional)
///   conf_point.f32  T x H x W      (optional)
inline constexpr const char* kManifestName = "manifest.json";
inline constexpr const char* kManifestVersion = "1";

/// Loads and validates a sequence directory, widening storage to double.
/// Errors name the offending file.
SequenceSample read_sequence(const std::filesystem::path& dir);

/// Writes `sample` byte-deterministically. Refuses to replace an existing
/// manifest unless `overwrite` is set; rejects an empty sample.
void write_sequence(const SequenceSample& sample, const std::filesystem::path& dir, bool overwrite = false);

/// Fixed 17-significant-digit rendering used for every real in JSON output.
/// Integral values keep a trailing ".0"; non-finite values render as null.
std::string format_real(double value);

}  // namespace geomcarve
