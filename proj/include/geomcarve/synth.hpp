#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "geomcarve/sequence.hpp"

namespace geomcarve {

enum class ScenePreset {
  Plane,        // wall facing cameras that translate and roll in a parallel plane
  BoxRoom,      // open-topped room seen from an inside orbit; sky above the walls
  SphereField,  // random spheres seen from an outside orbit; sky background
};

/// Throws Error for names other than plane, box-room, sphere-field.
ScenePreset parse_preset(std::string_view name);
std::string preset_name(ScenePreset preset);

inline constexpr std::uint64_t kDefaultSeed = 2025;

/// Ray-cast scene: depth is the camera-frame z of the first hit, points are
/// unproject(depth, camera), sky pixels are masked out with NaN depth, and both
/// confidence maps are 1. Deterministic in `seed`. Requires width, height >= 8.
SequenceSample generate_scene(ScenePreset preset, std::size_t frames, std::size_t width, std::size_t height,
                              std::uint64_t seed = kDefaultSeed);

/// Ray-casts the scene geometry generate_scene builds for `seed` from an
/// arbitrary camera. The plane preset is the wall z = 6.
Frame render_view(ScenePreset preset, const CameraParams& camera, std::size_t width, std::size_t height,
                  std::uint64_t seed = kDefaultSeed);

/// Depth, points and camera translations times `factor`.
struct GlobalScale {
  double factor = 1.0;
};

/// Frame t: depth -> scale[t] * depth + depth_shift[t], points -> scale[t] * points + point_shift[t].
struct PerFrameAffine {
  std::vector<double> scale;
  std::vector<double> depth_shift;
  std::vector<Eigen::Vector3d> point_shift;

  /// Scales in [1 - magnitude, 1 + magnitude], shifts in [-magnitude, magnitude].
  static PerFrameAffine random(std::size_t frames, double magnitude, std::uint64_t seed);
};

/// Gaussian noise of standard deviation sigma on masked depth and point values.
struct AdditiveNoise {
  double sigma = 0.0;
  std::uint64_t seed = kDefaultSeed;
};

/// Each camera rotation composed with a rotation of `angle` radians about a random axis.
struct PoseJitter {
  double angle = 0.0;
  std::uint64_t seed = kDefaultSeed;
};

/// Field-of-view angles times `factor`.
struct FovBias {
  double factor = 1.0;
};

using Corruption = std::variant<GlobalScale, PerFrameAffine, AdditiveNoise, PoseJitter, FovBias>;

SequenceSample corrupt(const SequenceSample& sample, const Corruption& corruption);
SequenceSample corrupt(const SequenceSample& sample, std::span<const Corruption> corruptions);

}  // namespace geomcarve
