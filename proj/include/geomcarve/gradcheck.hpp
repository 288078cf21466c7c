#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace geomcarve {

struct GradcheckResult {
  std::string loss;
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;  // input coordinates compared
  int resamples = 0;            // instances rejected for sitting near an L1 kink
};

/// Losses with analytic gradients: reg, sg, tg, conf, consis, cam.
std::vector<std::string> gradcheck_losses();

/// Compares analytic gradients against central finite differences with step
/// `epsilon` over every input coordinate of a random 2-frame 4x4 instance
/// (depth-like and point-like channels for the field losses; depth, points and
/// all nine camera parameters for consis). Instances with any L1 term within
/// 10 * epsilon of its kink are redrawn; after 100 redraws an Error is thrown.
///
/// Relative error per coordinate is |a - n| / max(|a|, |n|, 1e-5).
GradcheckResult gradcheck(std::string_view loss_name, std::uint64_t seed, double epsilon = 1e-6);

}  // namespace geomcarve
