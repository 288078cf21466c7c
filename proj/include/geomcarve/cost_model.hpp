#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace geomcarve {

/// Inference cost that grows linearly with the number of input frames.
struct CostProfile {
  std::string label;
  double per_frame_tflops = 0.0;
};

/// per_frame = tflops / frames. Throws DomainError on nonpositive input.
CostProfile fit_cost_profile(std::string label, double frames, double tflops);

/// per_frame * frames. Throws DomainError for zero frames.
double predict_tflops(const CostProfile& profile, std::size_t frames);

/// Measured 8-frame calibration point of a known architecture.
struct CalibrationPoint {
  std::string arch;
  std::string description;
  double frames;
  double tflops;
};

/// vggt518, vggt1036 and carve1036.
const std::vector<CalibrationPoint>& calibration_points();

/// Profile fitted to the calibration point of `arch`; throws Error if unknown.
CostProfile reference_profile(std::string_view arch);

}  // namespace geomcarve
