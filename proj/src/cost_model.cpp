#include "geomcarve/cost_model.hpp"

#include <algorithm>
#include <cmath>

#include "geomcarve/error.hpp"

namespace geomcarve {

CostProfile fit_cost_profile(std::string label, double frames, double tflops) {
  if (!(frames > 0.0) || !(tflops > 0.0) || !std::isfinite(frames) || !std::isfinite(tflops)) {
    throw DomainError("fit_cost_profile: frames and TFLOPs must be positive");
  }
  return CostProfile{std::move(label), tflops / frames};
}

double predict_tflops(const CostProfile& profile, std::size_t frames) {
  if (frames == 0) throw DomainError("predict_tflops: frame count must be positive");
  if (!(profile.per_frame_tflops > 0.0)) throw DomainError("predict_tflops: profile has nonpositive cost");
  return profile.per_frame_tflops * static_cast<double>(frames);
}

const std::vector<CalibrationPoint>& calibration_points() {
  // Measured with 8 input frames on one H200.
  static const std::vector<CalibrationPoint> points = {
      {"vggt518", "VGGT, 518x518 input", 8.0, 25.57},
      {"vggt1036", "VGGT, 1036x1036 input", 8.0, 101.99},
      {"carve1036", "gated cross-attention fusion, 1036x1036 input", 8.0, 52.97},
  };
  return points;
}

CostProfile reference_profile(std::string_view arch) {
  const auto& pts = calibration_points();
  const auto it = std::find_if(pts.begin(), pts.end(), [&](const CalibrationPoint& p) { return p.arch == arch; });
  if (it == pts.end()) throw Error("unknown architecture '" + std::string(arch) + "'");
  return fit_cost_profile(it->arch, it->frames, it->tflops);
}

}  // namespace geomcarve
