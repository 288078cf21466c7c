#pragma once

#include <optional>
#include <vector>

#include "geomcarve/camera.hpp"
#include "geomcarve/grid.hpp"

namespace geomcarve {

struct Frame {
  ScalarGrid depth;
  VecGrid points;
  ValidMask mask;
  CameraParams camera;
  std::optional<ScalarGrid> conf_depth;
  std::optional<ScalarGrid> conf_point;
};

/// Ordered frames sharing one image size.
struct SequenceSample {
  std::vector<Frame> frames;

  std::size_t size() const { return frames.size(); }
  std::size_t height() const { return frames.empty() ? 0 : frames.front().depth.height; }
  std::size_t width() const { return frames.empty() ? 0 : frames.front().depth.width; }

  /// Throws ShapeError on an empty sample or inconsistent frame dimensions.
  void validate() const;

  std::vector<CameraParams> cameras() const;
};

Field stack_depth(const SequenceSample& s);
Field stack_points(const SequenceSample& s);
StackedMask stack_mask(const SequenceSample& s);
/// Throws Error if any frame lacks the confidence grid.
Field stack_conf_depth(const SequenceSample& s);
Field stack_conf_point(const SequenceSample& s);

/// Pixelwise AND of the two samples' masks.
StackedMask joint_mask(const SequenceSample& a, const SequenceSample& b);

}  // namespace geomcarve
