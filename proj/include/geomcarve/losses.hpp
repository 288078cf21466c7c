#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "geomcarve/alignment.hpp"
#include "geomcarve/camera.hpp"
#include "geomcarve/grid.hpp"

namespace geomcarve {

/// Value of one objective plus its analytic gradients.
///
/// Gradient keys and layouts:
///   "pred"    same layout as the prediction field
///   "weights" / "conf"  one entry per pixel of the weight field
///   "points", "depth"   point / depth fields of the consistency loss
///   "camera"  frames x 9, each row [t, q, theta] as in CameraParams::to_vector
struct LossReport {
  std::string name;
  double value = 0.0;
  std::size_t element_count = 0;
  std::map<std::string, std::vector<double>> gradients;
  std::map<std::string, double> parts;
  std::vector<std::string> warnings;
};

struct ConfidenceConfig {
  double alpha = 0.2;
};

inline constexpr double kDefaultDepthClamp = 1e-3;

/// W = 1 / max(D, clamp_min) on the mask, 0 elsewhere.
WeightMap weight_inverse_depth(const ScalarGrid& gt_depth, const ValidMask& mask,
                               double clamp_min = kDefaultDepthClamp);
Field weight_inverse_depth(FieldView gt_depth, MaskView mask, double clamp_min = kDefaultDepthClamp);

/// Mean over masked pixels of W_p |pred_p - gt_p| (Euclidean norm across channels).
LossReport loss_reg(FieldView pred, FieldView gt, FieldView weights, MaskView mask);

/// Forward differences along x and y within each frame. A term needs both of its
/// pixels valid and takes the weight of its left/top pixel.
LossReport loss_spatial_gradient(FieldView pred, FieldView gt, FieldView weights, MaskView mask);

/// loss_reg weighted by a learnable confidence map plus mean |-alpha log conf|.
LossReport loss_confidence_weighted(FieldView pred, FieldView gt, FieldView conf, MaskView mask,
                                    const ConfidenceConfig& cfg = {});

/// Forward differences between consecutive frames at co-located pixels,
/// weighted by the earlier frame.
LossReport loss_temporal_gradient(FieldView pred, FieldView gt, FieldView weights, MaskView mask);

/// Per-frame robust scale-shift alignment, then weighted L1 residual; mean of
/// per-frame means. The alignment is treated as a constant in the gradient.
LossReport loss_frame_aligned(FieldView pred, FieldView gt, FieldView weights, MaskView mask);

/// Same over local spherical regions of a single point map. Regions that
/// cannot be aligned are skipped with a warning.
LossReport loss_sphere_aligned(FieldView pred, FieldView gt, FieldView weights, MaskView mask,
                               std::span<const SphereRegion> regions);

/// Mean over frames of the L1 norm of [t, q, theta] differences, after flipping
/// the predicted quaternion into the ground truth's hemisphere.
LossReport loss_camera(std::span<const CameraParams> pred, std::span<const CameraParams> gt);

/// Mean over masked pixels of sum_c |unproject(depth, camera) - points|.
LossReport loss_consistency(FieldView points, FieldView depth, std::span<const CameraParams> cameras,
                            MaskView mask);

}  // namespace geomcarve
