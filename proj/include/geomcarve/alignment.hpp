#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "geomcarve/camera.hpp"
#include "geomcarve/grid.hpp"
#include "geomcarve/sequence.hpp"

namespace geomcarve {

using Point3 = Eigen::Vector3d;

/// Scale-shift map x -> scale * x + shift. `shift` has one entry per channel.
struct ScaleShift {
  double scale = 1.0;
  std::vector<double> shift;

  // Diagnostics of the robust solve.
  double truncation = 0.0;     // residual cap of the truncated-L1 objective
  double objective = 0.0;      // weighted truncated-L1 objective at (scale, shift)
  double ols_objective = 0.0;  // same objective at the least-squares start
};

struct Similarity {
  double scale = 1.0;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Point3 apply(const Point3& x) const { return scale * (rotation * x) + translation; }
};

/// Local region S_j = { p valid : |P_p - P_center| <= radius }.
struct SphereRegion {
  std::size_t center = 0;  // flat pixel index
  double radius = 0.0;
  std::vector<std::size_t> members;
};

struct SphereSampling {
  std::size_t count = 16;
  // Fixed fraction of the scene diagonal; when empty each region draws one
  // log-uniformly from [min_radius_frac, max_radius_frac].
  std::optional<double> radius_frac;
  double min_radius_frac = 0.05;
  double max_radius_frac = 0.25;
  std::uint64_t seed = 2025;
};

struct TrajectoryAlignment {
  Similarity transform;
  std::vector<double> residuals;  // per-frame camera-center distance after alignment
};

// Robust scale-shift solver settings. These are fixed by design; exposed for tests.
inline constexpr double kTruncationQuantile = 0.9;
inline constexpr int kIrlsIterations = 10;

/// Scale s > 0 minimizing sum_i w_i |s * pred_i - gt_i|: the weighted median of
/// gt_i / pred_i under weights w_i |pred_i|, lower median on ties.
/// Elements with zero weight or zero prediction are ignored.
double l1_optimal_scale(std::span<const double> pred, std::span<const double> gt,
                        std::span<const double> weights);

/// Per-sequence scale from the depth channels over the joint valid mask.
/// `weights`, when given, holds one map per frame.
double solve_sequence_scale(const SequenceSample& pred, const SequenceSample& gt,
                            std::span<const WeightMap> weights = {});

/// Same over arbitrary fields; every channel of a masked pixel is one element.
double solve_sequence_scale(FieldView pred, FieldView gt, MaskView mask,
                            std::optional<FieldView> weights = std::nullopt);

/// Robust per-frame scale-shift: minimizes the weighted truncated-L1 objective
/// sum_p w_p min(|a pred_p + B - gt_p|, tau), with tau the 90th percentile of
/// the weighted least-squares residuals, by truncated IRLS started at least
/// squares. The returned objective never exceeds the least-squares one.
ScaleShift solve_frame_scale_shift(FieldView pred, FieldView gt, FieldView weights, MaskView mask);

/// Same solver restricted to the listed pixel indices.
ScaleShift solve_scale_shift(FieldView pred, FieldView gt, FieldView weights,
                             std::span<const std::size_t> indices);

std::vector<SphereRegion> sample_sphere_regions(const VecGrid& points, const ValidMask& mask,
                                                const SphereSampling& sampling);

/// Closed-form least-squares similarity with y ~ s R x + t (Umeyama).
Similarity solve_similarity_umeyama(std::span<const Point3> pred, std::span<const Point3> gt);

Similarity solve_similarity_umeyama(std::span<const Point3> pred, std::span<const Point3> gt,
                                    std::span<const std::pair<std::size_t, std::size_t>> correspondences);

/// Similarity over camera centers (the translations) mapping pred onto gt.
TrajectoryAlignment align_trajectory(std::span<const CameraParams> pred,
                                     std::span<const CameraParams> gt);

}  // namespace geomcarve
