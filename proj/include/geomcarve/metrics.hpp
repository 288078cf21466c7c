#pragma once

#include <span>
#include <string>
#include <vector>

#include "geomcarve/alignment.hpp"
#include "geomcarve/camera.hpp"
#include "geomcarve/grid.hpp"
#include "geomcarve/sequence.hpp"

namespace geomcarve {

inline constexpr double kDefaultVoxelSize = 0.02;
inline constexpr double kDeltaThreshold = 1.25;
inline const std::vector<double> kDefaultFscoreThresholds = {0.05, 0.25, 0.50};

/// One centroid per occupied voxel, ordered by voxel index (x, then y, then z).
std::vector<Point3> voxel_downsample(std::span<const Point3> cloud, double voxel);

/// Nearest-neighbor distance from each point of `from` to the cloud `to`.
std::vector<double> nearest_distances(std::span<const Point3> from, std::span<const Point3> to);

/// 0.5 * (mean_a d(a, B) + mean_b d(b, A)) with Euclidean point distances.
double chamfer_l1(std::span<const Point3> a, std::span<const Point3> b);

/// Harmonic mean of precision (a within tau of b) and recall (b within tau of a).
double fscore(std::span<const Point3> a, std::span<const Point3> b, double tau);

struct PointCloudMetrics {
  double chamfer = 0.0;
  std::vector<double> thresholds;
  std::vector<double> fscores;
  Similarity alignment;
  std::size_t pred_points = 0;  // after downsampling
  std::size_t gt_points = 0;
};

/// Point-cloud protocol: stack world-space point maps over the joint valid mask,
/// solve a similarity from the pixel correspondences, apply it to the prediction,
/// voxel-downsample both clouds, then score.
PointCloudMetrics evaluate_point_clouds(const SequenceSample& pred, const SequenceSample& gt,
                                        double voxel = kDefaultVoxelSize,
                                        std::span<const double> thresholds = kDefaultFscoreThresholds);

enum class DepthAlignment {
  None,      // raw predictions
  Sequence,  // one scale for the whole sequence (video depth)
  PerFrame,  // one scale per frame (monocular depth)
};

struct DepthMetrics {
  double rel = 0.0;
  double delta = 0.0;  // fraction with max(pred/gt, gt/pred) < 1.25
  std::vector<double> scales;
  std::size_t pixels = 0;
};

/// Pred and gt are T x H x W; metrics pool every masked pixel of every frame.
DepthMetrics depth_rel_delta(FieldView pred, FieldView gt, MaskView mask, DepthAlignment alignment);
DepthMetrics depth_rel_delta(const SequenceSample& pred, const SequenceSample& gt, DepthAlignment alignment);

struct PoseMetrics {
  double ate = 0.0;    // RMS camera-center residual after similarity alignment
  double rpe_r = 0.0;  // mean consecutive-pair rotation error, degrees
  double rpe_t = 0.0;  // mean consecutive-pair translation error, aligned scale
  std::vector<double> pair_rotation_errors;
  std::vector<double> pair_translation_errors;
};

PoseMetrics pose_metrics(std::span<const CameraParams> pred, std::span<const CameraParams> gt);

/// Mean over frames and both axes of |theta_pred - theta_gt| / theta_gt.
double fov_rel(std::span<const CameraParams> pred, std::span<const CameraParams> gt);

struct MetricTable {
  std::vector<std::string> methods;
  std::vector<std::string> metrics;
  std::vector<bool> higher_is_better;        // per metric
  std::vector<std::vector<double>> values;  // [method][metric]
};

/// Dense per-metric ranks (ties share the lower rank) averaged over metrics.
std::vector<double> rank_aggregate(const MetricTable& table);

}  // namespace geomcarve
