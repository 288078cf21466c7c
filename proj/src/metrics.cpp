#include "geomcarve/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <string>

#include "geomcarve/error.hpp"
#include "geomcarve/nearest_neighbor.hpp"

namespace geomcarve {

std::vector<Point3> voxel_downsample(std::span<const Point3> cloud, double voxel) {
  if (!(voxel > 0.0)) throw DomainError("voxel size must be positive");
  struct Cell {
    Point3 sum = Point3::Zero();
    std::size_t count = 0;
  };
  std::map<std::array<std::int64_t, 3>, Cell> cells;
  for (const Point3& p : cloud) {
    const std::array<std::int64_t, 3> key = {static_cast<std::int64_t>(std::floor(p.x() / voxel)),
                                             static_cast<std::int64_t>(std::floor(p.y() / voxel)),
                                             static_cast<std::int64_t>(std::floor(p.z() / voxel))};
    Cell& c = cells[key];
    c.sum += p;
    ++c.count;
  }
  std::vector<Point3> out;
  out.reserve(cells.size());
  for (const auto& [key, c] : cells) out.push_back(c.sum / static_cast<double>(c.count));
  return out;
}

std::vector<double> nearest_distances(std::span<const Point3> from, std::span<const Point3> to) {
  const NearestNeighborGrid grid(to);
  std::vector<double> d;
  d.reserve(from.size());
  for (const Point3& p : from) d.push_back(grid.nearest(p).distance);
  return d;
}

double chamfer_l1(std::span<const Point3> a, std::span<const Point3> b) {
  if (a.empty() || b.empty()) throw DegenerateError("chamfer_l1: empty point cloud");
  const std::vector<double> ab = nearest_distances(a, b);
  const std::vector<double> ba = nearest_distances(b, a);
  return 0.5 * (pairwise_sum(ab) / static_cast<double>(ab.size()) + pairwise_sum(ba) / static_cast<double>(ba.size()));
}

double fscore(std::span<const Point3> a, std::span<const Point3> b, double tau) {
  if (a.empty() || b.empty()) throw DegenerateError("fscore: empty point cloud");
  if (!(tau > 0.0)) throw DomainError("fscore: threshold must be positive");
  auto within = [tau](const std::vector<double>& d) {
    return static_cast<double>(std::count_if(d.begin(), d.end(), [tau](double x) { return x <= tau; })) /
           static_cast<double>(d.size());
  };
  const double precision = within(nearest_distances(a, b));
  const double recall = within(nearest_distances(b, a));
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

PointCloudMetrics evaluate_point_clouds(const SequenceSample& pred, const SequenceSample& gt, double voxel,
                                        std::span<const double> thresholds) {
  const StackedMask mask = joint_mask(pred, gt);
  const Field pp = stack_points(pred), gp = stack_points(gt);
  std::vector<Point3> a, b;
  for (std::size_t i = 0; i < mask.flags.size(); ++i) {
    if (!mask.flags[i]) continue;
    const Point3 x(pp.values[3 * i], pp.values[3 * i + 1], pp.values[3 * i + 2]);
    const Point3 y(gp.values[3 * i], gp.values[3 * i + 1], gp.values[3 * i + 2]);
    if (!x.allFinite() || !y.allFinite()) continue;
    a.push_back(x);
    b.push_back(y);
  }
  if (a.empty()) throw DegenerateError("evaluate_point_clouds: no valid corresponding points");

  PointCloudMetrics m;
  m.alignment = solve_similarity_umeyama(a, b);
  for (Point3& x : a) x = m.alignment.apply(x);
  const std::vector<Point3> da = voxel_downsample(a, voxel);
  const std::vector<Point3> db = voxel_downsample(b, voxel);
  m.pred_points = da.size();
  m.gt_points = db.size();
  m.chamfer = chamfer_l1(da, db);
  m.thresholds.assign(thresholds.begin(), thresholds.end());
  for (double tau : thresholds) m.fscores.push_back(fscore(da, db, tau));
  return m;
}

DepthMetrics depth_rel_delta(FieldView pred, FieldView gt, MaskView mask, DepthAlignment alignment) {
  if (!(pred.shape == gt.shape) || pred.shape.channels != 1 || !mask.matches(pred.shape)) {
    throw ShapeError("depth_rel_delta: expects matching T x H x W depth fields and mask");
  }
  const std::size_t n = pred.shape.frame_pixels();
  DepthMetrics m;
  for (std::size_t i = 0; i < mask.pixels(); ++i) {
    if (mask[i] && !(gt.values[i] > 0.0)) throw DomainError("depth_rel_delta: nonpositive ground-truth depth");
  }

  std::vector<double> frame_scale(pred.shape.frames, 1.0);
  if (alignment == DepthAlignment::Sequence) {
    std::fill(frame_scale.begin(), frame_scale.end(), solve_sequence_scale(pred, gt, mask));
    m.scales = {frame_scale.front()};
  } else if (alignment == DepthAlignment::PerFrame) {
    const FieldShape one{1, pred.shape.height, pred.shape.width, 1};
    for (std::size_t t = 0; t < pred.shape.frames; ++t) {
      frame_scale[t] = solve_sequence_scale(FieldView(one, pred.values.subspan(t * n, n)),
                                            FieldView(one, gt.values.subspan(t * n, n)),
                                            MaskView(1, one.height, one.width, mask.flags.subspan(t * n, n)));
    }
    m.scales = frame_scale;
  }

  std::vector<double> rel;
  std::size_t inliers = 0;
  for (std::size_t i = 0; i < mask.pixels(); ++i) {
    if (!mask[i]) continue;
    const double p = frame_scale[i / n] * pred.values[i];
    const double g = gt.values[i];
    rel.push_back(std::abs(p - g) / g);
    if (p > 0.0 && std::max(p / g, g / p) < kDeltaThreshold) ++inliers;
  }
  if (rel.empty()) throw DegenerateError("depth_rel_delta: empty valid mask");
  m.pixels = rel.size();
  m.rel = pairwise_sum(rel) / static_cast<double>(rel.size());
  m.delta = static_cast<double>(inliers) / static_cast<double>(rel.size());
  return m;
}

DepthMetrics depth_rel_delta(const SequenceSample& pred, const SequenceSample& gt, DepthAlignment alignment) {
  return depth_rel_delta(stack_depth(pred), stack_depth(gt), joint_mask(pred, gt), alignment);
}

PoseMetrics pose_metrics(std::span<const CameraParams> pred, std::span<const CameraParams> gt) {
  const TrajectoryAlignment al = align_trajectory(pred, gt);
  PoseMetrics m;
  std::vector<double> sq;
  for (double r : al.residuals) sq.push_back(r * r);
  m.ate = std::sqrt(pairwise_sum(sq) / static_cast<double>(sq.size()));

  const double s = al.transform.scale;
  for (std::size_t i = 0; i + 1 < pred.size(); ++i) {
    const Eigen::Matrix3d pa = quat_to_rotmat(pred[i].quaternion), pb = quat_to_rotmat(pred[i + 1].quaternion);
    const Eigen::Matrix3d ga = quat_to_rotmat(gt[i].quaternion), gb = quat_to_rotmat(gt[i + 1].quaternion);
    const Eigen::Matrix3d rel_pred = pa.transpose() * pb;
    const Eigen::Matrix3d rel_gt = ga.transpose() * gb;
    const Eigen::Vector3d t_pred = s * (pa.transpose() * (pred[i + 1].translation - pred[i].translation));
    const Eigen::Vector3d t_gt = ga.transpose() * (gt[i + 1].translation - gt[i].translation);
    m.pair_rotation_errors.push_back(rotation_angle(rel_gt.transpose() * rel_pred) * 180.0 / std::numbers::pi);
    m.pair_translation_errors.push_back((t_pred - t_gt).norm());
  }
  const double pairs = static_cast<double>(m.pair_rotation_errors.size());
  m.rpe_r = pairwise_sum(m.pair_rotation_errors) / pairs;
  m.rpe_t = pairwise_sum(m.pair_translation_errors) / pairs;
  return m;
}

double fov_rel(std::span<const CameraParams> pred, std::span<const CameraParams> gt) {
  if (pred.size() != gt.size()) throw ShapeError("fov_rel: camera counts differ");
  if (pred.empty()) throw DegenerateError("fov_rel: no cameras");
  std::vector<double> terms;
  for (std::size_t t = 0; t < pred.size(); ++t) {
    for (int a = 0; a < 2; ++a) {
      if (!(gt[t].fov[a] > 0.0)) throw DomainError("fov_rel: nonpositive ground-truth field of view");
      terms.push_back(std::abs(pred[t].fov[a] - gt[t].fov[a]) / gt[t].fov[a]);
    }
  }
  return pairwise_sum(terms) / static_cast<double>(terms.size());
}

std::vector<double> rank_aggregate(const MetricTable& table) {
  const std::size_t nm = table.methods.size();
  const std::size_t nk = table.metrics.size();
  if (table.higher_is_better.size() != nk || table.values.size() != nm) {
    throw ShapeError("rank_aggregate: table dimensions are inconsistent");
  }
  if (nk == 0) throw DegenerateError("rank_aggregate: no metrics");
  for (std::size_t i = 0; i < nm; ++i) {
    if (table.values[i].size() != nk) throw ShapeError("rank_aggregate: row '" + table.methods[i] + "' has wrong length");
    for (std::size_t k = 0; k < nk; ++k) {
      if (std::isnan(table.values[i][k])) {
        throw Error("rank_aggregate: NaN in cell (" + table.methods[i] + ", " + table.metrics[k] + ")");
      }
    }
  }
  std::vector<double> sum(nm, 0.0);
  for (std::size_t k = 0; k < nk; ++k) {
    std::vector<double> distinct;
    for (std::size_t i = 0; i < nm; ++i) distinct.push_back(table.values[i][k]);
    if (table.higher_is_better[k]) {
      std::sort(distinct.begin(), distinct.end(), std::greater<>());
    } else {
      std::sort(distinct.begin(), distinct.end());
    }
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    for (std::size_t i = 0; i < nm; ++i) {
      const auto pos = std::find(distinct.begin(), distinct.end(), table.values[i][k]) - distinct.begin();
      sum[i] += static_cast<double>(pos + 1);
    }
  }
  for (double& s : sum) s /= static_cast<double>(nk);
  return sum;
}

}  // namespace geomcarve
