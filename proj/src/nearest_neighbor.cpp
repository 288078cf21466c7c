#include "geomcarve/nearest_neighbor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "geomcarve/error.hpp"

namespace geomcarve {

namespace {

void consider(std::size_t index, double d, NearestNeighborGrid::Hit& best) {
  if (d < best.distance || (d == best.distance && index < best.index)) best = {index, d};
}

}  // namespace

std::size_t NearestNeighborGrid::KeyHash::operator()(const Key& k) const {
  std::uint64_t h = 1469598103934665603ull;
  for (std::int64_t v : k) {
    h ^= static_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  }
  return static_cast<std::size_t>(h);
}

NearestNeighborGrid::NearestNeighborGrid(std::span<const Eigen::Vector3d> cloud)
    : points_(cloud.begin(), cloud.end()) {
  if (points_.empty()) throw Error("nearest-neighbor index over an empty cloud");
  Eigen::Vector3d lo = points_.front(), hi = lo;
  for (const auto& p : points_) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const double extent = (hi - lo).maxCoeff();
  const double per_axis = std::max(1.0, std::cbrt(static_cast<double>(points_.size())));
  cell_ = extent > 0.0 ? extent / per_axis : 1.0;
  origin_ = lo;
  lo_ = key_of(lo);
  hi_ = key_of(hi);
  for (std::size_t i = 0; i < points_.size(); ++i) cells_[key_of(points_[i])].push_back(static_cast<std::uint32_t>(i));
}

NearestNeighborGrid::Key NearestNeighborGrid::key_of(const Eigen::Vector3d& p) const {
  Key k;
  for (int a = 0; a < 3; ++a) {
    const double c = std::clamp(std::floor((p[a] - origin_[a]) / cell_), -1e15, 1e15);
    k[a] = static_cast<std::int64_t>(c);
  }
  return k;
}

void NearestNeighborGrid::scan_cell(const Key& k, const Eigen::Vector3d& q, Hit& best) const {
  const auto it = cells_.find(k);
  if (it == cells_.end()) return;
  for (std::uint32_t i : it->second) consider(i, point_distance(points_[i], q), best);
}

NearestNeighborGrid::Hit NearestNeighborGrid::nearest(const Eigen::Vector3d& query) const {
  const Key q = key_of(query);
  std::int64_t start = 0, stop = 0;
  for (int a = 0; a < 3; ++a) {
    start = std::max({start, lo_[a] - q[a], q[a] - hi_[a]});
    stop = std::max({stop, std::abs(q[a] - lo_[a]), std::abs(q[a] - hi_[a])});
  }

  Hit best{0, std::numeric_limits<double>::infinity()};
  for (std::int64_t r = start; r <= stop; ++r) {
    const std::int64_t x0 = std::max(q[0] - r, lo_[0]), x1 = std::min(q[0] + r, hi_[0]);
    const std::int64_t y0 = std::max(q[1] - r, lo_[1]), y1 = std::min(q[1] + r, hi_[1]);
    for (std::int64_t x = x0; x <= x1; ++x) {
      for (std::int64_t y = y0; y <= y1; ++y) {
        if (std::max(std::abs(x - q[0]), std::abs(y - q[1])) == r) {
          const std::int64_t z0 = std::max(q[2] - r, lo_[2]), z1 = std::min(q[2] + r, hi_[2]);
          for (std::int64_t z = z0; z <= z1; ++z) scan_cell({x, y, z}, query, best);
        } else {
          for (std::int64_t z : {q[2] - r, q[2] + r}) {
            if (z >= lo_[2] && z <= hi_[2]) scan_cell({x, y, z}, query, best);
            if (r == 0) break;
          }
        }
      }
    }
    // Cells in ring r + 1 lie at least r cell widths from the query.
    if (best.distance <= static_cast<double>(r) * cell_) break;
  }
  return best;
}

NearestNeighborGrid::Hit brute_force_nearest(std::span<const Eigen::Vector3d> cloud, const Eigen::Vector3d& query) {
  if (cloud.empty()) throw Error("nearest-neighbor query against an empty cloud");
  NearestNeighborGrid::Hit best{0, std::numeric_limits<double>::infinity()};
  for (std::size_t i = 0; i < cloud.size(); ++i) consider(i, point_distance(cloud[i], query), best);
  return best;
}

}  // namespace geomcarve
