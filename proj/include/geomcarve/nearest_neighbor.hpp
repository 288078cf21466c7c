#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

namespace geomcarve {

/// Exact nearest-neighbor queries over a fixed cloud, bucketed on a uniform grid.
/// Queries visit cells in rings of growing Chebyshev radius and stop once no
/// unvisited cell can hold a closer point.
class NearestNeighborGrid {
 public:
  explicit NearestNeighborGrid(std::span<const Eigen::Vector3d> cloud);

  struct Hit {
    std::size_t index = 0;
    double distance = 0.0;
  };

  Hit nearest(const Eigen::Vector3d& query) const;
  double cell_size() const { return cell_; }

 private:
  using Key = std::array<std::int64_t, 3>;
  struct KeyHash {
    std::size_t operator()(const Key& k) const;
  };

  Key key_of(const Eigen::Vector3d& p) const;
  void scan_cell(const Key& k, const Eigen::Vector3d& q, Hit& best) const;

  std::vector<Eigen::Vector3d> points_;
  double cell_ = 1.0;
  Eigen::Vector3d origin_ = Eigen::Vector3d::Zero();
  Key lo_{}, hi_{};
  std::unordered_map<Key, std::vector<std::uint32_t>, KeyHash> cells_;
};

/// Euclidean distance; shared by the grid and brute-force paths so both agree bitwise.
inline double point_distance(const Eigen::Vector3d& a, const Eigen::Vector3d& b) { return (a - b).norm(); }

/// O(n m) reference used to validate the grid.
NearestNeighborGrid::Hit brute_force_nearest(std::span<const Eigen::Vector3d> cloud, const Eigen::Vector3d& query);

}  // namespace geomcarve
