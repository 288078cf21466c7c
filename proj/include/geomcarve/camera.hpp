#pragma once

#include <array>
#include <cstddef>

#include <Eigen/Core>

#include "geomcarve/grid.hpp"

namespace geomcarve {

/// Pinhole camera as predicted per frame: camera-to-world rotation as a
/// quaternion (w, x, y, z), camera position in meters, and full field-of-view
/// angles (theta_x, theta_y) in radians.
///
/// A camera-frame point X maps to world as R(q) X + translation. The quaternion
/// is kept as given; every consumer normalizes it on use.
struct CameraParams {
  Eigen::Vector4d quaternion{1.0, 0.0, 0.0, 0.0};
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  Eigen::Vector2d fov{1.0, 1.0};

  /// Packs as [t, q, theta], the 9-vector layout used by the camera loss.
  Eigen::Matrix<double, 9, 1> to_vector() const;
  static CameraParams from_vector(const Eigen::Matrix<double, 9, 1>& g);
};

struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;

  Eigen::Matrix3d matrix() const;
};

/// Rotation matrix of q / |q|. Throws DegenerateError when |q| <= 1e-12.
Eigen::Matrix3d quat_to_rotmat(const Eigen::Vector4d& q);

/// Partial derivatives dR/dq_i of quat_to_rotmat with respect to the raw
/// (unnormalized) quaternion components, normalization included.
std::array<Eigen::Matrix3d, 4> quat_to_rotmat_jacobian(const Eigen::Vector4d& q);

/// Unit quaternion (w >= 0) of a proper rotation matrix.
Eigen::Vector4d rotmat_to_quat(const Eigen::Matrix3d& r);

/// Geodesic angle of a rotation matrix in radians, in [0, pi].
double rotation_angle(const Eigen::Matrix3d& r);

/// Rotation by `angle` radians about `axis` (need not be unit length).
Eigen::Matrix3d axis_angle(const Eigen::Vector3d& axis, double angle);

CameraParams normalized(const CameraParams& cam);

/// fx = W / (2 tan(theta_x / 2)), fy likewise, principal point at the image center.
Intrinsics fov_to_intrinsics(const Eigen::Vector2d& theta, std::size_t width, std::size_t height);

/// d fx / d theta_x and d fy / d theta_y.
Eigen::Vector2d fov_to_focal_derivative(const Eigen::Vector2d& theta, std::size_t width,
                                        std::size_t height);

Eigen::Vector2d intrinsics_to_fov(const Intrinsics& k, std::size_t width, std::size_t height);

/// K^-1 p for pixel (u, v), using the pixel-center convention p = (u + 0.5, v + 0.5, 1).
Eigen::Vector3d pixel_ray(const Intrinsics& k, double u, double v);

/// World-space point map of a depth grid. Unmasked pixels are NaN.
/// Throws DomainError if a masked pixel has nonpositive or non-finite depth.
VecGrid unproject(const ScalarGrid& depth, const CameraParams& camera, const ValidMask& mask);

struct Projection {
  VecGrid pixels;     // (u, v) pixel indices; center of pixel (u, v) maps to (u, v)
  ScalarGrid depths;  // camera-frame z; negative behind the camera
};

/// Inverse of unproject. Points at zero camera depth get non-finite pixels.
Projection project(const VecGrid& points, const CameraParams& camera);

}  // namespace geomcarve
