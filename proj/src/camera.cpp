#include "geomcarve/camera.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "geomcarve/error.hpp"

namespace geomcarve {

namespace {

constexpr double kMinQuatNorm = 1e-12;

Eigen::Vector4d unit_quaternion(const Eigen::Vector4d& q) {
  const double n = q.norm();
  if (!(n > kMinQuatNorm)) throw DegenerateError("degenerate quaternion");
  return q / n;
}

void check_fov(const Eigen::Vector2d& theta) {
  for (int i = 0; i < 2; ++i) {
    if (!(theta[i] > 0.0 && theta[i] < std::numbers::pi)) {
      throw DomainError("field of view must lie in (0, pi), got " + std::to_string(theta[i]));
    }
  }
}

}  // namespace

Eigen::Matrix<double, 9, 1> CameraParams::to_vector() const {
  Eigen::Matrix<double, 9, 1> g;
  g << translation, quaternion, fov;
  return g;
}

CameraParams CameraParams::from_vector(const Eigen::Matrix<double, 9, 1>& g) {
  CameraParams c;
  c.translation = g.segment<3>(0);
  c.quaternion = g.segment<4>(3);
  c.fov = g.segment<2>(7);
  return c;
}

Eigen::Matrix3d Intrinsics::matrix() const {
  Eigen::Matrix3d k;
  k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  return k;
}

Eigen::Matrix3d quat_to_rotmat(const Eigen::Vector4d& q) {
  const Eigen::Vector4d n = unit_quaternion(q);
  const double w = n[0], x = n[1], y = n[2], z = n[3];
  Eigen::Matrix3d r;
  r << 1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y),
      2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x),
      2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y);
  return r;
}

std::array<Eigen::Matrix3d, 4> quat_to_rotmat_jacobian(const Eigen::Vector4d& q) {
  const double len = q.norm();
  const Eigen::Vector4d n = unit_quaternion(q);
  const double w = n[0], x = n[1], y = n[2], z = n[3];

  // Derivatives with respect to the unit quaternion components.
  std::array<Eigen::Matrix3d, 4> d_unit;
  d_unit[0] << 0.0, -z, y, z, 0.0, -x, -y, x, 0.0;
  d_unit[1] << 0.0, y, z, y, -2.0 * x, -w, z, w, -2.0 * x;
  d_unit[2] << -2.0 * y, x, w, x, 0.0, z, -w, z, -2.0 * y;
  d_unit[3] << -2.0 * z, -w, x, w, -2.0 * z, y, x, y, 0.0;
  for (auto& m : d_unit) m *= 2.0;

  // Chain through n = q / |q|: dn/dq = (I - n n^T) / |q|.
  const Eigen::Matrix4d dn_dq = (Eigen::Matrix4d::Identity() - n * n.transpose()) / len;
  std::array<Eigen::Matrix3d, 4> d_raw;
  for (int j = 0; j < 4; ++j) {
    d_raw[j].setZero();
    for (int i = 0; i < 4; ++i) d_raw[j] += d_unit[i] * dn_dq(i, j);
  }
  return d_raw;
}

Eigen::Vector4d rotmat_to_quat(const Eigen::Matrix3d& r) {
  // Shepperd: pivot on the largest of (w, x, y, z) magnitudes.
  const double tr = r.trace();
  Eigen::Vector4d q;
  if (tr >= r(0, 0) && tr >= r(1, 1) && tr >= r(2, 2)) {
    const double s = 2.0 * std::sqrt(1.0 + tr);
    q << 0.25 * s, (r(2, 1) - r(1, 2)) / s, (r(0, 2) - r(2, 0)) / s, (r(1, 0) - r(0, 1)) / s;
  } else if (r(0, 0) >= r(1, 1) && r(0, 0) >= r(2, 2)) {
    const double s = 2.0 * std::sqrt(1.0 + r(0, 0) - r(1, 1) - r(2, 2));
    q << (r(2, 1) - r(1, 2)) / s, 0.25 * s, (r(0, 1) + r(1, 0)) / s, (r(0, 2) + r(2, 0)) / s;
  } else if (r(1, 1) >= r(2, 2)) {
    const double s = 2.0 * std::sqrt(1.0 + r(1, 1) - r(0, 0) - r(2, 2));
    q << (r(0, 2) - r(2, 0)) / s, (r(0, 1) + r(1, 0)) / s, 0.25 * s, (r(1, 2) + r(2, 1)) / s;
  } else {
    const double s = 2.0 * std::sqrt(1.0 + r(2, 2) - r(0, 0) - r(1, 1));
    q << (r(1, 0) - r(0, 1)) / s, (r(0, 2) + r(2, 0)) / s, (r(1, 2) + r(2, 1)) / s, 0.25 * s;
  }
  if (q[0] < 0.0) q = -q;
  return q.normalized();
}

double rotation_angle(const Eigen::Matrix3d& r) {
  const Eigen::Vector3d axis(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  return std::atan2(0.5 * axis.norm(), 0.5 * (r.trace() - 1.0));
}

Eigen::Matrix3d axis_angle(const Eigen::Vector3d& axis, double angle) {
  const double n = axis.norm();
  if (!(n > 0.0)) return Eigen::Matrix3d::Identity();
  const Eigen::Vector3d k = axis / n;
  Eigen::Matrix3d kx;
  kx << 0.0, -k.z(), k.y(), k.z(), 0.0, -k.x(), -k.y(), k.x(), 0.0;
  return Eigen::Matrix3d::Identity() + std::sin(angle) * kx + (1.0 - std::cos(angle)) * kx * kx;
}

CameraParams normalized(const CameraParams& cam) {
  CameraParams out = cam;
  out.quaternion = unit_quaternion(cam.quaternion);
  return out;
}

Intrinsics fov_to_intrinsics(const Eigen::Vector2d& theta, std::size_t width, std::size_t height) {
  check_fov(theta);
  const double w = static_cast<double>(width);
  const double h = static_cast<double>(height);
  return Intrinsics{w / (2.0 * std::tan(theta[0] / 2.0)), h / (2.0 * std::tan(theta[1] / 2.0)),
                    w / 2.0, h / 2.0};
}

Eigen::Vector2d fov_to_focal_derivative(const Eigen::Vector2d& theta, std::size_t width,
                                        std::size_t height) {
  check_fov(theta);
  const double sx = std::sin(theta[0] / 2.0);
  const double sy = std::sin(theta[1] / 2.0);
  return {-static_cast<double>(width) / (4.0 * sx * sx),
          -static_cast<double>(height) / (4.0 * sy * sy)};
}

Eigen::Vector2d intrinsics_to_fov(const Intrinsics& k, std::size_t width, std::size_t height) {
  if (!(k.fx > 0.0 && k.fy > 0.0)) throw DomainError("focal lengths must be positive");
  return {2.0 * std::atan(static_cast<double>(width) / (2.0 * k.fx)),
          2.0 * std::atan(static_cast<double>(height) / (2.0 * k.fy))};
}

Eigen::Vector3d pixel_ray(const Intrinsics& k, double u, double v) {
  return {(u + 0.5 - k.cx) / k.fx, (v + 0.5 - k.cy) / k.fy, 1.0};
}

VecGrid unproject(const ScalarGrid& depth, const CameraParams& camera, const ValidMask& mask) {
  if (mask.height != depth.height || mask.width != depth.width) {
    throw ShapeError("unproject: mask and depth dimensions differ");
  }
  const Eigen::Matrix3d r = quat_to_rotmat(camera.quaternion);
  const Intrinsics k = fov_to_intrinsics(camera.fov, depth.width, depth.height);

  std::size_t bad = 0;
  for (std::size_t i = 0; i < depth.size(); ++i) {
    if (mask[i] && !(depth.values[i] > 0.0 && std::isfinite(depth.values[i]))) ++bad;
  }
  if (bad > 0) {
    throw DomainError("unproject: " + std::to_string(bad) +
                      " masked pixel(s) with nonpositive or non-finite depth");
  }

  VecGrid out(depth.height, depth.width, 3, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t v = 0; v < depth.height; ++v) {
    for (std::size_t u = 0; u < depth.width; ++u) {
      const std::size_t i = v * depth.width + u;
      if (!mask[i]) continue;
      const Eigen::Vector3d cam_point =
          depth.values[i] * pixel_ray(k, static_cast<double>(u), static_cast<double>(v));
      const Eigen::Vector3d world = r * cam_point + camera.translation;
      double* p = out.pixel(i);
      p[0] = world.x();
      p[1] = world.y();
      p[2] = world.z();
    }
  }
  return out;
}

Projection project(const VecGrid& points, const CameraParams& camera) {
  if (points.channels != 3) throw ShapeError("project: point grid must have 3 channels");
  const Eigen::Matrix3d r = quat_to_rotmat(camera.quaternion);
  const Intrinsics k = fov_to_intrinsics(camera.fov, points.width, points.height);
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();

  Projection out{VecGrid(points.height, points.width, 2, nan), ScalarGrid(points.height, points.width, nan)};
  for (std::size_t i = 0; i < points.pixels(); ++i) {
    const double* p = points.pixel(i);
    const Eigen::Vector3d world(p[0], p[1], p[2]);
    const Eigen::Vector3d c = r.transpose() * (world - camera.translation);
    out.depths.values[i] = c.z();
    if (c.z() == 0.0 || !std::isfinite(c.z())) continue;
    double* px = out.pixels.pixel(i);
    px[0] = k.fx * c.x() / c.z() + k.cx - 0.5;
    px[1] = k.fy * c.y() / c.z() + k.cy - 0.5;
  }
  return out;
}

}  // namespace geomcarve
