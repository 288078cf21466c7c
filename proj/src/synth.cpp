#include "geomcarve/synth.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <optional>

#include <Eigen/Geometry>

#include "geomcarve/camera.hpp"
#include "geomcarve/error.hpp"
#include "geomcarve/random.hpp"

namespace geomcarve {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kBaseFovX = 1.1;

// Returns the ray parameter of the first hit along origin + s * dir, s > 0.
using HitFn = std::function<std::optional<double>(const Eigen::Vector3d&, const Eigen::Vector3d&)>;

// Camera-to-world rotation looking from eye to target; camera x right, y down, z forward.
Eigen::Matrix3d look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target) {
  const Eigen::Vector3d up(0.0, 1.0, 0.0);
  const Eigen::Vector3d z = (target - eye).normalized();
  const Eigen::Vector3d x = z.cross(up).normalized();
  const Eigen::Vector3d y = z.cross(x);
  Eigen::Matrix3d r;
  r.col(0) = x;
  r.col(1) = y;
  r.col(2) = z;
  return r;
}

std::optional<double> hit_plane_z(const Eigen::Vector3d& o, const Eigen::Vector3d& d, double z) {
  if (d.z() <= 0.0) return std::nullopt;
  const double s = (z - o.z()) / d.z();
  return s > 0.0 ? std::optional<double>(s) : std::nullopt;
}

// Interior of [-half_x, half_x] x [floor, ceiling) x [-half_z, half_z]; exiting through the top is a miss.
std::optional<double> hit_open_box(const Eigen::Vector3d& o, const Eigen::Vector3d& d, double half_x, double floor_y,
                                   double ceiling_y, double half_z) {
  double exit = std::numeric_limits<double>::infinity();
  int axis = -1;
  const double lo[3] = {-half_x, floor_y, -half_z};
  const double hi[3] = {half_x, ceiling_y, half_z};
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) continue;
    const double s = ((d[a] > 0.0 ? hi[a] : lo[a]) - o[a]) / d[a];
    if (s < exit) {
      exit = s;
      axis = a;
    }
  }
  if (axis < 0 || !(exit > 0.0)) return std::nullopt;
  if (axis == 1 && d.y() > 0.0) return std::nullopt;
  return exit;
}

struct Sphere {
  Eigen::Vector3d center;
  double radius;
};

std::optional<double> hit_spheres(const Eigen::Vector3d& o, const Eigen::Vector3d& d, const std::vector<Sphere>& spheres) {
  std::optional<double> best;
  const double a = d.squaredNorm();
  for (const Sphere& s : spheres) {
    const Eigen::Vector3d oc = o - s.center;
    const double b = oc.dot(d);
    const double c = oc.squaredNorm() - s.radius * s.radius;
    const double disc = b * b - a * c;
    if (disc < 0.0) continue;
    const double root = (-b - std::sqrt(disc)) / a;
    if (root > 0.0 && (!best || root < *best)) best = root;
  }
  return best;
}

HitFn make_geometry(ScenePreset preset, Rng& rng) {
  switch (preset) {
    case ScenePreset::Plane:
      return [](const Eigen::Vector3d& o, const Eigen::Vector3d& d) { return hit_plane_z(o, d, 6.0); };
    case ScenePreset::BoxRoom:
      return [](const Eigen::Vector3d& o, const Eigen::Vector3d& d) { return hit_open_box(o, d, 4.0, -1.5, 2.5, 4.0); };
    case ScenePreset::SphereField: {
      std::vector<Sphere> spheres;
      for (int i = 0; i < 12; ++i) {
        const Eigen::Vector3d c(rng.uniform(-3, 3), rng.uniform(-1, 1), rng.uniform(-3, 3));
        spheres.push_back({c, rng.uniform(0.4, 0.9)});
      }
      return [spheres](const Eigen::Vector3d& o, const Eigen::Vector3d& d) { return hit_spheres(o, d, spheres); };
    }
  }
  throw Error("unknown scene preset");
}

Eigen::Vector2d fov_for(std::size_t width, std::size_t height, double fov_x) {
  const double fov_y = 2.0 * std::atan(static_cast<double>(height) / static_cast<double>(width) * std::tan(fov_x / 2.0));
  return {fov_x, fov_y};
}

// Cameras translate on a small circle in front of the wall with a little roll, pan and tilt.
std::vector<CameraParams> plane_trajectory(std::size_t frames, const Eigen::Vector2d& fov, Rng& rng) {
  const double phase = rng.uniform(0.0, 2.0 * M_PI);
  std::vector<CameraParams> cams;
  for (std::size_t t = 0; t < frames; ++t) {
    const double phi = phase + 0.3 * static_cast<double>(t);
    CameraParams c;
    c.translation = Eigen::Vector3d(0.5 * std::cos(phi), 0.5 * std::sin(phi), rng.uniform(0.0, 1.5));
    const Eigen::Matrix3d r = axis_angle(Eigen::Vector3d::UnitY(), rng.uniform(-0.2, 0.2)) *
                              axis_angle(Eigen::Vector3d::UnitX(), rng.uniform(-0.2, 0.2)) *
                              axis_angle(Eigen::Vector3d::UnitZ(), rng.uniform(-0.3, 0.3));
    c.quaternion = rotmat_to_quat(r);
    c.fov = fov;
    cams.push_back(c);
  }
  return cams;
}

// Circular look-at orbit of the given radius around `target`.
std::vector<CameraParams> orbit_trajectory(std::size_t frames, const Eigen::Vector2d& fov, Rng& rng, double radius,
                                           double height, double height_jitter, double step,
                                           const Eigen::Vector3d& target) {
  const double phase = rng.uniform(0.0, 2.0 * M_PI);
  std::vector<CameraParams> cams;
  for (std::size_t t = 0; t < frames; ++t) {
    const double phi = phase + step * static_cast<double>(t);
    const Eigen::Vector3d eye(radius * std::cos(phi), height + rng.uniform(-height_jitter, height_jitter),
                              radius * std::sin(phi));
    CameraParams c;
    c.translation = eye;
    c.quaternion = rotmat_to_quat(look_at(eye, target));
    c.fov = fov;
    cams.push_back(c);
  }
  return cams;
}

Frame render(const HitFn& hit, const CameraParams& cam, std::size_t width, std::size_t height) {
  const Eigen::Matrix3d r = quat_to_rotmat(cam.quaternion);
  const Intrinsics k = fov_to_intrinsics(cam.fov, width, height);
  Frame f;
  f.camera = cam;
  f.depth = ScalarGrid(height, width, kNaN);
  f.mask = ValidMask(height, width, false);
  for (std::size_t v = 0; v < height; ++v) {
    for (std::size_t u = 0; u < width; ++u) {
      // The world-space direction has unit camera-frame z, so the hit parameter is the depth.
      const Eigen::Vector3d dir = r * pixel_ray(k, static_cast<double>(u), static_cast<double>(v));
      if (const auto s = hit(cam.translation, dir)) {
        f.depth.at(v, u) = *s;
        f.mask.flags[v * width + u] = 1;
      }
    }
  }
  f.points = unproject(f.depth, cam, f.mask);
  f.conf_depth = ScalarGrid(height, width, 1.0);
  f.conf_point = ScalarGrid(height, width, 1.0);
  return f;
}

void check_dims(std::size_t width, std::size_t height) {
  if (width < 8 || height < 8) throw DomainError("generate_scene: image must be at least 8x8");
}

template <typename F>
void for_masked(Frame& f, F fn) {
  for (std::size_t i = 0; i < f.mask.size(); ++i) {
    if (f.mask[i]) fn(i);
  }
}

struct Apply {
  SequenceSample& s;

  void operator()(const GlobalScale& c) const {
    for (Frame& f : s.frames) {
      for (double& d : f.depth.values) d *= c.factor;
      for (double& p : f.points.values) p *= c.factor;
      f.camera.translation *= c.factor;
    }
  }

  void operator()(const PerFrameAffine& c) const {
    if (c.scale.size() != s.size() || c.depth_shift.size() != s.size() || c.point_shift.size() != s.size()) {
      throw ShapeError("per-frame affine corruption needs one entry per frame");
    }
    for (std::size_t t = 0; t < s.size(); ++t) {
      Frame& f = s.frames[t];
      for_masked(f, [&](std::size_t i) {
        f.depth.values[i] = c.scale[t] * f.depth.values[i] + c.depth_shift[t];
        double* p = f.points.pixel(i);
        for (int k = 0; k < 3; ++k) p[k] = c.scale[t] * p[k] + c.point_shift[t][k];
      });
    }
  }

  void operator()(const AdditiveNoise& c) const {
    if (c.sigma == 0.0) return;
    Rng rng(c.seed);
    for (Frame& f : s.frames) {
      for_masked(f, [&](std::size_t i) {
        f.depth.values[i] += c.sigma * rng.normal();
        double* p = f.points.pixel(i);
        for (int k = 0; k < 3; ++k) p[k] += c.sigma * rng.normal();
      });
    }
  }

  void operator()(const PoseJitter& c) const {
    Rng rng(c.seed);
    for (Frame& f : s.frames) {
      const Eigen::Vector3d axis(rng.normal(), rng.normal(), rng.normal());
      const Eigen::Matrix3d r = quat_to_rotmat(f.camera.quaternion) * axis_angle(axis, c.angle);
      f.camera.quaternion = rotmat_to_quat(r);
    }
  }

  void operator()(const FovBias& c) const {
    for (Frame& f : s.frames) f.camera.fov *= c.factor;
  }
};

}  // namespace

ScenePreset parse_preset(std::string_view name) {
  if (name == "plane") return ScenePreset::Plane;
  if (name == "box-room") return ScenePreset::BoxRoom;
  if (name == "sphere-field") return ScenePreset::SphereField;
  throw Error("unknown scene preset '" + std::string(name) + "' (expected plane, box-room or sphere-field)");
}

std::string preset_name(ScenePreset preset) {
  switch (preset) {
    case ScenePreset::Plane: return "plane";
    case ScenePreset::BoxRoom: return "box-room";
    case ScenePreset::SphereField: return "sphere-field";
  }
  return "unknown";
}

SequenceSample generate_scene(ScenePreset preset, std::size_t frames, std::size_t width, std::size_t height,
                              std::uint64_t seed) {
  check_dims(width, height);
  if (frames == 0) throw DomainError("generate_scene: at least one frame required");

  Rng rng(seed);
  const Eigen::Vector2d fov = fov_for(width, height, kBaseFovX + rng.uniform(-0.1, 0.1));
  const HitFn hit = make_geometry(preset, rng);
  std::vector<CameraParams> cams;
  switch (preset) {
    case ScenePreset::Plane: cams = plane_trajectory(frames, fov, rng); break;
    case ScenePreset::BoxRoom:
      cams = orbit_trajectory(frames, fov, rng, 2.0, 0.2, 0.1, 0.15, Eigen::Vector3d(0.0, 0.9, 0.0));
      break;
    case ScenePreset::SphereField:
      cams = orbit_trajectory(frames, fov, rng, 8.0, 1.0, 0.2, 0.1, Eigen::Vector3d::Zero());
      break;
  }

  SequenceSample sample;
  for (const CameraParams& cam : cams) sample.frames.push_back(render(hit, cam, width, height));
  return sample;
}

Frame render_view(ScenePreset preset, const CameraParams& camera, std::size_t width, std::size_t height,
                  std::uint64_t seed) {
  check_dims(width, height);
  Rng rng(seed);
  rng.uniform();  // field-of-view draw of generate_scene, kept so the geometry matches
  return render(make_geometry(preset, rng), camera, width, height);
}

PerFrameAffine PerFrameAffine::random(std::size_t frames, double magnitude, std::uint64_t seed) {
  Rng rng(seed);
  PerFrameAffine a;
  for (std::size_t t = 0; t < frames; ++t) {
    a.scale.push_back(rng.uniform(1.0 - magnitude, 1.0 + magnitude));
    a.depth_shift.push_back(rng.uniform(-magnitude, magnitude));
    a.point_shift.emplace_back(rng.uniform(-magnitude, magnitude), rng.uniform(-magnitude, magnitude),
                               rng.uniform(-magnitude, magnitude));
  }
  return a;
}

SequenceSample corrupt(const SequenceSample& sample, const Corruption& corruption) {
  SequenceSample out = sample;
  std::visit(Apply{out}, corruption);
  return out;
}

SequenceSample corrupt(const SequenceSample& sample, std::span<const Corruption> corruptions) {
  SequenceSample out = sample;
  for (const Corruption& c : corruptions) std::visit(Apply{out}, c);
  return out;
}

}  // namespace geomcarve
