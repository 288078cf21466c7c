#include "geomcarve/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "geomcarve/error.hpp"

namespace geomcarve {

namespace {

// Norm of a residual vector and its unit direction (zero at the kink).
double residual_norm(const double* r, std::size_t c, double* unit) {
  if (c == 1) {
    unit[0] = r[0] > 0.0 ? 1.0 : (r[0] < 0.0 ? -1.0 : 0.0);
    return std::abs(r[0]);
  }
  double sq = 0.0;
  for (std::size_t k = 0; k < c; ++k) sq += r[k] * r[k];
  const double n = std::sqrt(sq);
  for (std::size_t k = 0; k < c; ++k) unit[k] = n > 0.0 ? r[k] / n : 0.0;
  return n;
}

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

void check_supervised(const char* op, FieldView pred, FieldView gt, FieldView weights, MaskView mask) {
  if (!(pred.shape == gt.shape)) throw ShapeError(std::string(op) + ": prediction and ground truth shapes differ");
  if (!weights.shape.same_pixels(pred.shape) || weights.shape.channels != 1) {
    throw ShapeError(std::string(op) + ": weight map shape differs from prediction");
  }
  if (!mask.matches(pred.shape)) throw ShapeError(std::string(op) + ": mask shape differs from prediction");
  if (pred.values.size() != pred.shape.size() || gt.values.size() != gt.shape.size() ||
      weights.values.size() != weights.shape.size() || mask.flags.size() != mask.pixels()) {
    throw ShapeError(std::string(op) + ": buffer length does not match its shape");
  }
}

FieldView frame_of(FieldView f, std::size_t t) {
  const std::size_t n = f.shape.frame_pixels() * f.shape.channels;
  return FieldView(FieldShape{1, f.shape.height, f.shape.width, f.shape.channels}, f.values.subspan(t * n, n));
}

MaskView frame_of(MaskView m, std::size_t t) {
  const std::size_t n = m.height * m.width;
  return MaskView(1, m.height, m.width, m.flags.subspan(t * n, n));
}

// Accumulates W |d| terms where d = (pred_b - pred_a) - (gt_b - gt_a).
class DifferenceLoss {
 public:
  DifferenceLoss(FieldView pred, FieldView gt, FieldView weights)
      : pred_(pred), gt_(gt), weights_(weights), c_(pred.shape.channels),
        grad_pred_(pred.values.size(), 0.0), grad_w_(weights.values.size(), 0.0),
        d_(c_), unit_(c_) {}

  // Pixel `a` anchors the term and supplies its weight.
  void add(std::size_t a, std::size_t b) {
    for (std::size_t k = 0; k < c_; ++k) {
      d_[k] = (pred_.values[b * c_ + k] - pred_.values[a * c_ + k]) -
              (gt_.values[b * c_ + k] - gt_.values[a * c_ + k]);
    }
    const double n = residual_norm(d_.data(), c_, unit_.data());
    const double w = weights_.values[a];
    terms_.push_back(w * n);
    pairs_.push_back({a, b});
    norms_.push_back(n);
    units_.insert(units_.end(), unit_.begin(), unit_.end());
  }

  LossReport finish(const char* name) {
    if (terms_.empty()) throw DegenerateError(std::string(name) + ": no valid difference pairs");
    const double inv = 1.0 / static_cast<double>(terms_.size());
    for (std::size_t j = 0; j < pairs_.size(); ++j) {
      const auto [a, b] = pairs_[j];
      const double w = weights_.values[a];
      for (std::size_t k = 0; k < c_; ++k) {
        const double g = w * units_[j * c_ + k] * inv;
        grad_pred_[b * c_ + k] += g;
        grad_pred_[a * c_ + k] -= g;
      }
      grad_w_[a] += norms_[j] * inv;
    }
    LossReport r;
    r.name = name;
    r.value = pairwise_sum(terms_) * inv;
    r.element_count = terms_.size();
    r.gradients["pred"] = std::move(grad_pred_);
    r.gradients["weights"] = std::move(grad_w_);
    return r;
  }

 private:
  FieldView pred_, gt_, weights_;
  std::size_t c_;
  std::vector<double> grad_pred_, grad_w_;
  std::vector<double> d_, unit_;
  std::vector<double> terms_, norms_, units_;
  std::vector<std::pair<std::size_t, std::size_t>> pairs_;
};

}  // namespace

WeightMap weight_inverse_depth(const ScalarGrid& gt_depth, const ValidMask& mask, double clamp_min) {
  const Field f = weight_inverse_depth(FieldView(gt_depth), MaskView(mask), clamp_min);
  WeightMap w(gt_depth.height, gt_depth.width);
  w.values = f.values;
  return w;
}

Field weight_inverse_depth(FieldView gt_depth, MaskView mask, double clamp_min) {
  if (gt_depth.shape.channels != 1 || !mask.matches(gt_depth.shape)) {
    throw ShapeError("weight_inverse_depth: depth and mask shapes differ");
  }
  if (!(clamp_min > 0.0)) throw DomainError("weight_inverse_depth: clamp must be positive");
  Field w(FieldShape{gt_depth.shape.frames, gt_depth.shape.height, gt_depth.shape.width, 1});
  for (std::size_t i = 0; i < mask.pixels(); ++i) {
    if (mask[i]) w.values[i] = 1.0 / std::max(gt_depth.values[i], clamp_min);
  }
  return w;
}

LossReport loss_reg(FieldView pred, FieldView gt, FieldView weights, MaskView mask) {
  check_supervised("loss_reg", pred, gt, weights, mask);
  const std::size_t c = pred.shape.channels;
  std::vector<double> terms;
  std::vector<double> grad(pred.values.size(), 0.0), grad_w(weights.values.size(), 0.0);
  std::vector<double> r(c), unit(c);
  for (std::size_t i = 0; i < mask.pixels(); ++i) {
    if (!mask[i]) continue;
    for (std::size_t k = 0; k < c; ++k) r[k] = pred.values[i * c + k] - gt.values[i * c + k];
    const double n = residual_norm(r.data(), c, unit.data());
    terms.push_back(weights.values[i] * n);
    grad_w[i] = n;
    for (std::size_t k = 0; k < c; ++k) grad[i * c + k] = weights.values[i] * unit[k];
  }
  if (terms.empty()) throw DegenerateError("loss_reg: empty valid mask");
  const double inv = 1.0 / static_cast<double>(terms.size());
  for (double& g : grad) g *= inv;
  for (double& g : grad_w) g *= inv;

  LossReport rep;
  rep.name = "reg";
  rep.value = pairwise_sum(terms) * inv;
  rep.element_count = terms.size();
  rep.gradients["pred"] = std::move(grad);
  rep.gradients["weights"] = std::move(grad_w);
  return rep;
}

LossReport loss_spatial_gradient(FieldView pred, FieldView gt, FieldView weights, MaskView mask) {
  check_supervised("loss_spatial_gradient", pred, gt, weights, mask);
  const FieldShape& s = pred.shape;
  DifferenceLoss acc(pred, gt, weights);
  for (std::size_t t = 0; t < s.frames; ++t) {
    const std::size_t base = t * s.frame_pixels();
    for (std::size_t v = 0; v < s.height; ++v) {
      for (std::size_t u = 0; u < s.width; ++u) {
        const std::size_t a = base + v * s.width + u;
        if (!mask[a]) continue;
        if (u + 1 < s.width && mask[a + 1]) acc.add(a, a + 1);
        if (v + 1 < s.height && mask[a + s.width]) acc.add(a, a + s.width);
      }
    }
  }
  return acc.finish("sg");
}

LossReport loss_confidence_weighted(FieldView pred, FieldView gt, FieldView conf, MaskView mask,
                                    const ConfidenceConfig& cfg) {
  check_supervised("loss_confidence_weighted", pred, gt, conf, mask);
  if (!(cfg.alpha > 0.0)) throw DomainError("confidence alpha must be positive");
  std::size_t bad = 0;
  for (std::size_t i = 0; i < mask.pixels(); ++i) {
    if (mask[i] && !(conf.values[i] > 0.0)) ++bad;
  }
  if (bad) throw DomainError("loss_confidence_weighted: " + std::to_string(bad) + " nonpositive confidence value(s)");

  LossReport rep = loss_reg(pred, gt, conf, mask);
  const double inv = 1.0 / static_cast<double>(rep.element_count);
  std::vector<double> penalty;
  std::vector<double>& grad_conf = rep.gradients["weights"];
  for (std::size_t i = 0; i < mask.pixels(); ++i) {
    if (!mask[i]) continue;
    const double l = std::log(conf.values[i]);
    penalty.push_back(std::abs(-cfg.alpha * l));
    grad_conf[i] += cfg.alpha * sign(l) / conf.values[i] * inv;
  }
  const double reg = rep.value;
  const double pen = pairwise_sum(penalty) * inv;
  rep.name = "conf";
  rep.value = reg + pen;
  rep.parts["reg"] = reg;
  rep.parts["penalty"] = pen;
  rep.gradients["conf"] = std::move(grad_conf);
  rep.gradients.erase("weights");
  return rep;
}

LossReport loss_temporal_gradient(FieldView pred, FieldView gt, FieldView weights, MaskView mask) {
  check_supervised("loss_temporal_gradient", pred, gt, weights, mask);
  const FieldShape& s = pred.shape;
  if (s.frames < 2) throw DegenerateError("loss_temporal_gradient: at least 2 frames required");
  DifferenceLoss acc(pred, gt, weights);
  const std::size_t n = s.frame_pixels();
  for (std::size_t t = 0; t + 1 < s.frames; ++t) {
    for (std::size_t p = 0; p < n; ++p) {
      const std::size_t a = t * n + p;
      if (mask[a] && mask[a + n]) acc.add(a, a + n);
    }
  }
  return acc.finish("tg");
}

LossReport loss_frame_aligned(FieldView pred, FieldView gt, FieldView weights, MaskView mask) {
  check_supervised("loss_frame_aligned", pred, gt, weights, mask);
  const FieldShape& s = pred.shape;
  const std::size_t c = s.channels;
  const std::size_t n = s.frame_pixels();
  std::vector<double> grad(pred.values.size(), 0.0);
  std::vector<double> frame_means;
  std::size_t elements = 0;
  std::vector<double> r(c), unit(c);

  for (std::size_t t = 0; t < s.frames; ++t) {
    const FieldView pt = frame_of(pred, t), gtt = frame_of(gt, t), wt = frame_of(weights, t);
    const MaskView mt = frame_of(mask, t);
    ScaleShift ab;
    try {
      ab = solve_frame_scale_shift(pt, gtt, wt, mt);
    } catch (const DegenerateError& e) {
      throw DegenerateError("loss_frame_aligned: frame " + std::to_string(t) + ": " + e.what());
    }
    std::vector<double> terms;
    std::vector<std::size_t> used;
    std::vector<double> units;
    for (std::size_t p = 0; p < n; ++p) {
      if (!mt[p]) continue;
      for (std::size_t k = 0; k < c; ++k) r[k] = ab.scale * pt.values[p * c + k] + ab.shift[k] - gtt.values[p * c + k];
      terms.push_back(wt.values[p] * residual_norm(r.data(), c, unit.data()));
      used.push_back(p);
      units.insert(units.end(), unit.begin(), unit.end());
    }
    const double inv = 1.0 / (static_cast<double>(terms.size()) * static_cast<double>(s.frames));
    for (std::size_t j = 0; j < used.size(); ++j) {
      const std::size_t p = used[j];
      for (std::size_t k = 0; k < c; ++k) {
        grad[(t * n + p) * c + k] = wt.values[p] * ab.scale * units[j * c + k] * inv;
      }
    }
    frame_means.push_back(pairwise_sum(terms) / static_cast<double>(terms.size()));
    elements += terms.size();
  }

  LossReport rep;
  rep.name = "frame";
  rep.value = pairwise_sum(frame_means) / static_cast<double>(s.frames);
  rep.element_count = elements;
  rep.gradients["pred"] = std::move(grad);
  return rep;
}

LossReport loss_sphere_aligned(FieldView pred, FieldView gt, FieldView weights, MaskView mask,
                               std::span<const SphereRegion> regions) {
  check_supervised("loss_sphere_aligned", pred, gt, weights, mask);
  if (pred.shape.frames != 1) throw ShapeError("loss_sphere_aligned: expects a single frame");
  const std::size_t c = pred.shape.channels;
  std::vector<double> r(c), unit(c);

  struct Solved {
    const SphereRegion* region;
    ScaleShift ab;
  };
  std::vector<Solved> solved;
  LossReport rep;
  rep.name = "sphere";
  for (std::size_t j = 0; j < regions.size(); ++j) {
    const SphereRegion& reg = regions[j];
    for (std::size_t m : reg.members) {
      if (m >= mask.pixels() || !mask[m]) throw ShapeError("loss_sphere_aligned: region member outside the valid mask");
    }
    if (reg.members.size() < 2) {
      rep.warnings.push_back("region " + std::to_string(j) + " skipped: fewer than 2 members");
      continue;
    }
    try {
      solved.push_back({&reg, solve_scale_shift(pred, gt, weights, reg.members)});
    } catch (const DegenerateError& e) {
      rep.warnings.push_back("region " + std::to_string(j) + " skipped: " + e.what());
    }
  }
  if (solved.empty()) throw DegenerateError("loss_sphere_aligned: every region was skipped");

  std::vector<double> grad(pred.values.size(), 0.0);
  std::vector<double> region_means;
  for (const Solved& s : solved) {
    const auto& members = s.region->members;
    const double inv = 1.0 / (static_cast<double>(members.size()) * static_cast<double>(solved.size()));
    std::vector<double> terms;
    for (std::size_t p : members) {
      for (std::size_t k = 0; k < c; ++k) r[k] = s.ab.scale * pred.values[p * c + k] + s.ab.shift[k] - gt.values[p * c + k];
      terms.push_back(weights.values[p] * residual_norm(r.data(), c, unit.data()));
      for (std::size_t k = 0; k < c; ++k) grad[p * c + k] += weights.values[p] * s.ab.scale * unit[k] * inv;
    }
    region_means.push_back(pairwise_sum(terms) / static_cast<double>(terms.size()));
    rep.element_count += terms.size();
  }
  rep.value = pairwise_sum(region_means) / static_cast<double>(region_means.size());
  rep.gradients["pred"] = std::move(grad);
  return rep;
}

LossReport loss_camera(std::span<const CameraParams> pred, std::span<const CameraParams> gt) {
  if (pred.size() != gt.size()) {
    throw ShapeError("loss_camera: " + std::to_string(pred.size()) + " predicted vs " +
                     std::to_string(gt.size()) + " ground-truth cameras");
  }
  if (pred.empty()) throw DegenerateError("loss_camera: no cameras");
  const double inv = 1.0 / static_cast<double>(pred.size());
  std::vector<double> terms, grad(pred.size() * 9, 0.0);
  for (std::size_t t = 0; t < pred.size(); ++t) {
    Eigen::Matrix<double, 9, 1> p = pred[t].to_vector();
    const Eigen::Matrix<double, 9, 1> g = gt[t].to_vector();
    const double flip = pred[t].quaternion.dot(gt[t].quaternion) < 0.0 ? -1.0 : 1.0;
    p.segment<4>(3) *= flip;
    const Eigen::Matrix<double, 9, 1> d = p - g;
    terms.push_back(d.cwiseAbs().sum());
    for (int k = 0; k < 9; ++k) {
      const double chain = (k >= 3 && k < 7) ? flip : 1.0;
      grad[t * 9 + k] = sign(d[k]) * chain * inv;
    }
  }
  LossReport rep;
  rep.name = "cam";
  rep.value = pairwise_sum(terms) * inv;
  rep.element_count = pred.size();
  rep.gradients["camera"] = std::move(grad);
  return rep;
}

LossReport loss_consistency(FieldView points, FieldView depth, std::span<const CameraParams> cameras,
                            MaskView mask) {
  const FieldShape& s = depth.shape;
  if (depth.shape.channels != 1 || points.shape.channels != 3 || !points.shape.same_pixels(s)) {
    throw ShapeError("loss_consistency: expects T x H x W depth and T x H x W x 3 points");
  }
  if (!mask.matches(s)) throw ShapeError("loss_consistency: mask shape differs");
  if (cameras.size() != s.frames) throw ShapeError("loss_consistency: one camera per frame required");
  std::size_t bad = 0;
  for (std::size_t i = 0; i < mask.pixels(); ++i) {
    if (mask[i] && !(depth.values[i] > 0.0)) ++bad;
  }
  if (bad) throw DomainError("loss_consistency: " + std::to_string(bad) + " masked pixel(s) with nonpositive depth");

  const std::size_t n = s.frame_pixels();
  std::vector<double> terms;
  std::vector<double> grad_points(points.values.size(), 0.0), grad_depth(depth.values.size(), 0.0),
      grad_cam(cameras.size() * 9, 0.0);

  // First pass collects residual signs; gradients are scaled once the count is known.
  struct Hit {
    std::size_t index;
    Eigen::Vector3d sign;
  };
  std::vector<Hit> hits;
  for (std::size_t t = 0; t < s.frames; ++t) {
    const Eigen::Matrix3d rot = quat_to_rotmat(cameras[t].quaternion);
    const Intrinsics k = fov_to_intrinsics(cameras[t].fov, s.width, s.height);
    for (std::size_t v = 0; v < s.height; ++v) {
      for (std::size_t u = 0; u < s.width; ++u) {
        const std::size_t i = t * n + v * s.width + u;
        if (!mask[i]) continue;
        const Eigen::Vector3d ray = pixel_ray(k, static_cast<double>(u), static_cast<double>(v));
        const Eigen::Vector3d un = rot * (depth.values[i] * ray) + cameras[t].translation;
        const double* p = points.pixel(i);
        const Eigen::Vector3d res(un.x() - p[0], un.y() - p[1], un.z() - p[2]);
        terms.push_back(res.cwiseAbs().sum());
        hits.push_back({i, Eigen::Vector3d(sign(res.x()), sign(res.y()), sign(res.z()))});
      }
    }
  }
  if (terms.empty()) throw DegenerateError("loss_consistency: empty valid mask");
  const double inv = 1.0 / static_cast<double>(terms.size());

  std::size_t h = 0;
  for (std::size_t t = 0; t < s.frames; ++t) {
    const Eigen::Matrix3d rot = quat_to_rotmat(cameras[t].quaternion);
    const auto d_rot = quat_to_rotmat_jacobian(cameras[t].quaternion);
    const Intrinsics k = fov_to_intrinsics(cameras[t].fov, s.width, s.height);
    const Eigen::Vector2d df = fov_to_focal_derivative(cameras[t].fov, s.width, s.height);
    double* gc = grad_cam.data() + t * 9;
    for (; h < hits.size() && hits[h].index < (t + 1) * n; ++h) {
      const std::size_t i = hits[h].index;
      const std::size_t local = i - t * n;
      const double u = static_cast<double>(local % s.width) + 0.5;
      const double v = static_cast<double>(local / s.width) + 0.5;
      const double d = depth.values[i];
      const Eigen::Vector3d g = hits[h].sign * inv;
      const Eigen::Vector3d ray = pixel_ray(k, u - 0.5, v - 0.5);
      const Eigen::Vector3d cam_point = d * ray;
      const Eigen::Vector3d rt_g = rot.transpose() * g;

      for (int c = 0; c < 3; ++c) grad_points[i * 3 + c] = -g[c];
      grad_depth[i] = rt_g.dot(ray);
      for (int c = 0; c < 3; ++c) gc[c] += g[c];
      for (int j = 0; j < 4; ++j) gc[3 + j] += g.dot(d_rot[j] * cam_point);
      // d cam_point / d fx = (-d (u - cx) / fx^2, 0, 0), likewise for fy.
      gc[7] += rt_g.x() * (-d * (u - k.cx) / (k.fx * k.fx)) * df[0];
      gc[8] += rt_g.y() * (-d * (v - k.cy) / (k.fy * k.fy)) * df[1];
    }
  }

  LossReport rep;
  rep.name = "consis";
  rep.value = pairwise_sum(terms) * inv;
  rep.element_count = terms.size();
  rep.gradients["points"] = std::move(grad_points);
  rep.gradients["depth"] = std::move(grad_depth);
  rep.gradients["camera"] = std::move(grad_cam);
  return rep;
}

}  // namespace geomcarve
