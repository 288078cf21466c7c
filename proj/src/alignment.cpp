#include "geomcarve/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <Eigen/LU>
#include <Eigen/SVD>

#include "geomcarve/error.hpp"
#include "geomcarve/random.hpp"

namespace geomcarve {

double l1_optimal_scale(std::span<const double> pred, std::span<const double> gt,
                        std::span<const double> weights) {
  if (pred.size() != gt.size() || pred.size() != weights.size()) {
    throw ShapeError("l1_optimal_scale: input lengths differ");
  }
  struct Item {
    double ratio;
    double weight;
  };
  std::vector<Item> items;
  items.reserve(pred.size());
  bool any_weighted = false;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!(weights[i] > 0.0)) continue;
    any_weighted = true;
    if (pred[i] == 0.0) continue;
    items.push_back({gt[i] / pred[i], weights[i] * std::abs(pred[i])});
  }
  if (!any_weighted) throw DegenerateError("empty valid overlap for scale alignment");
  if (items.empty()) throw DegenerateError("degenerate scale: all predictions are zero");

  std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.ratio < b.ratio; });
  std::vector<double> w(items.size());
  std::transform(items.begin(), items.end(), w.begin(), [](const Item& it) { return it.weight; });
  const double half = 0.5 * pairwise_sum(w);
  double cum = 0.0;
  double scale = items.back().ratio;
  for (const Item& it : items) {
    cum += it.weight;
    if (cum >= half) {
      scale = it.ratio;
      break;
    }
  }
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw DegenerateError("degenerate scale: median ratio is " + std::to_string(scale));
  }
  return scale;
}

double solve_sequence_scale(FieldView pred, FieldView gt, MaskView mask, std::optional<FieldView> weights) {
  if (!(pred.shape == gt.shape) || !mask.matches(pred.shape)) {
    throw ShapeError("solve_sequence_scale: prediction, ground truth and mask shapes differ");
  }
  if (weights && (!weights->shape.same_pixels(pred.shape) || weights->shape.channels != 1)) {
    throw ShapeError("solve_sequence_scale: weight map shape differs");
  }
  const std::size_t c = pred.shape.channels;
  std::vector<double> p, g, w;
  for (std::size_t i = 0; i < mask.pixels(); ++i) {
    if (!mask[i]) continue;
    const double wi = weights ? weights->values[i] : 1.0;
    for (std::size_t k = 0; k < c; ++k) {
      p.push_back(pred.values[i * c + k]);
      g.push_back(gt.values[i * c + k]);
      w.push_back(wi);
    }
  }
  if (p.empty()) throw DegenerateError("empty valid overlap for scale alignment");
  return l1_optimal_scale(p, g, w);
}

double solve_sequence_scale(const SequenceSample& pred, const SequenceSample& gt,
                            std::span<const WeightMap> weights) {
  const Field pd = stack_depth(pred);
  const Field gd = stack_depth(gt);
  const StackedMask m = joint_mask(pred, gt);
  if (weights.empty()) return solve_sequence_scale(pd, gd, m);
  if (weights.size() != pred.size()) throw ShapeError("solve_sequence_scale: one weight map per frame required");
  Field w(FieldShape{pred.size(), pred.height(), pred.width(), 1});
  auto it = w.values.begin();
  for (const auto& wm : weights) {
    if (wm.values.size() != pred.height() * pred.width()) throw ShapeError("weight map dimensions differ");
    it = std::copy(wm.values.begin(), wm.values.end(), it);
  }
  return solve_sequence_scale(pd, gd, m, w.view());
}

namespace {

// Element-major copy of the pixels taking part in one scale-shift problem.
struct AlignProblem {
  std::size_t channels = 1;
  std::vector<double> x;  // prediction, n * channels
  std::vector<double> y;  // ground truth, n * channels
  std::vector<double> w;  // n

  std::size_t size() const { return w.size(); }
};

struct Affine {
  double scale;
  std::vector<double> shift;
};

std::optional<Affine> weighted_least_squares(const AlignProblem& pb, std::span<const double> omega) {
  const std::size_t c = pb.channels;
  const std::size_t n = pb.size();
  double sw = 0.0;
  std::vector<double> mx(c, 0.0), my(c, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    sw += omega[i];
    for (std::size_t k = 0; k < c; ++k) {
      mx[k] += omega[i] * pb.x[i * c + k];
      my[k] += omega[i] * pb.y[i * c + k];
    }
  }
  if (!(sw > 0.0)) return std::nullopt;
  for (std::size_t k = 0; k < c; ++k) {
    mx[k] /= sw;
    my[k] /= sw;
  }
  double num = 0.0, den = 0.0, spread = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < c; ++k) {
      const double dx = pb.x[i * c + k] - mx[k];
      num += omega[i] * dx * (pb.y[i * c + k] - my[k]);
      den += omega[i] * dx * dx;
      spread += omega[i] * mx[k] * mx[k];
    }
  }
  if (!(den > 1e-24 * (spread + sw))) return std::nullopt;
  Affine a{num / den, std::vector<double>(c)};
  for (std::size_t k = 0; k < c; ++k) a.shift[k] = my[k] - a.scale * mx[k];
  return a;
}

std::vector<double> residuals(const AlignProblem& pb, const Affine& a) {
  const std::size_t c = pb.channels;
  std::vector<double> r(pb.size());
  for (std::size_t i = 0; i < pb.size(); ++i) {
    if (c == 1) {
      r[i] = std::abs(a.scale * pb.x[i] + a.shift[0] - pb.y[i]);
      continue;
    }
    double sq = 0.0;
    for (std::size_t k = 0; k < c; ++k) {
      const double d = a.scale * pb.x[i * c + k] + a.shift[k] - pb.y[i * c + k];
      sq += d * d;
    }
    r[i] = std::sqrt(sq);
  }
  return r;
}

// Nearest-rank quantile.
double quantile(std::vector<double> v, double q) {
  const std::size_t rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size())));
  const std::size_t k = std::clamp<std::size_t>(rank, 1, v.size()) - 1;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
  return v[k];
}

double truncated_objective(const AlignProblem& pb, std::span<const double> r, double tau) {
  std::vector<double> terms(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) terms[i] = pb.w[i] * std::min(r[i], tau);
  return pairwise_sum(terms);
}

ScaleShift solve(const AlignProblem& pb) {
  const std::size_t c = pb.channels;
  if (pb.size() < 2) throw DegenerateError("rank-deficient alignment: fewer than 2 weighted elements");

  bool gt_varies = false;
  double gt_extent = 0.0;
  for (std::size_t i = 1; i < pb.size() && !gt_varies; ++i) {
    for (std::size_t k = 0; k < c; ++k) gt_varies |= pb.y[i * c + k] != pb.y[k];
  }
  if (!gt_varies) throw DegenerateError("rank-deficient alignment: ground truth is constant");
  for (std::size_t i = 0; i < pb.x.size(); ++i) gt_extent = std::max(gt_extent, std::abs(pb.y[i] - pb.y[i % c]));

  const auto ols = weighted_least_squares(pb, pb.w);
  if (!ols) throw DegenerateError("rank-deficient alignment: prediction is constant");

  std::vector<double> r = residuals(pb, *ols);
  const double tau = quantile(r, kTruncationQuantile);
  const double ols_objective = truncated_objective(pb, r, tau);

  Affine best = *ols;
  double best_objective = ols_objective;
  const double floor = 1e-12 * gt_extent;
  std::vector<double> omega(pb.size());
  for (int it = 0; it < kIrlsIterations && best_objective > 0.0; ++it) {
    const double cap = quantile(r, kTruncationQuantile);
    for (std::size_t i = 0; i < pb.size(); ++i) {
      omega[i] = r[i] <= cap ? pb.w[i] / std::max(r[i], floor) : 0.0;
    }
    const auto next = weighted_least_squares(pb, omega);
    if (!next) break;
    r = residuals(pb, *next);
    const double obj = truncated_objective(pb, r, tau);
    if (obj < best_objective) {
      best_objective = obj;
      best = *next;
    }
  }

  if (!(best.scale > 0.0)) {
    throw DegenerateError("alignment produced non-positive scale " + std::to_string(best.scale));
  }
  return ScaleShift{best.scale, best.shift, tau, best_objective, ols_objective};
}

void check_shapes(FieldView pred, FieldView gt, FieldView weights) {
  if (!(pred.shape == gt.shape)) throw ShapeError("scale-shift: prediction and ground truth shapes differ");
  if (!weights.shape.same_pixels(pred.shape) || weights.shape.channels != 1) {
    throw ShapeError("scale-shift: weight map shape differs");
  }
}

void push_element(AlignProblem& pb, FieldView pred, FieldView gt, FieldView weights, std::size_t i) {
  const double w = weights.values[i];
  if (!(w > 0.0)) return;
  const std::size_t c = pb.channels;
  pb.x.insert(pb.x.end(), pred.values.begin() + i * c, pred.values.begin() + (i + 1) * c);
  pb.y.insert(pb.y.end(), gt.values.begin() + i * c, gt.values.begin() + (i + 1) * c);
  pb.w.push_back(w);
}

}  // namespace

ScaleShift solve_frame_scale_shift(FieldView pred, FieldView gt, FieldView weights, MaskView mask) {
  check_shapes(pred, gt, weights);
  if (!mask.matches(pred.shape)) throw ShapeError("scale-shift: mask shape differs");
  AlignProblem pb;
  pb.channels = pred.shape.channels;
  for (std::size_t i = 0; i < mask.pixels(); ++i) {
    if (mask[i]) push_element(pb, pred, gt, weights, i);
  }
  return solve(pb);
}

ScaleShift solve_scale_shift(FieldView pred, FieldView gt, FieldView weights,
                             std::span<const std::size_t> indices) {
  check_shapes(pred, gt, weights);
  AlignProblem pb;
  pb.channels = pred.shape.channels;
  for (std::size_t i : indices) {
    if (i >= pred.shape.pixels()) throw ShapeError("scale-shift: index out of range");
    push_element(pb, pred, gt, weights, i);
  }
  return solve(pb);
}

std::vector<SphereRegion> sample_sphere_regions(const VecGrid& points, const ValidMask& mask,
                                                const SphereSampling& sampling) {
  if (points.channels != 3 || points.height != mask.height || points.width != mask.width) {
    throw ShapeError("sample_sphere_regions: point map and mask dimensions differ");
  }
  std::vector<std::size_t> valid;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) valid.push_back(i);
  }
  if (valid.size() < sampling.count) {
    throw DegenerateError("sample_sphere_regions: " + std::to_string(valid.size()) +
                          " valid points, " + std::to_string(sampling.count) + " regions requested");
  }
  auto point = [&](std::size_t i) {
    const double* p = points.pixel(i);
    return Point3(p[0], p[1], p[2]);
  };

  Point3 lo = point(valid.front()), hi = lo;
  for (std::size_t i : valid) {
    lo = lo.cwiseMin(point(i));
    hi = hi.cwiseMax(point(i));
  }
  const double diagonal = (hi - lo).norm();

  Rng rng(sampling.seed);
  std::vector<SphereRegion> regions;
  regions.reserve(sampling.count);
  for (std::size_t j = 0; j < sampling.count; ++j) {
    // Partial Fisher-Yates: valid[0..j) holds the centers drawn so far.
    const std::size_t pick = j + static_cast<std::size_t>(rng.below(valid.size() - j));
    std::swap(valid[j], valid[pick]);
    double frac;
    if (sampling.radius_frac) {
      frac = *sampling.radius_frac;
    } else {
      frac = std::exp(rng.uniform(std::log(sampling.min_radius_frac), std::log(sampling.max_radius_frac)));
    }
    SphereRegion region{valid[j], frac * diagonal, {}};
    const Point3 c = point(region.center);
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (mask[i] && (point(i) - c).norm() <= region.radius) region.members.push_back(i);
    }
    regions.push_back(std::move(region));
  }
  return regions;
}

Similarity solve_similarity_umeyama(std::span<const Point3> pred, std::span<const Point3> gt) {
  if (pred.size() != gt.size()) throw ShapeError("umeyama: point lists differ in length");
  const std::size_t n = pred.size();
  if (n < 3) throw DegenerateError("degenerate similarity: fewer than 3 correspondences");

  const double inv_n = 1.0 / static_cast<double>(n);
  Point3 mx = Point3::Zero(), my = Point3::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    mx += pred[i];
    my += gt[i];
  }
  mx *= inv_n;
  my *= inv_n;

  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  Eigen::Matrix3d src_scatter = Eigen::Matrix3d::Zero();
  double var_x = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Point3 dx = pred[i] - mx;
    cov += (gt[i] - my) * dx.transpose();
    src_scatter += dx * dx.transpose();
    var_x += dx.squaredNorm();
  }
  cov *= inv_n;
  var_x *= inv_n;

  const Eigen::JacobiSVD<Eigen::Matrix3d> src_svd(src_scatter);
  const Eigen::Vector3d sv = src_svd.singularValues();
  if (!(sv[0] > 0.0) || sv[1] <= 1e-12 * sv[0]) {
    throw DegenerateError("degenerate similarity: source points are collinear or coincident");
  }
  // Identical point sets: the optimum is the identity, returned exactly rather
  // than through an SVD that would leave rounding residue.
  if (std::equal(pred.begin(), pred.end(), gt.begin())) return Similarity{};

  const Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Vector3d s = Eigen::Vector3d::Ones();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) s[2] = -1.0;

  Similarity out;
  out.rotation = svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
  out.scale = svd.singularValues().dot(s) / var_x;
  if (!(out.scale > 0.0)) throw DegenerateError("degenerate similarity: target points are coincident");
  out.translation = my - out.scale * out.rotation * mx;
  return out;
}

Similarity solve_similarity_umeyama(std::span<const Point3> pred, std::span<const Point3> gt,
                                    std::span<const std::pair<std::size_t, std::size_t>> correspondences) {
  std::vector<Point3> a, b;
  a.reserve(correspondences.size());
  b.reserve(correspondences.size());
  for (const auto& [i, j] : correspondences) {
    if (i >= pred.size() || j >= gt.size()) throw ShapeError("umeyama: correspondence index out of range");
    a.push_back(pred[i]);
    b.push_back(gt[j]);
  }
  return solve_similarity_umeyama(a, b);
}

TrajectoryAlignment align_trajectory(std::span<const CameraParams> pred, std::span<const CameraParams> gt) {
  if (pred.size() != gt.size()) {
    throw ShapeError("align_trajectory: " + std::to_string(pred.size()) + " predicted vs " +
                     std::to_string(gt.size()) + " ground-truth poses");
  }
  if (pred.size() < 3) throw DegenerateError("align_trajectory: at least 3 poses required");
  std::vector<Point3> a, b;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    a.push_back(pred[i].translation);
    b.push_back(gt[i].translation);
  }
  TrajectoryAlignment out{solve_similarity_umeyama(a, b), {}};
  out.residuals.reserve(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out.residuals.push_back((out.transform.apply(a[i]) - b[i]).norm());
  return out;
}

}  // namespace geomcarve
