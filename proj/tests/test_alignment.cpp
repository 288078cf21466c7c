#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include <Eigen/LU>

#include "geomcarve/alignment.hpp"
#include "geomcarve/camera.hpp"
#include "geomcarve/error.hpp"
#include "geomcarve/random.hpp"
#include "oracles.hpp"

using namespace geomcarve;

namespace {

SequenceSample depth_sequence(const std::vector<ScalarGrid>& depths) {
  SequenceSample s;
  for (const ScalarGrid& d : depths) {
    Frame f;
    f.depth = d;
    f.points = VecGrid(d.height, d.width, 3);
    f.mask = ValidMask(d.height, d.width, true);
    s.frames.push_back(f);
  }
  return s;
}

ScalarGrid random_grid(Rng& rng, std::size_t h, std::size_t w, double lo, double hi) {
  ScalarGrid g(h, w);
  for (double& v : g.values) v = rng.uniform(lo, hi);
  return g;
}

Eigen::Matrix3d random_rotation(Rng& rng) {
  return quat_to_rotmat(Eigen::Vector4d(rng.normal(), rng.normal(), rng.normal(), rng.normal()));
}

std::vector<Point3> random_cloud(Rng& rng, std::size_t n, double extent) {
  std::vector<Point3> c(n);
  for (auto& p : c) p = Point3(rng.uniform(-extent, extent), rng.uniform(-extent, extent), rng.uniform(-extent, extent));
  return c;
}

double sum_sq_residual(const Similarity& s, const std::vector<Point3>& x, const std::vector<Point3>& y) {
  double r = 0;
  for (std::size_t i = 0; i < x.size(); ++i) r += (s.apply(x[i]) - y[i]).squaredNorm();
  return r;
}

}  // namespace

// ---------------------------------------------------------------- sequence scale

TEST(SequenceScale, DoubledPredictionGivesHalf) {
  Rng rng(1);
  std::vector<ScalarGrid> gt{random_grid(rng, 4, 5, 1, 5), random_grid(rng, 4, 5, 1, 5)};
  std::vector<ScalarGrid> pred = gt;
  for (auto& g : pred) {
    for (double& v : g.values) v *= 2;
  }
  EXPECT_EQ(solve_sequence_scale(depth_sequence(pred), depth_sequence(gt)), 0.5);
}

TEST(SequenceScale, SingleValidPixel) {
  ScalarGrid pred(1, 1, 4.0), gt(1, 1, 2.0);
  EXPECT_EQ(solve_sequence_scale(pred, gt, ValidMask(1, 1, true)), 0.5);
}

TEST(SequenceScale, ExactInverseOfAnyScale) {
  Rng rng(2);
  const ScalarGrid gt = random_grid(rng, 6, 6, 0.5, 20);
  for (double s : {0.1, 0.75, 1.0, 3.0, 1234.5}) {
    ScalarGrid pred = gt;
    for (double& v : pred.values) v *= s;
    const double scale = solve_sequence_scale(pred, gt, ValidMask(6, 6, true));
    // The median ratio is one of the per-element ratios gt / (s gt).
    EXPECT_NEAR(scale * s, 1.0, 1e-15);
  }
}

TEST(SequenceScale, GrossOutliersMatchGridOracle) {
  Rng rng(3);
  ScalarGrid gt = random_grid(rng, 20, 20, 1, 4);
  const ScalarGrid pred = gt;
  for (std::size_t i = 0; i < gt.values.size(); i += 10) gt.values[i] += 100.0;  // 10% corrupted
  const double scale = solve_sequence_scale(pred, gt, ValidMask(20, 20, true));
  EXPECT_EQ(scale, 1.0);
  const double oracle_scale = oracle::scale_grid_search(pred.values, gt.values, 0.5, 1.5, 1e-4);
  EXPECT_NEAR(scale, oracle_scale, 1e-4);
}

TEST(SequenceScale, PerFrameWeightsAreHonoured) {
  ScalarGrid gt(1, 3, 1.0);
  ScalarGrid pred(1, 3);
  pred.values = {1.0, 2.0, 4.0};  // ratios 1, 0.5, 0.25
  WeightMap w(1, 3);
  w.values = {0.0, 0.0, 1.0};
  const std::vector<WeightMap> weights{w};
  EXPECT_EQ(solve_sequence_scale(depth_sequence({pred}), depth_sequence({gt}), weights), 0.25);
}

TEST(SequenceScale, LowerMedianOnEvenSplit) {
  // Two elements with equal weight |pred| * w: ratios 1 and 3, lower median is 1.
  ScalarGrid pred(1, 2, 1.0), gt(1, 2);
  gt.values = {3.0, 1.0};
  EXPECT_EQ(solve_sequence_scale(pred, gt, ValidMask(1, 2, true)), 1.0);
}

TEST(SequenceScale, Errors) {
  ScalarGrid pred(2, 2, 0.0), gt(2, 2, 1.0);
  try {
    solve_sequence_scale(pred, gt, ValidMask(2, 2, true));
    FAIL();
  } catch (const DegenerateError& e) {
    EXPECT_NE(std::string(e.what()).find("degenerate scale"), std::string::npos);
  }
  EXPECT_THROW(solve_sequence_scale(gt, gt, ValidMask(2, 2, false)), DegenerateError);
  EXPECT_THROW(solve_sequence_scale(gt, ScalarGrid(2, 3, 1.0), ValidMask(2, 2, true)), ShapeError);
}

// ---------------------------------------------------------------- scale-shift

TEST(FrameScaleShift, NoiselessInverseScalar) {
  Rng rng(4);
  const ScalarGrid gt = random_grid(rng, 8, 8, 1, 10);
  const double a = 1.7, b = -0.4;
  ScalarGrid pred = gt;
  for (double& v : pred.values) v = (v - b) / a;
  const ScaleShift s = solve_frame_scale_shift(pred, gt, ScalarGrid(8, 8, 1.0), ValidMask(8, 8, true));
  EXPECT_NEAR(s.scale, a, 1e-9);
  ASSERT_EQ(s.shift.size(), 1u);
  EXPECT_NEAR(s.shift[0], b, 1e-9);
}

TEST(FrameScaleShift, NoiselessInverseVector) {
  Rng rng(5);
  VecGrid gt(6, 7, 3);
  for (double& v : gt.values) v = rng.uniform(-5, 5);
  const double a = 0.6;
  const double b[3] = {1.0, -2.0, 0.25};
  VecGrid pred = gt;
  for (std::size_t i = 0; i < pred.values.size(); ++i) pred.values[i] = (gt.values[i] - b[i % 3]) / a;
  const ScaleShift s = solve_frame_scale_shift(pred, gt, ScalarGrid(6, 7, 1.0), ValidMask(6, 7, true));
  EXPECT_NEAR(s.scale, a, 1e-9);
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(s.shift[k], b[k], 1e-9);
}

TEST(FrameScaleShift, TwoElementClosedForm) {
  ScalarGrid pred(1, 2), gt(1, 2);
  pred.values = {1.0, 3.0};
  gt.values = {5.0, 9.0};  // a = 2, b = 3
  const ScaleShift s = solve_frame_scale_shift(pred, gt, ScalarGrid(1, 2, 1.0), ValidMask(1, 2, true));
  EXPECT_NEAR(s.scale, 2.0, 1e-14);
  EXPECT_NEAR(s.shift[0], 3.0, 1e-14);
}

TEST(FrameScaleShift, GrossOutliersMatchPlantedAndGridOracle) {
  Rng rng(6);
  for (int trial = 0; trial < 3; ++trial) {
    const std::size_t n = 1000;
    ScalarGrid pred(1, n), gt(1, n);
    const double a = rng.uniform(0.5, 2.0), b = rng.uniform(-1, 1);
    for (std::size_t i = 0; i < n; ++i) {
      pred.values[i] = rng.uniform(1, 10);
      gt.values[i] = a * pred.values[i] + b;
      if (i % 5 == 0) gt.values[i] += rng.uniform(5, 50) * (rng.uniform() < 0.5 ? -1 : 1);
    }
    const ScalarGrid w(1, n, 1.0);
    const ScaleShift s = solve_frame_scale_shift(pred, gt, w, ValidMask(1, n, true));
    EXPECT_NEAR(s.scale, a, 1e-6);
    EXPECT_NEAR(s.shift[0], b, 1e-6);
    EXPECT_LE(s.objective, s.ols_objective);

    const double tau = oracle::truncation_cap(pred.values, gt.values, w.values);
    EXPECT_NEAR(s.truncation, tau, 1e-12 * tau);
    const auto best = oracle::coarse_to_fine(pred.values, gt.values, w.values, tau, a, b, 0.3);
    EXPECT_NEAR(s.scale, best.a, 1e-3);
    EXPECT_NEAR(s.shift[0], best.b, 1e-3);
    EXPECT_LE(s.objective, best.objective * (1 + 1e-12) + 1e-12);
  }
}

TEST(FrameScaleShift, Equivariance) {
  Rng rng(7);
  const ScalarGrid gt = random_grid(rng, 10, 10, 1, 5);
  ScalarGrid pred = gt;
  for (double& v : pred.values) v = 0.8 * v + 0.3 + rng.uniform(-0.05, 0.05);
  const ScalarGrid w(10, 10, 1.0);
  const ValidMask m(10, 10, true);
  const ScaleShift s1 = solve_frame_scale_shift(pred, gt, w, m);
  const double c = 2.5, d = -1.0;
  ScalarGrid moved = pred;
  for (double& v : moved.values) v = c * v + d;
  const ScaleShift s2 = solve_frame_scale_shift(moved, gt, w, m);
  // s2.scale (c x + d) + s2.shift == s1.scale x + s1.shift
  EXPECT_NEAR(s2.scale * c, s1.scale, 1e-8);
  EXPECT_NEAR(s2.scale * d + s2.shift[0], s1.shift[0], 1e-8);
}

TEST(FrameScaleShift, RankDeficientErrors) {
  const ScalarGrid w(2, 2, 1.0);
  const ValidMask m(2, 2, true);
  ScalarGrid pred(2, 2);
  pred.values = {1, 2, 3, 4};
  try {
    solve_frame_scale_shift(pred, ScalarGrid(2, 2, 3.0), w, m);
    FAIL();
  } catch (const DegenerateError& e) {
    EXPECT_NE(std::string(e.what()).find("rank-deficient alignment"), std::string::npos);
  }
  EXPECT_THROW(solve_frame_scale_shift(ScalarGrid(2, 2, 1.0), pred, w, m), DegenerateError);
  ValidMask one(2, 2, false);
  one.flags[0] = 1;
  EXPECT_THROW(solve_frame_scale_shift(pred, pred, w, one), DegenerateError);
}

TEST(ScaleShift, IndexSubsetMatchesMaskedSolve) {
  Rng rng(8);
  const ScalarGrid gt = random_grid(rng, 5, 5, 1, 5);
  ScalarGrid pred = random_grid(rng, 5, 5, 1, 5);
  const ScalarGrid w(5, 5, 1.0);
  ValidMask m(5, 5, false);
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < 25; i += 2) {
    m.flags[i] = 1;
    idx.push_back(i);
  }
  const ScaleShift a = solve_frame_scale_shift(pred, gt, w, m);
  const ScaleShift b = solve_scale_shift(pred, gt, w, idx);
  EXPECT_EQ(a.scale, b.scale);
  EXPECT_EQ(a.shift, b.shift);
}

// ---------------------------------------------------------------- spheres

TEST(SphereRegions, CoveringRadiusSelectsAllValid) {
  Rng rng(9);
  VecGrid pts(6, 6, 3);
  for (double& v : pts.values) v = rng.uniform(-1, 1);
  ValidMask mask(6, 6, true);
  mask.flags[3] = mask.flags[17] = 0;
  SphereSampling s;
  s.count = 1;
  s.radius_frac = 1.0;
  const auto regions = sample_sphere_regions(pts, mask, s);
  ASSERT_EQ(regions.size(), 1u);
  EXPECT_EQ(regions[0].members.size(), mask.count());
}

TEST(SphereRegions, ZeroRadiusIsCenterOnly) {
  Rng rng(10);
  VecGrid pts(5, 5, 3);
  for (double& v : pts.values) v = rng.uniform(-1, 1);
  SphereSampling s;
  s.count = 4;
  s.radius_frac = 0.0;
  for (const auto& r : sample_sphere_regions(pts, ValidMask(5, 5, true), s)) {
    ASSERT_EQ(r.members.size(), 1u);
    EXPECT_EQ(r.members[0], r.center);
  }
}

TEST(SphereRegions, MembershipMatchesExhaustiveScan) {
  Rng rng(11);
  VecGrid pts(12, 12, 3);
  for (double& v : pts.values) v = rng.uniform(-2, 2);
  ValidMask mask(12, 12, true);
  for (std::size_t i = 0; i < mask.size(); ++i) mask.flags[i] = rng.uniform() < 0.8;
  SphereSampling s;
  s.count = 8;
  s.seed = 77;
  const auto regions = sample_sphere_regions(pts, mask, s);
  ASSERT_EQ(regions.size(), 8u);
  std::vector<std::size_t> centers;
  for (const auto& r : regions) {
    EXPECT_TRUE(mask[r.center]);
    centers.push_back(r.center);
    const Point3 c(pts.pixel(r.center)[0], pts.pixel(r.center)[1], pts.pixel(r.center)[2]);
    std::vector<std::size_t> expected;
    for (std::size_t i = 0; i < mask.size(); ++i) {
      const Point3 p(pts.pixel(i)[0], pts.pixel(i)[1], pts.pixel(i)[2]);
      if (mask[i] && (p - c).norm() <= r.radius) expected.push_back(i);
    }
    EXPECT_EQ(r.members, expected);
  }
  std::sort(centers.begin(), centers.end());
  EXPECT_EQ(std::unique(centers.begin(), centers.end()), centers.end()) << "centers drawn without replacement";
}

TEST(SphereRegions, DeterministicUnderSeedAndRadiusInRange) {
  Rng rng(12);
  VecGrid pts(8, 8, 3);
  for (double& v : pts.values) v = rng.uniform(-1, 1);
  const ValidMask mask(8, 8, true);
  SphereSampling s;
  const auto a = sample_sphere_regions(pts, mask, s);
  const auto b = sample_sphere_regions(pts, mask, s);
  ASSERT_EQ(a.size(), 16u);
  Point3 lo(1e9, 1e9, 1e9), hi = -lo;
  for (std::size_t i = 0; i < 64; ++i) {
    const Point3 p(pts.pixel(i)[0], pts.pixel(i)[1], pts.pixel(i)[2]);
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const double diag = (hi - lo).norm();
  for (std::size_t j = 0; j < a.size(); ++j) {
    EXPECT_EQ(a[j].center, b[j].center);
    EXPECT_EQ(a[j].radius, b[j].radius);
    EXPECT_GE(a[j].radius, 0.05 * diag * (1 - 1e-12));
    EXPECT_LE(a[j].radius, 0.25 * diag * (1 + 1e-12));
  }
}

TEST(SphereRegions, TooFewValidPointsThrows) {
  VecGrid pts(2, 2, 3, 0.5);
  SphereSampling s;
  s.count = 5;
  EXPECT_THROW(sample_sphere_regions(pts, ValidMask(2, 2, true), s), DegenerateError);
}

// ---------------------------------------------------------------- Umeyama

TEST(Umeyama, RecoversPlantedSimilarity) {
  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = random_cloud(rng, 50, 3);
    Similarity t;
    t.scale = rng.uniform(0.2, 5);
    t.rotation = random_rotation(rng);
    t.translation = Point3(rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-10, 10));
    std::vector<Point3> y;
    for (const auto& p : x) y.push_back(t.apply(p));
    const Similarity s = solve_similarity_umeyama(x, y);
    EXPECT_NEAR(s.scale, t.scale, 1e-9);
    EXPECT_LT((s.rotation - t.rotation).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((s.translation - t.translation).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Umeyama, IdenticalCloudsGiveIdentity) {
  Rng rng(14);
  const auto x = random_cloud(rng, 20, 1);
  const Similarity s = solve_similarity_umeyama(x, x);
  EXPECT_EQ(s.scale, 1.0);
  EXPECT_EQ(s.rotation, Eigen::Matrix3d::Identity());
  EXPECT_EQ(s.translation, Point3::Zero());
}

TEST(Umeyama, ReflectionProneCloudMatchesRotationGrid) {
  // A planar cloud mirrored through its plane: the best orthogonal map is a
  // reflection, so the proper-rotation constraint must be enforced.
  Rng rng(15);
  std::vector<Point3> x, y;
  for (int i = 0; i < 30; ++i) {
    const Point3 p(rng.uniform(-1, 1), rng.uniform(-1, 1), 0.05 * rng.uniform(-1, 1));
    x.push_back(p);
    y.push_back(Point3(p.x(), p.y(), -p.z()) + Point3(0.01 * rng.normal(), 0.01 * rng.normal(), 0.01 * rng.normal()));
  }
  const Similarity s = solve_similarity_umeyama(x, y);
  EXPECT_NEAR(s.rotation.determinant(), 1.0, 1e-12);
  const double solved = sum_sq_residual(s, x, y);

  // Coarse ZYX Euler grid; for each rotation, closed-form best scale and translation.
  double grid_best = 1e300;
  const int steps = 36;
  for (int i = 0; i < steps; ++i) {
    for (int j = 0; j <= steps / 2; ++j) {
      for (int k = 0; k < steps; ++k) {
        const double yaw = 2 * std::numbers::pi * i / steps;
        const double pitch = -std::numbers::pi / 2 + std::numbers::pi * j / (steps / 2);
        const double roll = 2 * std::numbers::pi * k / steps;
        const Eigen::Matrix3d r = axis_angle(Point3::UnitZ(), yaw) * axis_angle(Point3::UnitY(), pitch) *
                                  axis_angle(Point3::UnitX(), roll);
        Point3 mx = Point3::Zero(), my = Point3::Zero();
        for (std::size_t n = 0; n < x.size(); ++n) {
          mx += x[n];
          my += y[n];
        }
        mx /= x.size();
        my /= y.size();
        double num = 0, den = 0;
        for (std::size_t n = 0; n < x.size(); ++n) {
          num += (y[n] - my).dot(r * (x[n] - mx));
          den += (x[n] - mx).squaredNorm();
        }
        Similarity cand;
        cand.scale = std::max(num / den, 1e-9);
        cand.rotation = r;
        cand.translation = my - cand.scale * r * mx;
        grid_best = std::min(grid_best, sum_sq_residual(cand, x, y));
      }
    }
  }
  EXPECT_LE(solved, grid_best + 1e-12);
}

TEST(Umeyama, BeatsRandomSimilaritySweep) {
  Rng rng(16);
  const auto x = random_cloud(rng, 25, 2);
  std::vector<Point3> y;
  const Eigen::Matrix3d r = random_rotation(rng);
  for (const auto& p : x) y.push_back(1.5 * r * p + Point3(1, 2, 3) + 0.1 * Point3(rng.normal(), rng.normal(), rng.normal()));
  const Similarity s = solve_similarity_umeyama(x, y);
  const double best = sum_sq_residual(s, x, y);
  for (int i = 0; i < 10000; ++i) {
    Similarity c;
    c.scale = s.scale * std::exp(rng.uniform(-0.2, 0.2));
    c.rotation = s.rotation * axis_angle(Point3(rng.normal(), rng.normal(), rng.normal()), rng.uniform(0, 0.3));
    c.translation = s.translation + 0.2 * Point3(rng.normal(), rng.normal(), rng.normal());
    ASSERT_GE(sum_sq_residual(c, x, y), best - 1e-12);
  }
}

TEST(Umeyama, DegenerateConfigurations) {
  std::vector<Point3> line{{0, 0, 0}, {1, 1, 1}, {2, 2, 2}, {3, 3, 3}};
  try {
    solve_similarity_umeyama(line, line);
    FAIL();
  } catch (const DegenerateError& e) {
    EXPECT_NE(std::string(e.what()).find("degenerate similarity"), std::string::npos);
  }
  std::vector<Point3> two{{0, 0, 0}, {1, 0, 0}};
  EXPECT_THROW(solve_similarity_umeyama(two, two), DegenerateError);
  EXPECT_THROW(solve_similarity_umeyama(line, two), ShapeError);
}

TEST(Umeyama, CorrespondenceOverload) {
  Rng rng(17);
  const auto x = random_cloud(rng, 10, 1);
  std::vector<Point3> y(x.rbegin(), x.rend());
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < x.size(); ++i) pairs.emplace_back(i, x.size() - 1 - i);
  const Similarity s = solve_similarity_umeyama(x, y, pairs);
  EXPECT_NEAR(s.scale, 1.0, 1e-12);
  EXPECT_LT((s.rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff(), 1e-12);
}

// ---------------------------------------------------------------- trajectories

namespace {

std::vector<CameraParams> random_trajectory(Rng& rng, std::size_t n) {
  std::vector<CameraParams> cams(n);
  for (auto& c : cams) {
    c.quaternion = Eigen::Vector4d(rng.normal(), rng.normal(), rng.normal(), rng.normal()).normalized();
    c.translation = Point3(rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3));
  }
  return cams;
}

std::vector<CameraParams> transformed(const std::vector<CameraParams>& cams, const Similarity& s) {
  auto out = cams;
  for (auto& c : out) {
    c.translation = s.apply(c.translation);
    c.quaternion = rotmat_to_quat(s.rotation * quat_to_rotmat(c.quaternion));
  }
  return out;
}

}  // namespace

TEST(AlignTrajectory, IdenticalTrajectories) {
  Rng rng(18);
  const auto cams = random_trajectory(rng, 8);
  for (double r : align_trajectory(cams, cams).residuals) EXPECT_EQ(r, 0.0);
}

TEST(AlignTrajectory, AbsorbsScaledRigidMotion) {
  Rng rng(19);
  const auto pred = random_trajectory(rng, 8);
  Similarity s;
  s.scale = 2.0;
  s.rotation = random_rotation(rng);
  s.translation = Point3(4, -1, 2);
  const auto gt = transformed(pred, s);
  for (double r : align_trajectory(pred, gt).residuals) EXPECT_LT(r, 1e-9);
}

TEST(AlignTrajectory, ResidualsRecomputedFromTransform) {
  Rng rng(20);
  const auto gt = random_trajectory(rng, 12);
  auto pred = gt;
  for (auto& c : pred) c.translation += 0.1 * Point3(rng.normal(), rng.normal(), rng.normal());
  const TrajectoryAlignment a = align_trajectory(pred, gt);
  double direct = 0, reported = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const Point3 p = a.transform.scale * a.transform.rotation * pred[i].translation + a.transform.translation;
    direct += (p - gt[i].translation).squaredNorm();
    reported += a.residuals[i] * a.residuals[i];
  }
  EXPECT_NEAR(std::sqrt(direct / gt.size()), std::sqrt(reported / gt.size()), 1e-12);
}

TEST(AlignTrajectory, ResidualsInvariantToSimilarityOfPrediction) {
  Rng rng(21);
  const auto gt = random_trajectory(rng, 10);
  auto pred = gt;
  for (auto& c : pred) c.translation += 0.2 * Point3(rng.normal(), rng.normal(), rng.normal());
  Similarity s;
  s.scale = 0.3;
  s.rotation = random_rotation(rng);
  s.translation = Point3(-5, 5, 1);
  const auto a = align_trajectory(pred, gt).residuals;
  const auto b = align_trajectory(transformed(pred, s), gt).residuals;
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-9);
}

TEST(AlignTrajectory, Errors) {
  Rng rng(22);
  const auto a = random_trajectory(rng, 5);
  const auto b = random_trajectory(rng, 4);
  EXPECT_THROW(align_trajectory(a, b), ShapeError);
  const std::vector<CameraParams> two(a.begin(), a.begin() + 2);
  EXPECT_THROW(align_trajectory(two, two), DegenerateError);
}
