#include "geomcarve/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>

#include "geomcarve/camera.hpp"
#include "geomcarve/error.hpp"
#include "geomcarve/losses.hpp"
#include "geomcarve/random.hpp"

namespace geomcarve {

namespace {

constexpr std::size_t kFrames = 2;
constexpr std::size_t kHeight = 4;
constexpr std::size_t kWidth = 4;
constexpr int kMaxResamples = 100;
// Central differences of a mean over ~30 terms carry ~1e-10 of rounding noise at
// eps = 1e-6, so components smaller than this are compared in absolute terms.
constexpr double kRelFloor = 1e-5;

double kink_margin(double eps) { return 10.0 * eps; }

struct Comparison {
  double max_rel = 0.0;
  std::size_t coordinates = 0;

  // Central differences of `eval` over every entry of `x` against `analytic`.
  void run(std::vector<double>& x, const std::vector<double>& analytic, const std::function<double()>& eval,
           double eps) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double saved = x[i];
      x[i] = saved + eps;
      const double up = eval();
      x[i] = saved - eps;
      const double down = eval();
      x[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), kRelFloor});
      max_rel = std::max(max_rel, std::abs(analytic[i] - numeric) / denom);
      ++coordinates;
    }
  }

  void merge(const Comparison& o) {
    max_rel = std::max(max_rel, o.max_rel);
    coordinates += o.coordinates;
  }
};

struct FieldInstance {
  FieldShape shape;
  std::vector<double> pred, gt, weights;
  std::vector<std::uint8_t> mask;

  FieldView p() const { return FieldView(shape, pred); }
  FieldView g() const { return FieldView(shape, gt); }
  FieldView w() const { return FieldView(FieldShape{shape.frames, shape.height, shape.width, 1}, weights); }
  MaskView m() const { return MaskView(shape.frames, shape.height, shape.width, mask); }
};

FieldInstance random_field(Rng& rng, std::size_t channels, double w_lo, double w_hi) {
  FieldInstance f;
  f.shape = FieldShape{kFrames, kHeight, kWidth, channels};
  f.pred.resize(f.shape.size());
  f.gt.resize(f.shape.size());
  for (double& v : f.pred) v = rng.uniform(-2.0, 2.0);
  for (double& v : f.gt) v = rng.uniform(-2.0, 2.0);
  f.weights.resize(f.shape.pixels());
  for (double& v : f.weights) v = rng.uniform(w_lo, w_hi);
  f.mask.resize(f.shape.pixels());
  for (auto& m : f.mask) m = rng.uniform() < 0.85 ? 1 : 0;
  return f;
}

double channel_norm(const std::vector<double>& a, const std::vector<double>& b, std::size_t i, std::size_t j,
                    std::size_t c) {
  // |(a_j - a_i) - (b_j - b_i)|, or |a_i - b_i| when i == j.
  double sq = 0.0;
  for (std::size_t k = 0; k < c; ++k) {
    const double d = i == j ? a[i * c + k] - b[i * c + k]
                            : (a[j * c + k] - a[i * c + k]) - (b[j * c + k] - b[i * c + k]);
    sq += d * d;
  }
  return std::sqrt(sq);
}

enum class Pairs { None, Spatial, Temporal };

// Distances of every L1 term from its kink; empty when the instance has no terms.
std::vector<double> kink_distances(const FieldInstance& f, Pairs pairs) {
  const std::size_t c = f.shape.channels;
  const std::size_t n = f.shape.frame_pixels();
  std::vector<double> out;
  for (std::size_t a = 0; a < f.shape.pixels(); ++a) {
    if (!f.mask[a]) continue;
    const std::size_t u = (a % n) % kWidth;
    const std::size_t v = (a % n) / kWidth;
    switch (pairs) {
      case Pairs::None:
        out.push_back(channel_norm(f.pred, f.gt, a, a, c));
        break;
      case Pairs::Spatial:
        if (u + 1 < kWidth && f.mask[a + 1]) out.push_back(channel_norm(f.pred, f.gt, a, a + 1, c));
        if (v + 1 < kHeight && f.mask[a + kWidth]) out.push_back(channel_norm(f.pred, f.gt, a, a + kWidth, c));
        break;
      case Pairs::Temporal:
        if (a + n < f.shape.pixels() && f.mask[a + n]) out.push_back(channel_norm(f.pred, f.gt, a, a + n, c));
        break;
    }
  }
  return out;
}

bool kink_free(const std::vector<double>& distances, double eps) {
  return !distances.empty() &&
         std::all_of(distances.begin(), distances.end(), [&](double d) { return d > kink_margin(eps); });
}

using LossFn = LossReport (*)(FieldView, FieldView, FieldView, MaskView);

std::optional<Comparison> check_field_loss(Rng& rng, double eps, LossFn fn, Pairs pairs) {
  Comparison total;
  for (std::size_t channels : {std::size_t{1}, std::size_t{3}}) {
    FieldInstance f = random_field(rng, channels, 0.2, 2.0);
    if (!kink_free(kink_distances(f, pairs), eps)) return std::nullopt;
    const LossReport rep = fn(f.p(), f.g(), f.w(), f.m());
    auto eval = [&] { return fn(f.p(), f.g(), f.w(), f.m()).value; };
    total.run(f.pred, rep.gradients.at("pred"), eval, eps);
    total.run(f.weights, rep.gradients.at("weights"), eval, eps);
  }
  return total;
}

std::optional<Comparison> check_confidence(Rng& rng, double eps) {
  Comparison total;
  for (std::size_t channels : {std::size_t{1}, std::size_t{3}}) {
    FieldInstance f = random_field(rng, channels, 0.2, 3.0);
    std::vector<double> d = kink_distances(f, Pairs::None);
    for (std::size_t i = 0; i < f.weights.size(); ++i) {
      if (f.mask[i]) d.push_back(std::abs(std::log(f.weights[i])));
    }
    if (!kink_free(d, eps)) return std::nullopt;
    const LossReport rep = loss_confidence_weighted(f.p(), f.g(), f.w(), f.m());
    auto eval = [&] { return loss_confidence_weighted(f.p(), f.g(), f.w(), f.m()).value; };
    total.run(f.pred, rep.gradients.at("pred"), eval, eps);
    total.run(f.weights, rep.gradients.at("conf"), eval, eps);
  }
  return total;
}

CameraParams random_camera(Rng& rng) {
  CameraParams c;
  Eigen::Vector4d q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  c.quaternion = q.normalized() * rng.uniform(0.8, 1.2);
  c.translation = Eigen::Vector3d(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
  c.fov = Eigen::Vector2d(rng.uniform(0.6, 1.6), rng.uniform(0.6, 1.6));
  return c;
}

std::vector<double> pack_cameras(const std::vector<CameraParams>& cams) {
  std::vector<double> out;
  for (const auto& c : cams) {
    const auto g = c.to_vector();
    out.insert(out.end(), g.data(), g.data() + 9);
  }
  return out;
}

std::vector<CameraParams> unpack_cameras(const std::vector<double>& x) {
  std::vector<CameraParams> out;
  for (std::size_t t = 0; t * 9 < x.size(); ++t) {
    out.push_back(CameraParams::from_vector(Eigen::Map<const Eigen::Matrix<double, 9, 1>>(x.data() + t * 9)));
  }
  return out;
}

std::optional<Comparison> check_consistency(Rng& rng, double eps) {
  const FieldShape ds{kFrames, kHeight, kWidth, 1};
  const FieldShape ps{kFrames, kHeight, kWidth, 3};
  std::vector<double> depth(ds.size()), points(ps.size());
  std::vector<std::uint8_t> mask(ds.pixels());
  std::vector<CameraParams> cams;
  for (std::size_t t = 0; t < kFrames; ++t) cams.push_back(random_camera(rng));
  for (double& d : depth) d = rng.uniform(1.0, 4.0);
  for (auto& m : mask) m = rng.uniform() < 0.85 ? 1 : 0;

  const std::size_t n = ds.frame_pixels();
  for (std::size_t t = 0; t < kFrames; ++t) {
    ScalarGrid dg(kHeight, kWidth);
    std::copy(depth.begin() + t * n, depth.begin() + (t + 1) * n, dg.values.begin());
    const VecGrid clean = unproject(dg, cams[t], ValidMask(kHeight, kWidth, true));
    for (std::size_t i = 0; i < n * 3; ++i) points[t * n * 3 + i] = clean.values[i] + rng.uniform(-0.3, 0.3);
    for (std::size_t i = 0; i < n * 3; ++i) {
      if (mask[t * n + i / 3] && std::abs(points[t * n * 3 + i] - clean.values[i]) <= kink_margin(eps)) return std::nullopt;
    }
  }
  if (std::none_of(mask.begin(), mask.end(), [](auto m) { return m != 0; })) return std::nullopt;

  std::vector<double> cam_x = pack_cameras(cams);
  const MaskView mv(kFrames, kHeight, kWidth, mask);
  auto eval = [&] {
    return loss_consistency(FieldView(ps, points), FieldView(ds, depth), unpack_cameras(cam_x), mv).value;
  };
  const LossReport rep = loss_consistency(FieldView(ps, points), FieldView(ds, depth), cams, mv);
  Comparison total;
  total.run(points, rep.gradients.at("points"), eval, eps);
  total.run(depth, rep.gradients.at("depth"), eval, eps);
  total.run(cam_x, rep.gradients.at("camera"), eval, eps);
  return total;
}

std::optional<Comparison> check_camera(Rng& rng, double eps) {
  std::vector<CameraParams> pred, gt;
  for (std::size_t t = 0; t < kFrames; ++t) {
    gt.push_back(random_camera(rng));
    pred.push_back(random_camera(rng));
    if (std::abs(pred.back().quaternion.dot(gt.back().quaternion)) <= kink_margin(eps)) return std::nullopt;
    const auto d = pred.back().to_vector();
    const auto g = gt.back().to_vector();
    const double flip = pred.back().quaternion.dot(gt.back().quaternion) < 0.0 ? -1.0 : 1.0;
    for (int k = 0; k < 9; ++k) {
      const double diff = ((k >= 3 && k < 7) ? flip * d[k] : d[k]) - g[k];
      if (std::abs(diff) <= kink_margin(eps)) return std::nullopt;
    }
  }
  std::vector<double> x = pack_cameras(pred);
  auto eval = [&] { return loss_camera(unpack_cameras(x), gt).value; };
  const LossReport rep = loss_camera(pred, gt);
  Comparison total;
  total.run(x, rep.gradients.at("camera"), eval, eps);
  return total;
}

}  // namespace

std::vector<std::string> gradcheck_losses() { return {"reg", "sg", "tg", "conf", "consis", "cam"}; }

GradcheckResult gradcheck(std::string_view loss_name, std::uint64_t seed, double epsilon) {
  if (!(epsilon > 0.0)) throw DomainError("gradcheck: epsilon must be positive");
  std::function<std::optional<Comparison>(Rng&)> attempt;
  if (loss_name == "reg") {
    attempt = [&](Rng& r) { return check_field_loss(r, epsilon, &loss_reg, Pairs::None); };
  } else if (loss_name == "sg") {
    attempt = [&](Rng& r) { return check_field_loss(r, epsilon, &loss_spatial_gradient, Pairs::Spatial); };
  } else if (loss_name == "tg") {
    attempt = [&](Rng& r) { return check_field_loss(r, epsilon, &loss_temporal_gradient, Pairs::Temporal); };
  } else if (loss_name == "conf") {
    attempt = [&](Rng& r) { return check_confidence(r, epsilon); };
  } else if (loss_name == "consis") {
    attempt = [&](Rng& r) { return check_consistency(r, epsilon); };
  } else if (loss_name == "cam") {
    attempt = [&](Rng& r) { return check_camera(r, epsilon); };
  } else {
    throw Error("gradcheck: no analytic gradient for loss '" + std::string(loss_name) + "'");
  }

  Rng rng(seed);
  for (int resamples = 0; resamples <= kMaxResamples; ++resamples) {
    if (auto cmp = attempt(rng)) {
      return GradcheckResult{std::string(loss_name), cmp->max_rel, cmp->coordinates, resamples};
    }
  }
  throw Error("gradcheck: every instance for '" + std::string(loss_name) + "' was within 10*epsilon of a kink");
}

}  // namespace geomcarve
