#include "geomcarve/recipe.hpp"

#include <algorithm>
#include <array>

#include "geomcarve/error.hpp"
#include "json.hpp"

namespace geomcarve {

namespace {

constexpr std::array<std::string_view, 8> kLosses = {"reg", "sg", "tg", "conf", "frame", "sphere", "consis", "cam"};
constexpr std::array<std::string_view, 2> kTargets = {"depth", "points"};
constexpr std::array<std::string_view, 3> kWeightings = {"unit", "inv_depth", "conf"};

template <std::size_t N>
bool contains(const std::array<std::string_view, N>& set, std::string_view s) {
  return std::find(set.begin(), set.end(), s) != set.end();
}

bool uses_target(std::string_view loss) { return loss != "consis" && loss != "cam"; }

std::string term_label(const RecipeTerm& t) {
  return uses_target(t.loss) ? t.loss + "_" + t.target : t.loss;
}

}  // namespace

LossRecipe builtin_recipe(std::string_view name) {
  if (name == "vggt") {
    return {"vggt",
            {{"conf", "depth", "conf", 1.0},
             {"sg", "depth", "conf", 1.0},
             {"conf", "points", "conf", 1.0},
             {"sg", "points", "conf", 1.0},
             {"cam", "", "unit", kCameraLossWeight}}};
  }
  if (name == "ours") {
    return {"ours",
            {{"reg", "depth", "inv_depth", 1.0},
             {"frame", "depth", "inv_depth", 1.0},
             {"reg", "points", "inv_depth", 1.0},
             {"frame", "points", "inv_depth", 1.0},
             {"consis", "", "unit", 1.0},
             {"cam", "", "unit", kCameraLossWeight}}};
  }
  throw Error("unknown recipe '" + std::string(name) + "'");
}

std::vector<std::string> builtin_recipe_names() { return {"vggt", "ours"}; }

void validate_recipe(const LossRecipe& recipe) {
  if (recipe.terms.empty()) throw Error("recipe '" + recipe.name + "' has no terms");
  for (const RecipeTerm& t : recipe.terms) {
    if (!contains(kLosses, t.loss)) throw Error("unknown loss '" + t.loss + "' in recipe '" + recipe.name + "'");
    if (uses_target(t.loss) && !contains(kTargets, t.target)) {
      throw Error("unknown target '" + t.target + "' for loss '" + t.loss + "'");
    }
    if (!contains(kWeightings, t.weighting)) throw Error("unknown weighting '" + t.weighting + "'");
    if (!(t.weight >= 0.0)) throw Error("term weights must be nonnegative");
  }
}

LossRecipe recipe_from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("recipe is not valid JSON: ") + e.what());
  }
  LossRecipe r;
  r.name = j.value("name", "custom");
  if (!j.contains("terms") || !j["terms"].is_array()) throw Error("recipe needs a 'terms' array");
  for (const auto& t : j["terms"]) {
    if (!t.contains("loss")) throw Error("recipe term without 'loss'");
    r.terms.push_back({t["loss"].get<std::string>(), t.value("target", "depth"), t.value("weighting", "unit"),
                       t.value("weight", 1.0)});
  }
  validate_recipe(r);
  return r;
}

CompositeReport loss_composite(const SequenceSample& pred_in, const SequenceSample& gt, const LossRecipe& recipe,
                               const CompositeOptions& options) {
  validate_recipe(recipe);
  pred_in.validate();
  gt.validate();

  CompositeReport out;
  SequenceSample pred = pred_in;
  if (options.align_sequence_scale) {
    out.sequence_scale = solve_sequence_scale(pred_in, gt);
    for (Frame& f : pred.frames) {
      for (double& d : f.depth.values) d *= out.sequence_scale;
      for (double& p : f.points.values) p *= out.sequence_scale;
      f.camera.translation *= out.sequence_scale;
    }
  }

  const StackedMask mask = joint_mask(pred, gt);
  const Field pred_depth = stack_depth(pred), gt_depth = stack_depth(gt);
  const Field pred_points = stack_points(pred), gt_points = stack_points(gt);
  const Field unit(FieldShape{pred.size(), pred.height(), pred.width(), 1}, 1.0);
  const Field inv_depth = weight_inverse_depth(gt_depth, mask, options.depth_clamp);
  const std::vector<CameraParams> pred_cams = pred.cameras(), gt_cams = gt.cameras();

  for (const RecipeTerm& term : recipe.terms) {
    const bool depth = term.target == "depth";
    const FieldView p = depth ? pred_depth.view() : pred_points.view();
    const FieldView g = depth ? gt_depth.view() : gt_points.view();

    Field conf;
    if (term.weighting == "conf" || term.loss == "conf") {
      conf = depth ? stack_conf_depth(pred) : stack_conf_point(pred);
    }
    const FieldView w = term.weighting == "inv_depth" ? inv_depth.view()
                        : term.weighting == "conf"    ? conf.view()
                                                      : unit.view();

    LossReport item;
    if (term.loss == "reg") {
      item = loss_reg(p, g, w, mask);
    } else if (term.loss == "sg") {
      item = loss_spatial_gradient(p, g, w, mask);
    } else if (term.loss == "tg") {
      item = loss_temporal_gradient(p, g, w, mask);
    } else if (term.loss == "conf") {
      item = loss_confidence_weighted(p, g, conf, mask, options.confidence);
    } else if (term.loss == "frame") {
      item = loss_frame_aligned(p, g, w, mask);
    } else if (term.loss == "sphere") {
      // Regions are drawn per frame from the ground-truth point map.
      std::vector<double> per_frame;
      const std::size_t n = pred.height() * pred.width();
      const std::size_t c = p.shape.channels;
      const FieldShape one{1, pred.height(), pred.width(), c};
      const FieldShape one_w{1, pred.height(), pred.width(), 1};
      for (std::size_t t = 0; t < pred.size(); ++t) {
        ValidMask m(pred.height(), pred.width(), false);
        std::copy(mask.flags.begin() + t * n, mask.flags.begin() + (t + 1) * n, m.flags.begin());
        SphereSampling sampling = options.spheres;
        sampling.seed += t;
        sampling.count = std::min(sampling.count, m.count());
        const auto regions = sample_sphere_regions(gt.frames[t].points, m, sampling);
        const LossReport r = loss_sphere_aligned(FieldView(one, p.values.subspan(t * n * c, n * c)),
                                                 FieldView(one, g.values.subspan(t * n * c, n * c)),
                                                 FieldView(one_w, w.values.subspan(t * n, n)), m, regions);
        per_frame.push_back(r.value);
        item.element_count += r.element_count;
        item.warnings.insert(item.warnings.end(), r.warnings.begin(), r.warnings.end());
      }
      item.value = pairwise_sum(per_frame) / static_cast<double>(per_frame.size());
    } else if (term.loss == "consis") {
      item = loss_consistency(pred_points, pred_depth, pred_cams, mask);
    } else if (term.loss == "cam") {
      item = loss_camera(pred_cams, gt_cams);
    }
    item.name = term_label(term);
    item.gradients.clear();
    out.items.push_back(std::move(item));
    out.weights.push_back(term.weight);
  }

  std::vector<double> weighted;
  for (std::size_t i = 0; i < out.items.size(); ++i) weighted.push_back(out.weights[i] * out.items[i].value);
  out.total = pairwise_sum(weighted);
  return out;
}

}  // namespace geomcarve
