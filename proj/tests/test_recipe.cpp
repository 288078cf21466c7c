#include <gtest/gtest.h>

#include <array>
#include <cmath>

#include "geomcarve/alignment.hpp"
#include "geomcarve/error.hpp"
#include "geomcarve/losses.hpp"
#include "geomcarve/random.hpp"
#include "geomcarve/recipe.hpp"
#include "geomcarve/synth.hpp"

using namespace geomcarve;

namespace {

constexpr std::array<ScenePreset, 3> kPresets = {ScenePreset::Plane, ScenePreset::BoxRoom,
                                                 ScenePreset::SphereField};

SequenceSample noisy_prediction(const SequenceSample& gt, std::uint64_t seed) {
  const std::vector<Corruption> cs{GlobalScale{1.8}, AdditiveNoise{0.02, seed}, PoseJitter{0.02, seed},
                                   FovBias{1.03}};
  SequenceSample pred = corrupt(gt, cs);
  Rng rng(seed);
  for (Frame& f : pred.frames) {
    for (double& c : f.conf_depth->values) c = rng.uniform(0.3, 3.0);
    for (double& c : f.conf_point->values) c = rng.uniform(0.3, 3.0);
  }
  return pred;
}

struct Stacked {
  Field pd, gd, pp, gp, cd, cp;
  StackedMask mask;
  std::vector<CameraParams> pc, gc;
  double scale;
};

// Applies the per-sequence scale by hand and stacks everything the individual ops need.
Stacked stack_scaled(const SequenceSample& pred, const SequenceSample& gt) {
  Stacked s;
  s.scale = solve_sequence_scale(pred, gt);
  SequenceSample scaled = pred;
  for (Frame& f : scaled.frames) {
    for (double& d : f.depth.values) d *= s.scale;
    for (double& p : f.points.values) p *= s.scale;
    f.camera.translation *= s.scale;
  }
  s.pd = stack_depth(scaled);
  s.gd = stack_depth(gt);
  s.pp = stack_points(scaled);
  s.gp = stack_points(gt);
  s.cd = stack_conf_depth(scaled);
  s.cp = stack_conf_point(scaled);
  s.mask = joint_mask(scaled, gt);
  s.pc = scaled.cameras();
  s.gc = gt.cameras();
  return s;
}

}  // namespace

TEST(Recipe, BuiltinNames) {
  const auto names = builtin_recipe_names();
  ASSERT_EQ(names.size(), 2u);
  for (const auto& n : names) EXPECT_NO_THROW(validate_recipe(builtin_recipe(n)));
  EXPECT_THROW(builtin_recipe("dust3r"), Error);
}

TEST(Recipe, VggtStructure) {
  const LossRecipe r = builtin_recipe("vggt");
  ASSERT_EQ(r.terms.size(), 5u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(r.terms[i].loss, i % 2 == 0 ? "conf" : "sg");
    EXPECT_EQ(r.terms[i].target, i < 2 ? "depth" : "points");
    EXPECT_EQ(r.terms[i].weighting, "conf");
    EXPECT_EQ(r.terms[i].weight, 1.0);
  }
  EXPECT_EQ(r.terms[4].loss, "cam");
  EXPECT_EQ(r.terms[4].weight, kCameraLossWeight);
  EXPECT_EQ(kCameraLossWeight, 5.0);
}

TEST(Recipe, OursStructure) {
  const LossRecipe r = builtin_recipe("ours");
  std::vector<std::string> labels;
  for (const auto& t : r.terms) {
    labels.push_back(t.loss + ":" + t.target + ":" + t.weighting);
    if (t.loss == "cam") {
      EXPECT_EQ(t.weight, 5.0);
    } else {
      EXPECT_EQ(t.weight, 1.0);
    }
  }
  const std::vector<std::string> expect{"reg:depth:inv_depth", "frame:depth:inv_depth", "reg:points:inv_depth",
                                        "frame:points:inv_depth", "consis::unit", "cam::unit"};
  EXPECT_EQ(labels, expect);
}

TEST(Recipe, PerfectPredictionIsZeroForEveryRecipeAndPreset) {
  for (ScenePreset p : kPresets) {
    const SequenceSample gt = generate_scene(p, 3, 16, 12, 31);
    for (const auto& name : builtin_recipe_names()) {
      const CompositeReport r = loss_composite(gt, gt, builtin_recipe(name));
      EXPECT_EQ(r.sequence_scale, 1.0);
      EXPECT_LT(std::abs(r.total), 1e-12) << name << " " << preset_name(p);
    }
  }
}

TEST(Recipe, GlobalScaleIsRemovedBySequenceAlignment) {
  const SequenceSample gt = generate_scene(ScenePreset::BoxRoom, 3, 16, 12, 32);
  const SequenceSample pred = corrupt(gt, GlobalScale{2.0});
  const CompositeReport r = loss_composite(pred, gt, builtin_recipe("ours"));
  EXPECT_DOUBLE_EQ(r.sequence_scale, 0.5);
  EXPECT_LT(r.total, 1e-9);
  CompositeOptions unaligned;
  unaligned.align_sequence_scale = false;
  const CompositeReport raw = loss_composite(pred, gt, builtin_recipe("ours"), unaligned);
  EXPECT_GT(raw.total, 0.1);
}

TEST(Recipe, VggtEqualsSumOfIndividualOps) {
  const SequenceSample gt = generate_scene(ScenePreset::SphereField, 3, 16, 12, 33);
  const SequenceSample pred = noisy_prediction(gt, 33);
  const CompositeReport r = loss_composite(pred, gt, builtin_recipe("vggt"));
  const Stacked s = stack_scaled(pred, gt);

  const double expect = loss_confidence_weighted(s.pd, s.gd, s.cd, s.mask).value +
                        loss_spatial_gradient(s.pd, s.gd, s.cd, s.mask).value +
                        loss_confidence_weighted(s.pp, s.gp, s.cp, s.mask).value +
                        loss_spatial_gradient(s.pp, s.gp, s.cp, s.mask).value + 5.0 * loss_camera(s.pc, s.gc).value;
  EXPECT_EQ(r.sequence_scale, s.scale);
  EXPECT_GT(r.total, 0.0);
  EXPECT_NEAR(r.total, expect, 1e-12 * expect);
  ASSERT_EQ(r.items.size(), 5u);
  EXPECT_EQ(r.items[0].name, "conf_depth");
  EXPECT_EQ(r.items[4].name, "cam");
}

TEST(Recipe, OursEqualsSumOfIndividualOps) {
  const SequenceSample gt = generate_scene(ScenePreset::BoxRoom, 3, 16, 12, 34);
  const SequenceSample pred = noisy_prediction(gt, 34);
  const CompositeReport r = loss_composite(pred, gt, builtin_recipe("ours"));
  const Stacked s = stack_scaled(pred, gt);
  const Field w = weight_inverse_depth(s.gd, s.mask);

  const double expect = loss_reg(s.pd, s.gd, w, s.mask).value + loss_frame_aligned(s.pd, s.gd, w, s.mask).value +
                        loss_reg(s.pp, s.gp, w, s.mask).value + loss_frame_aligned(s.pp, s.gp, w, s.mask).value +
                        loss_consistency(s.pp, s.pd, s.pc, s.mask).value + 5.0 * loss_camera(s.pc, s.gc).value;
  EXPECT_GT(r.total, 0.0);
  EXPECT_NEAR(r.total, expect, 1e-12 * expect);
}

TEST(Recipe, CustomTermsOnPerfectPrediction) {
  const SequenceSample gt = generate_scene(ScenePreset::SphereField, 3, 16, 12, 35);
  const LossRecipe r = recipe_from_json(R"({"name": "mix", "terms": [
      {"loss": "tg", "target": "depth", "weighting": "inv_depth"},
      {"loss": "sphere", "target": "points", "weight": 0.5},
      {"loss": "reg", "target": "points", "weighting": "conf", "weight": 2}]})");
  EXPECT_EQ(r.name, "mix");
  ASSERT_EQ(r.terms.size(), 3u);
  EXPECT_EQ(r.terms[1].weighting, "unit");
  EXPECT_EQ(r.terms[2].weight, 2.0);
  const CompositeReport rep = loss_composite(gt, gt, r);
  EXPECT_LT(rep.total, 1e-12);
  EXPECT_EQ(rep.items[1].name, "sphere_points");
}

TEST(Recipe, JsonErrors) {
  EXPECT_THROW(recipe_from_json("{not json"), Error);
  EXPECT_THROW(recipe_from_json(R"({"name": "x"})"), Error);
  EXPECT_THROW(recipe_from_json(R"({"terms": [{"target": "depth"}]})"), Error);
  EXPECT_THROW(recipe_from_json(R"({"terms": []})"), Error);
  EXPECT_THROW(recipe_from_json(R"({"terms": [{"loss": "chamfer"}]})"), Error);
  EXPECT_THROW(recipe_from_json(R"({"terms": [{"loss": "reg", "target": "normals"}]})"), Error);
  EXPECT_THROW(recipe_from_json(R"({"terms": [{"loss": "reg", "weighting": "random"}]})"), Error);
  EXPECT_THROW(recipe_from_json(R"({"terms": [{"loss": "reg", "weight": -1}]})"), Error);
}

TEST(Recipe, UnknownLossMessageNamesIt) {
  LossRecipe r{"bad", {{"ssim", "depth", "unit", 1.0}}};
  try {
    validate_recipe(r);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("ssim"), std::string::npos);
  }
  const SequenceSample gt = generate_scene(ScenePreset::Plane, 2, 8, 8, 1);
  EXPECT_THROW(loss_composite(gt, gt, r), Error);
}
