#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "geomcarve/alignment.hpp"
#include "geomcarve/losses.hpp"
#include "geomcarve/sequence.hpp"

namespace geomcarve {

/// One weighted term of a composite objective.
///
///   loss      reg | sg | tg | conf | frame | sphere | consis | cam
///   target    depth | points (ignored by consis and cam)
///   weighting unit | inv_depth | conf (conf reads the prediction's confidence maps)
struct RecipeTerm {
  std::string loss;
  std::string target = "depth";
  std::string weighting = "unit";
  double weight = 1.0;
};

struct LossRecipe {
  std::string name;
  std::vector<RecipeTerm> terms;
};

inline constexpr double kCameraLossWeight = 5.0;

/// "vggt": confidence-weighted regression + spatial gradient on depth and points, plus camera.
/// "ours": inverse-depth weighted regression + per-frame aligned loss + consistency, plus camera.
LossRecipe builtin_recipe(std::string_view name);
std::vector<std::string> builtin_recipe_names();

/// Parses {"name": ..., "terms": [{"loss", "target", "weighting", "weight"}, ...]}.
LossRecipe recipe_from_json(std::string_view text);

/// Throws Error naming the first unknown loss, target or weighting.
void validate_recipe(const LossRecipe& recipe);

struct CompositeOptions {
  ConfidenceConfig confidence;
  double depth_clamp = kDefaultDepthClamp;
  SphereSampling spheres;
  bool align_sequence_scale = true;
};

struct CompositeReport {
  std::vector<LossReport> items;  // unweighted values; items[i].name is "<loss>_<target>"
  std::vector<double> weights;
  double total = 0.0;
  double sequence_scale = 1.0;
};

/// Evaluates every term on the joint valid mask, after scaling predicted depth,
/// points and camera translations by the per-sequence scale.
CompositeReport loss_composite(const SequenceSample& pred, const SequenceSample& gt, const LossRecipe& recipe,
                               const CompositeOptions& options = {});

}  // namespace geomcarve
