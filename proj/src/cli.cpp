#include "geomcarve/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <ostream>
#include <sstream>
#include <vector>

#include "CLI11.hpp"
#include "geomcarve/cost_model.hpp"
#include "geomcarve/error.hpp"
#include "geomcarve/fusion.hpp"
#include "geomcarve/gradcheck.hpp"
#include "geomcarve/io.hpp"
#include "geomcarve/metrics.hpp"
#include "geomcarve/recipe.hpp"
#include "geomcarve/synth.hpp"
#include "json_text.hpp"

namespace geomcarve {

using detail::Json;

std::uint64_t default_seed() {
  const char* env = std::getenv("GEOMCARVE_SEED");
  if (!env || !*env) return kDefaultSeed;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (*end != '\0' || env[0] == '-') throw Error("GEOMCARVE_SEED must be an unsigned integer, got '" + std::string(env) + "'");
  return v;
}

namespace {

constexpr double kGradcheckTolerance = 1e-4;

std::vector<double> parse_thresholds(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != tok.size() || !(v > 0.0)) throw Error("invalid threshold '" + tok + "'");
    out.push_back(v);
  }
  if (out.empty()) throw Error("at least one threshold is required");
  return out;
}

std::string threshold_key(double tau) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "f@%g", tau);
  return buf;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

LossRecipe resolve_recipe(const std::string& spec) {
  const auto names = builtin_recipe_names();
  if (std::find(names.begin(), names.end(), spec) != names.end()) return builtin_recipe(spec);
  if (!std::filesystem::exists(spec)) {
    throw Error("recipe '" + spec + "' is neither a built-in recipe (vggt, ours) nor a readable file");
  }
  LossRecipe r = recipe_from_json(read_text(spec));
  validate_recipe(r);
  return r;
}

MetricTable parse_table(const std::string& text) {
  const Json j = Json::parse(text);
  MetricTable t;
  t.methods = j.at("methods").get<std::vector<std::string>>();
  for (const Json& m : j.at("metrics")) {
    t.metrics.push_back(m.at("name").get<std::string>());
    t.higher_is_better.push_back(m.at("higher_is_better").get<bool>());
  }
  for (const Json& row : j.at("values")) {
    std::vector<double> r;
    for (const Json& v : row) r.push_back(v.is_null() ? std::nan("") : v.get<double>());
    t.values.push_back(std::move(r));
  }
  return t;
}

struct Options {
  std::uint64_t seed = kDefaultSeed;

  // synth
  std::string preset = "box-room";
  std::size_t frames = 4;
  std::size_t width = 32;
  std::size_t height = 24;
  std::string out_dir;
  bool force = false;
  double global_scale = 1.0;
  double affine_drift = 0.0;
  double noise = 0.0;
  double pose_jitter_deg = 0.0;
  double fov_bias = 1.0;

  // eval / loss
  std::string pred_dir;
  std::string gt_dir;
  double voxel = kDefaultVoxelSize;
  std::string thresholds = "0.05,0.25,0.50";
  std::string depth_mode = "video";
  std::string recipe = "ours";
  std::string synth_preset;

  // gradcheck
  std::string grad_loss = "all";
  std::size_t grad_seeds = 10;
  double epsilon = 1e-6;

  // fusion-check
  std::size_t instances = 20;
  std::size_t tokens = 4;
  std::size_t channels = 8;
  std::size_t heads = kDefaultFusionHeads;

  // cost
  std::string arch;
  std::size_t cost_frames = 8;

  // rank
  std::string table;
};

Json cmd_synth(const Options& o) {
  SequenceSample s = generate_scene(parse_preset(o.preset), o.frames, o.width, o.height, o.seed);
  std::vector<Corruption> corruptions;
  if (o.global_scale != 1.0) corruptions.push_back(GlobalScale{o.global_scale});
  if (o.affine_drift != 0.0) corruptions.push_back(PerFrameAffine::random(o.frames, o.affine_drift, o.seed + 1));
  if (o.noise != 0.0) corruptions.push_back(AdditiveNoise{o.noise, o.seed + 2});
  if (o.pose_jitter_deg != 0.0) corruptions.push_back(PoseJitter{o.pose_jitter_deg * M_PI / 180.0, o.seed + 3});
  if (o.fov_bias != 1.0) corruptions.push_back(FovBias{o.fov_bias});
  if (!corruptions.empty()) s = corrupt(s, corruptions);
  write_sequence(s, o.out_dir, o.force);

  std::size_t valid = 0;
  for (const Frame& f : s.frames) valid += f.mask.count();
  Json j;
  j["preset"] = o.preset;
  j["frames"] = o.frames;
  j["width"] = o.width;
  j["height"] = o.height;
  j["seed"] = o.seed;
  j["valid_pixels"] = valid;
  j["corruptions"] = corruptions.size();
  j["out"] = o.out_dir;
  return j;
}

Json cmd_eval_points(const Options& o) {
  const SequenceSample pred = read_sequence(o.pred_dir);
  const SequenceSample gt = read_sequence(o.gt_dir);
  const std::vector<double> taus = parse_thresholds(o.thresholds);
  const PointCloudMetrics m = evaluate_point_clouds(pred, gt, o.voxel, taus);
  Json j;
  j["c_l1"] = m.chamfer;
  for (std::size_t i = 0; i < taus.size(); ++i) j[threshold_key(taus[i])] = m.fscores[i];
  j["alignment_scale"] = m.alignment.scale;
  j["pred_points"] = m.pred_points;
  j["gt_points"] = m.gt_points;
  j["voxel"] = o.voxel;
  return j;
}

Json cmd_eval_depth(const Options& o) {
  DepthAlignment mode;
  if (o.depth_mode == "video") {
    mode = DepthAlignment::Sequence;
  } else if (o.depth_mode == "mono") {
    mode = DepthAlignment::PerFrame;
  } else {
    mode = DepthAlignment::None;
  }
  const DepthMetrics m = depth_rel_delta(read_sequence(o.pred_dir), read_sequence(o.gt_dir), mode);
  Json j;
  j["rel"] = m.rel;
  j["delta"] = m.delta;
  j["pixels"] = m.pixels;
  j["mode"] = o.depth_mode;
  j["scales"] = m.scales;
  return j;
}

Json cmd_eval_pose(const Options& o) {
  const auto pred = read_sequence(o.pred_dir).cameras();
  const auto gt = read_sequence(o.gt_dir).cameras();
  const PoseMetrics m = pose_metrics(pred, gt);
  Json j;
  j["ate"] = m.ate;
  j["rpe_r"] = m.rpe_r;
  j["rpe_t"] = m.rpe_t;
  return j;
}

Json cmd_eval_fov(const Options& o) {
  const auto pred = read_sequence(o.pred_dir).cameras();
  const auto gt = read_sequence(o.gt_dir).cameras();
  Json j;
  j["fov_rel"] = fov_rel(pred, gt);
  return j;
}

Json cmd_loss(const Options& o, bool from_synth) {
  const LossRecipe recipe = resolve_recipe(o.recipe);
  SequenceSample pred, gt;
  if (from_synth) {
    gt = generate_scene(parse_preset(o.synth_preset), o.frames, o.width, o.height, o.seed);
    pred = gt;
  } else {
    if (o.pred_dir.empty() || o.gt_dir.empty()) throw Error("loss needs either --synth or both --pred and --gt");
    pred = read_sequence(o.pred_dir);
    gt = read_sequence(o.gt_dir);
  }
  CompositeOptions opts;
  opts.spheres.seed = o.seed;
  const CompositeReport r = loss_composite(pred, gt, recipe, opts);
  Json components = Json::object();
  Json weights = Json::object();
  Json warnings = Json::array();
  for (std::size_t i = 0; i < r.items.size(); ++i) {
    components[r.items[i].name] = r.items[i].value;
    weights[r.items[i].name] = r.weights[i];
    for (const std::string& w : r.items[i].warnings) warnings.push_back(r.items[i].name + ": " + w);
  }
  Json j;
  j["recipe"] = recipe.name;
  j["total"] = r.total;
  j["sequence_scale"] = r.sequence_scale;
  j["components"] = std::move(components);
  j["weights"] = std::move(weights);
  j["warnings"] = std::move(warnings);
  return j;
}

Json cmd_gradcheck(const Options& o) {
  std::vector<std::string> losses;
  if (o.grad_loss == "all") {
    losses = gradcheck_losses();
  } else {
    losses = {o.grad_loss};
  }
  Json per_loss = Json::object();
  double worst = 0.0;
  for (const std::string& name : losses) {
    double max_err = 0.0;
    std::size_t coords = 0;
    int resamples = 0;
    for (std::size_t k = 0; k < o.grad_seeds; ++k) {
      const GradcheckResult r = gradcheck(name, o.seed + k, o.epsilon);
      max_err = std::max(max_err, r.max_rel_error);
      coords += r.coordinates;
      resamples += r.resamples;
    }
    Json e;
    e["max_rel_error"] = max_err;
    e["coordinates"] = coords;
    e["resamples"] = resamples;
    per_loss[name] = std::move(e);
    worst = std::max(worst, max_err);
  }
  Json j;
  j["seeds"] = o.grad_seeds;
  j["epsilon"] = o.epsilon;
  j["tolerance"] = kGradcheckTolerance;
  j["max_rel_error"] = worst;
  j["passed"] = worst <= kGradcheckTolerance;
  j["losses"] = std::move(per_loss);
  return j;
}

Json cmd_fusion_check(const Options& o) {
  double identity_diff = 0.0;
  double row_sum_err = 0.0;
  double min_sensitivity = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < o.instances; ++k) {
    const std::uint64_t s = o.seed + 3 * k;
    const TokenGrid low = random_tokens(o.frames, o.tokens, o.channels, s);
    const TokenGrid high = random_tokens(o.frames, 4 * o.tokens, o.channels, s + 1);
    const FusionBlock block = FusionBlock::random(o.channels, o.heads, s + 2);
    FusionTrace trace;
    const TokenGrid fused = cross_attend_fuse(low, high, block, &trace);
    for (std::size_t i = 0; i < low.values.size(); ++i) {
      identity_diff = std::max(identity_diff, std::abs(fused.values[i] - low.values[i]));
    }
    for (const auto& a : trace.attention) {
      for (Eigen::Index r = 0; r < a.rows(); ++r) row_sum_err = std::max(row_sum_err, std::abs(a.row(r).sum() - 1.0));
    }
    min_sensitivity = std::min(min_sensitivity, std::abs(gate_sensitivity(low, high, block, squared_norm_probe)));
  }
  Json j;
  j["instances"] = o.instances;
  j["identity_max_abs_diff"] = identity_diff;
  j["softmax_row_sum_max_error"] = row_sum_err;
  j["min_abs_gate_sensitivity"] = min_sensitivity;
  j["passed"] = identity_diff == 0.0 && min_sensitivity > 0.0;
  return j;
}

Json cmd_cost(const Options& o) {
  const CostProfile p = reference_profile(o.arch);
  Json j;
  j["arch"] = o.arch;
  j["frames"] = o.cost_frames;
  j["per_frame_tflops"] = p.per_frame_tflops;
  j["tflops"] = predict_tflops(p, o.cost_frames);
  return j;
}

Json cmd_rank(const Options& o) {
  const MetricTable t = parse_table(read_text(o.table));
  const std::vector<double> ranks = rank_aggregate(t);
  Json r = Json::object();
  for (std::size_t i = 0; i < t.methods.size(); ++i) r[t.methods[i]] = ranks[i];
  Json j;
  j["ranks"] = std::move(r);
  return j;
}

void add_pred_gt(CLI::App* cmd, Options& o, bool required) {
  auto* p = cmd->add_option("--pred", o.pred_dir, "Predicted sequence directory");
  auto* g = cmd->add_option("--gt", o.gt_dir, "Ground-truth sequence directory");
  if (required) {
    p->required();
    g->required();
  }
}

}  // namespace

int run_command(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  Options o;
  try {
    o.seed = default_seed();
  } catch (const Error& e) {
    out << detail::dump_json(Json{{"error", e.what()}}) << "\n";
    return 1;
  }

  CLI::App app{"Geometry losses, alignment and evaluation toolkit", "geomcarve"};
  app.require_subcommand(1);
  std::function<Json()> action;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic oracle sequence");
  synth->add_option("--preset", o.preset, "plane | box-room | sphere-field")->capture_default_str();
  synth->add_option("--frames", o.frames)->capture_default_str()->check(CLI::PositiveNumber);
  synth->add_option("--width", o.width)->capture_default_str();
  synth->add_option("--height", o.height)->capture_default_str();
  synth->add_option("--seed", o.seed, "Default 2025 or GEOMCARVE_SEED");
  synth->add_option("--out", o.out_dir, "Output directory")->required();
  synth->add_flag("--force", o.force, "Overwrite an existing sequence");
  synth->add_option("--global-scale", o.global_scale, "Multiply depth, points and translations");
  synth->add_option("--affine-drift", o.affine_drift, "Random per-frame scale/shift magnitude");
  synth->add_option("--noise", o.noise, "Gaussian noise sigma on depth and points");
  synth->add_option("--pose-jitter", o.pose_jitter_deg, "Rotation jitter in degrees");
  synth->add_option("--fov-bias", o.fov_bias, "Multiply field-of-view angles");
  synth->callback([&] { action = [&] { return cmd_synth(o); }; });

  auto* eval = app.add_subcommand("eval", "Evaluate a prediction against ground truth");
  eval->require_subcommand(1);
  auto* points = eval->add_subcommand("points", "Chamfer-L1 and F-score");
  add_pred_gt(points, o, true);
  points->add_option("--voxel", o.voxel, "Voxel size in meters")->capture_default_str();
  points->add_option("--thresholds", o.thresholds, "Comma-separated F-score thresholds")->capture_default_str();
  points->callback([&] { action = [&] { return cmd_eval_points(o); }; });
  auto* depth = eval->add_subcommand("depth", "Abs-rel and delta < 1.25");
  add_pred_gt(depth, o, true);
  depth->add_option("--mode", o.depth_mode, "video (one scale) | mono (per frame) | none")
      ->check(CLI::IsMember({"video", "mono", "none"}))
      ->capture_default_str();
  depth->callback([&] { action = [&] { return cmd_eval_depth(o); }; });
  auto* pose = eval->add_subcommand("pose", "ATE, RPE-R, RPE-T");
  add_pred_gt(pose, o, true);
  pose->callback([&] { action = [&] { return cmd_eval_pose(o); }; });
  auto* fov = eval->add_subcommand("fov", "Relative field-of-view error");
  add_pred_gt(fov, o, true);
  fov->callback([&] { action = [&] { return cmd_eval_fov(o); }; });

  auto* loss = app.add_subcommand("loss", "Evaluate a training loss recipe");
  loss->add_option("--recipe", o.recipe, "vggt | ours | path to a recipe JSON file")->capture_default_str();
  add_pred_gt(loss, o, false);
  auto* synth_opt = loss->add_option("--synth", o.synth_preset, "Score a perfect in-memory synthetic scene");
  loss->add_option("--frames", o.frames)->capture_default_str()->check(CLI::PositiveNumber);
  loss->add_option("--width", o.width)->capture_default_str();
  loss->add_option("--height", o.height)->capture_default_str();
  loss->add_option("--seed", o.seed);
  loss->callback([&] {
    const bool from_synth = synth_opt->count() > 0;
    action = [&o, from_synth] { return cmd_loss(o, from_synth); };
  });

  auto* grad = app.add_subcommand("gradcheck", "Analytic vs finite-difference gradients");
  grad->add_option("--loss", o.grad_loss, "all | reg | sg | tg | conf | consis | cam")->capture_default_str();
  grad->add_option("--seeds", o.grad_seeds, "Instances per loss")->capture_default_str();
  grad->add_option("--seed", o.seed, "First seed");
  grad->add_option("--epsilon", o.epsilon, "Finite-difference step")->capture_default_str();
  grad->callback([&] { action = [&] { return cmd_gradcheck(o); }; });

  auto* fusion = app.add_subcommand("fusion-check", "Gated cross-attention identity and sensitivity checks");
  fusion->add_option("--instances", o.instances)->capture_default_str();
  fusion->add_option("--frames", o.frames)->capture_default_str()->check(CLI::PositiveNumber);
  fusion->add_option("--tokens", o.tokens, "Low-resolution tokens per frame")->capture_default_str();
  fusion->add_option("--channels", o.channels)->capture_default_str();
  fusion->add_option("--heads", o.heads)->capture_default_str();
  fusion->add_option("--seed", o.seed);
  fusion->callback([&] { action = [&] { return cmd_fusion_check(o); }; });

  auto* cost = app.add_subcommand("cost", "Predicted inference TFLOPs");
  cost->add_option("--arch", o.arch, "vggt518 | vggt1036 | carve1036")->required();
  cost->add_option("--frames", o.cost_frames)->capture_default_str();
  cost->callback([&] { action = [&] { return cmd_cost(o); }; });

  auto* rank = app.add_subcommand("rank", "Average per-metric rank of methods");
  rank->add_option("--table", o.table, "Metric table JSON file")->required();
  rank->callback([&] { action = [&] { return cmd_rank(o); }; });

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    out << detail::dump_json(action()) << "\n";
    return 0;
  } catch (const std::exception& e) {
    out << detail::dump_json(Json{{"error", e.what()}}) << "\n";
    return 1;
  }
}

}  // namespace geomcarve
