// mondepth: scale-invariant monocular depth toolkit.
//
// Subcommands operate on PFM depth/disparity grids, PNG images and masks,
// and binary checkpoints. Every command prints one JSON report to stdout;
// reports are deterministic given identical inputs and seeds.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mondepth/align.hpp"
#include "mondepth/checkpoint.hpp"
#include "mondepth/errors.hpp"
#include "mondepth/geometry.hpp"
#include "mondepth/io.hpp"
#include "mondepth/losses.hpp"
#include "mondepth/metrics.hpp"
#include "mondepth/pipeline.hpp"
#include "mondepth/synth.hpp"
#include "mondepth/toy_model.hpp"
#include "mondepth/version.hpp"

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;
using namespace mondepth;

namespace {

uint64_t env_seed_default() {
  const char* s = std::getenv("MONDEPTH_SEED");
  return s ? std::strtoull(s, nullptr, 10) : 0;
}

ojson metric_variants() {
  return ojson{
      {"ord", "ratio classification at tau=1.03 over sampled pixel pairs"},
      {"d3r", "grid-cell variant: per-cell valid-pixel medians on a 24x24 grid, "
              "4-adjacent pairs flagged above 10% of the gt range"},
      {"dbe", "top-5% log-depth gradient edges, symmetric chamfer truncated at 10 px"},
      {"resolution", "edge-density proxy: top-decile gradient magnitude, distance transform"},
  };
}

ojson base_report(const std::string& command, ojson config, ojson seeds) {
  ojson rep;
  rep["tool_version"] = kToolVersion;
  rep["command"] = command;
  rep["config"] = std::move(config);
  rep["metric_variants"] = metric_variants();
  rep["seeds"] = std::move(seeds);
  return rep;
}

void emit(const ojson& rep, const std::string& out_path = "") {
  std::string text = rep.dump(2);
  std::cout << text << "\n";
  if (!out_path.empty()) {
    std::ofstream os(out_path);
    if (!os) throw io_error("cannot write report: " + out_path);
    os << text << "\n";
  }
}

ojson grid_stats(const ScalarGrid& g, const ValidMask* mask = nullptr) {
  double lo = 1e300, hi = -1e300, sum = 0.0;
  long n = 0;
  for (size_t i = 0; i < g.size(); ++i) {
    if (mask && !mask->flags[i]) continue;
    lo = std::min(lo, g.data[i]);
    hi = std::max(hi, g.data[i]);
    sum += g.data[i];
    ++n;
  }
  if (n == 0) return ojson{{"count", 0}};
  return ojson{{"count", n}, {"min", lo}, {"max", hi}, {"mean", sum / double(n)}};
}

CameraIntrinsics parse_intrinsics(const std::string& text, int w, int h) {
  if (text.empty()) return CameraIntrinsics::default_for(w, h);
  CameraIntrinsics k{};
  if (std::sscanf(text.c_str(), "%lf,%lf,%lf,%lf", &k.fx, &k.fy, &k.cx, &k.cy) != 4)
    throw invalid_input("intrinsics must be fx,fy,cx,cy");
  if (!(k.fx > 0.0) || !(k.fy > 0.0)) throw invalid_input("intrinsics: focal must be positive");
  return k;
}

ValidMask load_mask_or_full(const std::string& path, int w, int h) {
  if (path.empty()) return ValidMask(w, h, true);
  ValidMask m = read_png_mask(path);
  if (m.width != w || m.height != h) throw invalid_input("mask dimensions do not match the grid");
  return m;
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthArgs {
  uint64_t seed = 0;
  int width = 64, height = 64, primitives = 3;
  double noise = 0.0, focal = 0.0, tilt = 0.25;
  std::string kinds = "plane,sphere,box";
  std::string out_dir;
  std::string corrupt = "none";
  double corrupt_sigma = 1.0, corrupt_a = 1.0, corrupt_b = 0.0;
  uint64_t corrupt_seed = 0;
  std::string report_out;
};

int run_synth(const SynthArgs& a) {
  SceneSpec spec;
  spec.seed = a.seed;
  spec.width = a.width;
  spec.height = a.height;
  spec.primitive_count = a.primitives;
  spec.noise_sigma = a.noise;
  spec.focal = a.focal;
  spec.plane_tilt_max = a.tilt;
  spec.kinds.clear();
  {
    std::stringstream ss(a.kinds);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      if (tok == "plane") spec.kinds.push_back(PrimitiveKind::Plane);
      else if (tok == "sphere") spec.kinds.push_back(PrimitiveKind::Sphere);
      else if (tok == "box") spec.kinds.push_back(PrimitiveKind::Box);
      else throw invalid_input("unknown primitive kind: " + tok);
    }
  }
  RenderedScene scene = render_scene(spec);
  fs::create_directories(a.out_dir);
  auto p = [&](const char* name) { return (fs::path(a.out_dir) / name).string(); };
  write_pfm(p("depth.pfm"), scene.depth);
  write_pfm_normals(p("normals.pfm"), scene.normals);
  write_png_rgb(p("rgb.png"), scene.rgb);
  write_png_mask(p("mask.png"), scene.mask);

  ojson meta;
  meta["intrinsics"] = {scene.intrinsics.fx, scene.intrinsics.fy, scene.intrinsics.cx,
                        scene.intrinsics.cy};
  meta["near"] = spec.near;
  meta["far"] = spec.far;
  meta["primitives"] = spec.primitive_count;
  {
    std::ofstream os(p("meta.json"));
    os << meta.dump(2) << "\n";
  }

  ojson config{{"width", a.width},   {"height", a.height}, {"primitives", a.primitives},
               {"noise", a.noise},   {"focal", a.focal},   {"kinds", a.kinds},
               {"out_dir", a.out_dir}};
  if (a.corrupt != "none") {
    CorruptParams cp;
    cp.sigma = a.corrupt_sigma;
    cp.a = a.corrupt_a;
    cp.b = a.corrupt_b;
    cp.seed = a.corrupt_seed;
    CorruptKind kind = a.corrupt == "blur"    ? CorruptKind::Blur
                       : a.corrupt == "noise" ? CorruptKind::Noise
                       : a.corrupt == "affine"
                           ? CorruptKind::Affine
                           : throw invalid_input("corrupt must be blur|noise|affine");
    write_pfm(p("corrupted.pfm"), corrupt(scene.depth, kind, cp));
    config["corrupt"] = a.corrupt;
  }
  ojson rep = base_report("synth", config, ojson{{"seed", a.seed}, {"corrupt_seed", a.corrupt_seed}});
  rep["depth"] = grid_stats(scene.depth, &scene.mask);
  rep["valid_pixels"] = scene.mask.count_valid();
  emit(rep, a.report_out);
  return 0;
}

// ---------------------------------------------------------------------------
// loss
// ---------------------------------------------------------------------------

struct LossArgs {
  std::string name = "ssi";
  std::string pred, gt, mask, gt_normals, intrinsics;
  int pairs = 2500;
  double delta = 0.01;
  uint64_t seed = 0;
  int scales = 4;
  std::string stencil = "central";
  std::string report_out;
};

int run_loss(const LossArgs& a) {
  ScalarGrid pred = read_pfm(a.pred);
  ValidMask mask = load_mask_or_full(a.mask, pred.width, pred.height);
  StencilKind stencil = a.stencil == "sobel" ? StencilKind::Sobel : StencilKind::Central;
  PairSampleConfig pc;
  pc.pair_count = a.pairs;
  pc.seed = a.seed;
  pc.delta = a.delta;
  LossWeights weights;

  LossReport r;
  if (a.name == "normals" || a.name == "ng") {
    if (a.gt_normals.empty()) throw invalid_input("loss " + a.name + " needs --gt-normals");
    NormalGrid gtn = read_pfm_normals(a.gt_normals);
    CameraIntrinsics K = parse_intrinsics(a.intrinsics, pred.width, pred.height);
    r = a.name == "normals" ? normals_cosine_loss(pred, gtn, K, mask, stencil)
                            : normals_gradient_loss(pred, gtn, K, mask, a.scales, stencil);
  } else if (a.name == "si-net") {
    if (a.gt.empty() || a.gt_normals.empty())
      throw invalid_input("loss si-net needs --gt and --gt-normals");
    ScalarGrid gt = read_pfm(a.gt);
    NormalGrid gtn = read_pfm_normals(a.gt_normals);
    CameraIntrinsics K = parse_intrinsics(a.intrinsics, pred.width, pred.height);
    SiNetOptions opt;
    opt.gradient_scales = a.scales;
    opt.normal_scales = a.scales;
    opt.stencil = stencil;
    r = si_net_loss(pred, gt, gtn, K, mask, weights, opt);
  } else {
    if (a.gt.empty()) throw invalid_input("loss " + a.name + " needs --gt");
    ScalarGrid gt = read_pfm(a.gt);
    if (a.name == "ssi") r = ssi_loss(pred, gt, mask);
    else if (a.name == "so") r = sparse_ordinal_loss(pred, gt, mask, pc);
    else if (a.name == "ranking") r = ranking_loss(pred, gt, mask, pc);
    else if (a.name == "ssig") r = multiscale_gradient_loss(pred, gt, mask, a.scales);
    else if (a.name == "l1") r = l1_depth_loss(pred, gt, mask);
    else if (a.name == "ssi-net") {
      SsiNetOptions opt;
      opt.ssig_scales = a.scales;
      r = ssi_net_loss(pred, gt, mask, weights, pc, opt);
    } else {
      throw invalid_input("unknown loss: " + a.name);
    }
  }

  ojson config{{"name", a.name},   {"pred", a.pred},     {"gt", a.gt},
               {"mask", a.mask},   {"pairs", a.pairs},   {"delta", a.delta},
               {"scales", a.scales}, {"stencil", a.stencil}};
  ojson rep = base_report("loss", config, ojson{{"seed", a.seed}});
  rep["value"] = r.value;
  rep["components"] = r.components;
  rep["grad"] = grid_stats(r.grad, &mask);
  emit(rep, a.report_out);
  return 0;
}

// ---------------------------------------------------------------------------
// align
// ---------------------------------------------------------------------------

struct AlignArgs {
  std::string pred, target, mask, mode = "affine", out, report_out;
  bool clamp = false;
};

int run_align(const AlignArgs& a) {
  ScalarGrid pred = read_pfm(a.pred);
  ScalarGrid target = read_pfm(a.target);
  ValidMask mask = load_mask_or_full(a.mask, pred.width, pred.height);
  ojson config{{"pred", a.pred}, {"target", a.target}, {"mask", a.mask},
               {"mode", a.mode}, {"clamp", a.clamp}};
  ojson rep = base_report("align", config, ojson::object());
  if (a.mode == "affine") {
    AffineFit fit = fit_scale_shift(pred, target, mask);
    rep["a"] = fit.a;
    rep["b"] = fit.b;
    rep["residual_sse"] = fit.residual_sse;
    rep["clamped"] = fit.clamped;
    if (!a.out.empty()) write_pfm(a.out, apply_affine(pred, fit));
  } else if (a.mode == "scale") {
    // Here `target` is rescaled toward `pred` (the reference signal).
    double c = fit_scale_only(pred, target, mask, a.clamp);
    rep["c"] = c;
    if (!a.out.empty()) {
      ScalarGrid out = target;
      for (double& v : out.data) v *= c;
      write_pfm(a.out, out);
    }
  } else {
    throw invalid_input("align mode must be affine|scale");
  }
  emit(rep, a.report_out);
  return 0;
}

// ---------------------------------------------------------------------------
// normals / project
// ---------------------------------------------------------------------------

struct NormalsArgs {
  std::string depth, mask, intrinsics, stencil = "central", out, out_mask, report_out;
};

int run_normals(const NormalsArgs& a) {
  ScalarGrid depth = read_pfm(a.depth);
  ValidMask mask = load_mask_or_full(a.mask, depth.width, depth.height);
  CameraIntrinsics K = parse_intrinsics(a.intrinsics, depth.width, depth.height);
  StencilKind stencil = a.stencil == "sobel" ? StencilKind::Sobel : StencilKind::Central;
  NormalsResult res = normals_from_depth(depth, K, mask, stencil);
  if (!a.out.empty()) write_pfm_normals(a.out, res.normals);
  if (!a.out_mask.empty()) write_png_mask(a.out_mask, res.valid);
  ojson config{{"depth", a.depth}, {"mask", a.mask}, {"stencil", a.stencil},
               {"intrinsics", {K.fx, K.fy, K.cx, K.cy}}};
  ojson rep = base_report("normals", config, ojson::object());
  rep["valid"] = res.valid.count_valid();
  emit(rep, a.report_out);
  return 0;
}

struct ProjectArgs {
  std::string depth, mask, intrinsics, rgb, out, report_out;
};

int run_project(const ProjectArgs& a) {
  ScalarGrid depth = read_pfm(a.depth);
  ValidMask mask = load_mask_or_full(a.mask, depth.width, depth.height);
  CameraIntrinsics K = parse_intrinsics(a.intrinsics, depth.width, depth.height);
  PointCloud cloud;
  if (!a.rgb.empty()) {
    ImageGrid rgb = read_png_rgb(a.rgb);
    cloud = point_cloud_from_depth(depth, K, mask, &rgb);
  } else {
    cloud = point_cloud_from_depth(depth, K, mask, nullptr);
  }
  if (!a.out.empty()) write_ply(a.out, cloud);
  ojson config{{"depth", a.depth}, {"rgb", a.rgb}, {"out", a.out},
               {"intrinsics", {K.fx, K.fy, K.cx, K.cy}}};
  ojson rep = base_report("project", config, ojson::object());
  rep["points"] = cloud.points.size();
  emit(rep, a.report_out);
  return 0;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

struct EvaluateArgs {
  std::string pred, gt, mask, gt_normals, intrinsics, manifest;
  std::string mode = "ssi";
  uint64_t seed = 0;
  std::string report_out;
};

ojson eval_report_to_json(const EvalReport& er) {
  ojson j;
  j["mode"] = er.mode == EvalMode::SSI ? "ssi" : "si";
  j["align"] = ojson{{"a", er.align_a}, {"b", er.align_b}, {"c", er.align_c},
                     {"clamped", er.align_clamped}};
  j["metrics"] = ojson::object();
  for (const auto& [k, v] : er.metrics) j["metrics"][k] = v;
  j["flags"] = ojson::object();
  for (const auto& [k, v] : er.flags) j["flags"][k] = v;
  return j;
}

struct ManifestItem {
  std::string pred, gt, mask, gt_normals, intrinsics;
};

std::vector<ManifestItem> read_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw io_error("manifest: cannot open " + path);
  ojson root;
  try {
    root = ojson::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw io_error(std::string("manifest: invalid JSON: ") + e.what());
  }
  if (!root.is_array()) throw invalid_input("manifest: top level must be a JSON array");
  fs::path base = fs::path(path).parent_path();
  auto resolve = [&](const std::string& p) {
    if (p.empty() || fs::path(p).is_absolute()) return p;
    return (base / p).string();
  };
  std::vector<ManifestItem> items;
  for (size_t i = 0; i < root.size(); ++i) {
    const ojson& e = root[i];
    std::string where = "manifest entry " + std::to_string(i);
    if (!e.is_object() || !e.contains("pred") || !e.contains("gt"))
      throw invalid_input(where + ": needs pred and gt");
    ManifestItem item;
    item.pred = resolve(e["pred"].get<std::string>());
    item.gt = resolve(e["gt"].get<std::string>());
    if (e.contains("mask")) item.mask = resolve(e["mask"].get<std::string>());
    if (e.contains("gt_normals")) item.gt_normals = resolve(e["gt_normals"].get<std::string>());
    if (e.contains("intrinsics")) item.intrinsics = e["intrinsics"].get<std::string>();
    for (const std::string* f : {&item.pred, &item.gt}) {
      if (!fs::exists(*f)) throw io_error(where + ": missing file " + *f);
    }
    items.push_back(std::move(item));
  }
  return items;
}

ojson evaluate_one(const ManifestItem& item, EvalMode mode, uint64_t seed) {
  ScalarGrid pred = read_pfm(item.pred);
  ScalarGrid gt = read_pfm(item.gt);
  ValidMask mask = load_mask_or_full(item.mask, pred.width, pred.height);
  MetricConfig mc;
  mc.ord_seed = seed;
  EvalReport er;
  if (!item.gt_normals.empty()) {
    NormalGrid gtn = read_pfm_normals(item.gt_normals);
    CameraIntrinsics K = parse_intrinsics(item.intrinsics, pred.width, pred.height);
    er = evaluate_all(pred, gt, &gtn, &K, mask, mode, mc);
  } else {
    er = evaluate_all(pred, gt, nullptr, nullptr, mask, mode, mc);
  }
  return eval_report_to_json(er);
}

int run_evaluate(const EvaluateArgs& a) {
  EvalMode mode = a.mode == "si" ? EvalMode::SI : EvalMode::SSI;
  if (a.mode != "si" && a.mode != "ssi") throw invalid_input("mode must be ssi|si");
  ojson config{{"mode", a.mode}, {"pred", a.pred}, {"gt", a.gt},
               {"manifest", a.manifest}};
  ojson rep = base_report("evaluate", config, ojson{{"seed", a.seed}});
  if (!a.manifest.empty()) {
    std::vector<ManifestItem> items = read_manifest(a.manifest);
    rep["per_image"] = ojson::array();
    std::map<std::string, double> sums;
    std::map<std::string, int> counts;
    for (size_t i = 0; i < items.size(); ++i) {
      ojson one = evaluate_one(items[i], mode, a.seed);
      one["pred"] = items[i].pred;
      rep["per_image"].push_back(one);
      for (auto& [k, v] : one["metrics"].items()) {
        sums[k] += v.get<double>();
        counts[k] += 1;
      }
    }
    rep["aggregate"] = ojson::object();
    for (const auto& [k, s] : sums) rep["aggregate"][k] = s / counts[k];
    rep["images"] = items.size();
  } else {
    if (a.pred.empty() || a.gt.empty())
      throw invalid_input("evaluate needs --pred and --gt (or --manifest)");
    ManifestItem item{a.pred, a.gt, a.mask, a.gt_normals, a.intrinsics};
    ojson one = evaluate_one(item, mode, a.seed);
    rep.update(one);
  }
  emit(rep, a.report_out);
  return 0;
}

// ---------------------------------------------------------------------------
// train-toy / ablate
// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string recipe = "ssi_so";
  int epochs = 30, scenes = 32, size = 64;
  uint64_t seed = 7;
  double lr = 1e-3;
  int pairs = 70;
  bool rgb_only = false;
  std::string out_dir;
  std::string report_out;
};

Recipe parse_recipe(const std::string& name) {
  if (name == "ssi") return Recipe::Ssi;
  if (name == "ranking") return Recipe::Ranking;
  if (name == "ssi_ranking") return Recipe::SsiRanking;
  if (name == "ssi_so") return Recipe::SsiSo;
  if (name == "si") return Recipe::Si;
  throw invalid_input("unknown recipe: " + name);
}

std::vector<TrainSample> build_dataset(Recipe recipe, int scenes, int size, uint64_t seed,
                                       bool rgb_only_si = false) {
  std::vector<RenderedScene> rendered = make_benchmark_scenes(scenes, seed, size);
  std::vector<TrainSample> ds;
  ds.reserve(rendered.size());
  for (size_t i = 0; i < rendered.size(); ++i) {
    if (recipe == Recipe::Si)
      ds.push_back(make_si_sample(rendered[i], mix_seed(seed, i, 0x5a), rgb_only_si));
    else
      ds.push_back(make_ssi_sample(rendered[i]));
  }
  return ds;
}

// Evaluation scenes come from a disjoint seed stream so the per-epoch metrics
// are measured on content the optimizer never saw.
std::vector<TrainSample> build_eval_dataset(Recipe recipe, int scenes, int size, uint64_t seed,
                                            bool rgb_only_si = false) {
  return build_dataset(recipe, scenes, size, mix_seed(seed, 0xe5a1), rgb_only_si);
}

ojson log_to_json(const TrainResult& res) {
  ojson rows = ojson::array();
  for (const EpochLog& row : res.log)
    rows.push_back(ojson{{"epoch", row.epoch},
                         {"train_loss", row.train_loss},
                         {"ord", row.ord},
                         {"d3r", row.d3r},
                         {"abs_rel", row.abs_rel}});
  return rows;
}

int run_train_toy(const TrainArgs& a) {
  Recipe recipe = parse_recipe(a.recipe);
  if (a.rgb_only && recipe != Recipe::Si)
    throw invalid_input("--rgb-only applies to the si recipe only");
  std::vector<TrainSample> ds = build_dataset(recipe, a.scenes, a.size, a.seed, a.rgb_only);
  std::vector<TrainSample> eval_ds =
      build_eval_dataset(recipe, a.scenes, a.size, a.seed, a.rgb_only);
  int in_ch = recipe == Recipe::Si && !a.rgb_only ? 5 : 3;
  ToyNet net = make_toy_net(in_ch, {16, 16, 16, 1}, a.seed);
  TrainConfig cfg;
  cfg.recipe = recipe;
  cfg.epochs = a.epochs;
  cfg.seed = a.seed;
  cfg.lr = a.lr;
  cfg.pair_count = a.pairs;
  TrainResult res = train(net, ds, eval_ds, cfg);

  ojson config{{"recipe", a.recipe}, {"epochs", a.epochs}, {"scenes", a.scenes},
               {"size", a.size},     {"lr", a.lr},         {"pairs", a.pairs},
               {"rgb_only", a.rgb_only},
               {"architecture", "toy 4-layer 3x3 conv net (stand-in, not the paper-scale backbone)"}};
  ojson rep = base_report("train-toy", config, ojson{{"seed", a.seed}});
  rep["diverged"] = res.diverged;
  rep["log"] = log_to_json(res);
  rep["pair_instrumentation"] = ojson{
      {"correct_pairs", res.correct_pairs},
      {"correct_pairs_nonzero_grad", res.correct_pairs_nonzero_grad},
      {"max_correct_pair_grad", res.max_correct_pair_grad}};
  if (!a.out_dir.empty()) {
    fs::create_directories(a.out_dir);
    std::string ckpt_path = (fs::path(a.out_dir) / "checkpoint.ckpt").string();
    Checkpoint ckpt = checkpoint_from_net(
        res.net, ojson{{"recipe", a.recipe}, {"epochs", a.epochs}, {"seed", a.seed},
                       {"scenes", a.scenes}, {"size", a.size}});
    write_checkpoint(ckpt_path, ckpt);
    rep["checkpoint"] = ckpt_path;
    std::ofstream os((fs::path(a.out_dir) / "log.json").string());
    os << rep["log"].dump(2) << "\n";
  }
  emit(rep, a.report_out);
  return res.diverged ? 1 : 0;
}

struct AblateArgs {
  int epochs = 30, scenes = 32, size = 64;
  uint64_t seed = 7;
  std::string out_dir;
  std::string report_out;
};

int run_ablate(const AblateArgs& a) {
  const std::vector<Recipe> recipes = {Recipe::Ssi, Recipe::Ranking, Recipe::SsiRanking,
                                       Recipe::SsiSo};
  std::vector<TrainSample> ds = build_dataset(Recipe::Ssi, a.scenes, a.size, a.seed);
  std::vector<TrainSample> eval_ds = build_eval_dataset(Recipe::Ssi, a.scenes, a.size, a.seed);
  ojson rows = ojson::array();
  std::map<std::string, EpochLog> finals;
  for (Recipe recipe : recipes) {
    ToyNet net = make_toy_net(3, {16, 16, 16, 1}, a.seed);
    TrainConfig cfg;
    cfg.recipe = recipe;
    cfg.epochs = a.epochs;
    cfg.seed = a.seed;
    TrainResult res = train(net, ds, eval_ds, cfg);
    if (res.diverged || res.log.empty())
      throw training_aborted(std::string("ablate: recipe diverged: ") + recipe_name(recipe));
    const EpochLog& last = res.log.back();
    rows.push_back(ojson{{"recipe", recipe_name(recipe)},
                         {"ord", last.ord},
                         {"d3r", last.d3r},
                         {"abs_rel", last.abs_rel},
                         {"train_loss", last.train_loss},
                         {"correct_pairs", res.correct_pairs},
                         {"correct_pairs_nonzero_grad", res.correct_pairs_nonzero_grad}});
    finals[recipe_name(recipe)] = last;
  }
  ojson config{{"epochs", a.epochs}, {"scenes", a.scenes}, {"size", a.size},
               {"architecture", "toy 4-layer 3x3 conv net (stand-in, not the paper-scale backbone)"}};
  ojson rep = base_report("ablate", config, ojson{{"seed", a.seed}});
  rep["rows"] = rows;
  rep["directions"] = ojson{
      {"ranking_hurts_ord", finals["ssi_ranking"].ord >= finals["ssi"].ord},
      {"so_helps_d3r", finals["ssi_so"].d3r <= finals["ssi"].d3r}};
  if (!a.out_dir.empty()) {
    fs::create_directories(a.out_dir);
    std::ofstream os((fs::path(a.out_dir) / "ablation.csv").string());
    os << "recipe,ord,d3r,abs_rel,train_loss\n";
    for (const auto& row : rows)
      os << row["recipe"].get<std::string>() << "," << row["ord"].get<double>() << ","
         << row["d3r"].get<double>() << "," << row["abs_rel"].get<double>() << ","
         << row["train_loss"].get<double>() << "\n";
    std::ofstream js((fs::path(a.out_dir) / "ablation.json").string());
    js << rep.dump(2) << "\n";
  }
  emit(rep, a.report_out);
  return 0;
}

// ---------------------------------------------------------------------------
// infer
// ---------------------------------------------------------------------------

struct InferArgs {
  std::string rgb, ssi_low, ssi_high, ssi_ckpt, si_ckpt, intrinsics;
  double receptive_field = 64.0, max_factor = 3.0;
  std::string down_filter = "bilinear";
  std::string out_depth, out_ply, out_normals, out_disparity;
  std::string report_out;
};

int run_infer(const InferArgs& a) {
  ImageGrid rgb = read_png_rgb(a.rgb);
  CameraIntrinsics K = parse_intrinsics(a.intrinsics, rgb.width, rgb.height);
  Checkpoint si_ck = read_checkpoint(a.si_ckpt);
  ToyNet si_net = net_from_checkpoint(si_ck);
  if (si_net.input_channels() != 5)
    throw invalid_input("si checkpoint takes " + std::to_string(si_net.input_channels()) +
                        " channels; the second stage needs 5");
  ScalarGrid low_grid, high_grid;
  ToyNet ssi_net;
  SsiSource src;
  if (!a.ssi_low.empty() || !a.ssi_high.empty()) {
    if (a.ssi_low.empty() || a.ssi_high.empty())
      throw invalid_input("provide both --ssi-low and --ssi-high, or neither");
    low_grid = read_pfm(a.ssi_low);
    high_grid = read_pfm(a.ssi_high);
    src.low = &low_grid;
    src.high = &high_grid;
  } else if (!a.ssi_ckpt.empty()) {
    Checkpoint ssi_ck = read_checkpoint(a.ssi_ckpt);
    ssi_net = net_from_checkpoint(ssi_ck);
    if (ssi_net.input_channels() != 3)
      throw invalid_input("ssi checkpoint takes " + std::to_string(ssi_net.input_channels()) +
                          " channels; the first stage needs 3");
    src.net = &ssi_net;
  } else {
    throw invalid_input("need --ssi-low/--ssi-high or --ssi-ckpt");
  }
  DownFilter filter = a.down_filter == "area" ? DownFilter::Area : DownFilter::Bilinear;
  TwoStageResult res = run_two_stage(rgb, src, si_net, K, a.receptive_field, a.max_factor, filter);
  if (!a.out_depth.empty()) write_pfm(a.out_depth, res.depth);
  if (!a.out_disparity.empty()) write_pfm(a.out_disparity, res.disparity);
  if (!a.out_normals.empty()) write_pfm_normals(a.out_normals, res.normals.normals);
  if (!a.out_ply.empty()) write_ply(a.out_ply, res.cloud);
  ojson config{{"rgb", a.rgb},
               {"ssi_low", a.ssi_low},
               {"ssi_high", a.ssi_high},
               {"ssi_ckpt", a.ssi_ckpt},
               {"si_ckpt", a.si_ckpt},
               {"receptive_field", a.receptive_field},
               {"max_factor", a.max_factor},
               {"down_filter", a.down_filter}};
  ojson rep = base_report("infer", config, ojson::object());
  rep["target_resolution"] = ojson{{"width", res.target.width},
                                   {"height", res.target.height},
                                   {"scale", res.target.scale},
                                   {"edgeless", res.target.edgeless}};
  rep["high_alignment"] = ojson{{"a", res.high_alignment.a}, {"b", res.high_alignment.b}};
  rep["depth"] = grid_stats(res.depth);
  emit(rep, a.report_out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"scale-invariant monocular depth toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));
  int threads = 1;
  app.add_option("--threads", threads, "parallelism cap (all current paths are single-threaded)")
      ->check(CLI::PositiveNumber);
  uint64_t seed_default = env_seed_default();

  SynthArgs sy;
  sy.seed = seed_default;
  auto* synth = app.add_subcommand("synth", "render a procedural scene with ground truth");
  synth->add_option("--seed", sy.seed, "scene seed");
  synth->add_option("--width", sy.width, "image width")->check(CLI::Range(2, 4096));
  synth->add_option("--height", sy.height, "image height")->check(CLI::Range(2, 4096));
  synth->add_option("--primitives", sy.primitives, "foreground primitive count")
      ->check(CLI::Range(0, 64));
  synth->add_option("--noise", sy.noise, "additive depth noise sigma");
  synth->add_option("--focal", sy.focal, "focal length in pixels (0 = default)");
  synth->add_option("--tilt", sy.tilt, "max plane tilt");
  synth->add_option("--kinds", sy.kinds, "comma list of plane,sphere,box");
  synth->add_option("--out-dir", sy.out_dir, "output directory")->required();
  synth->add_option("--corrupt", sy.corrupt, "none|blur|noise|affine");
  synth->add_option("--corrupt-sigma", sy.corrupt_sigma, "blur/noise strength");
  synth->add_option("--corrupt-a", sy.corrupt_a, "affine scale");
  synth->add_option("--corrupt-b", sy.corrupt_b, "affine shift");
  synth->add_option("--corrupt-seed", sy.corrupt_seed, "noise seed");
  synth->add_option("--report-out", sy.report_out, "also write the JSON report here");

  LossArgs lo;
  lo.seed = seed_default;
  auto* loss = app.add_subcommand("loss", "evaluate one loss and its gradient stats");
  loss->add_option("--name", lo.name, "ssi|so|ranking|ssig|l1|normals|ng|ssi-net|si-net")
      ->required();
  loss->add_option("--pred", lo.pred, "prediction PFM")->required();
  loss->add_option("--gt", lo.gt, "target PFM");
  loss->add_option("--mask", lo.mask, "validity mask PNG");
  loss->add_option("--gt-normals", lo.gt_normals, "ground-truth normals PFM");
  loss->add_option("--intrinsics", lo.intrinsics, "fx,fy,cx,cy");
  loss->add_option("--pairs", lo.pairs, "sampled pixel pairs");
  loss->add_option("--delta", lo.delta, "ordinal equality threshold");
  loss->add_option("--seed", lo.seed, "pair sampling seed");
  loss->add_option("--scales", lo.scales, "pyramid levels");
  loss->add_option("--stencil", lo.stencil, "central|sobel");
  loss->add_option("--report-out", lo.report_out, "also write the JSON report here");

  AlignArgs al;
  auto* align = app.add_subcommand("align", "least-squares scale/shift alignment");
  align->add_option("--pred", al.pred, "prediction PFM")->required();
  align->add_option("--target", al.target, "target PFM")->required();
  align->add_option("--mask", al.mask, "validity mask PNG");
  align->add_option("--mode", al.mode, "affine|scale");
  align->add_flag("--clamp", al.clamp, "clamp the scale factor positive (scale mode)");
  align->add_option("--out", al.out, "write the aligned grid as PFM");
  align->add_option("--report-out", al.report_out, "also write the JSON report here");

  NormalsArgs no;
  auto* normals = app.add_subcommand("normals", "surface normals from a depth map");
  normals->add_option("--depth", no.depth, "depth PFM")->required();
  normals->add_option("--mask", no.mask, "validity mask PNG");
  normals->add_option("--intrinsics", no.intrinsics, "fx,fy,cx,cy");
  normals->add_option("--stencil", no.stencil, "central|sobel");
  normals->add_option("--out", no.out, "normals PFM (3 channels)");
  normals->add_option("--out-mask", no.out_mask, "where normals are defined, PNG");
  normals->add_option("--report-out", no.report_out, "also write the JSON report here");

  ProjectArgs pr;
  auto* project = app.add_subcommand("project", "back-project depth to a point cloud");
  project->add_option("--depth", pr.depth, "depth PFM")->required();
  project->add_option("--mask", pr.mask, "validity mask PNG");
  project->add_option("--intrinsics", pr.intrinsics, "fx,fy,cx,cy");
  project->add_option("--rgb", pr.rgb, "PNG colors for the cloud");
  project->add_option("--out", pr.out, "PLY output path");
  project->add_option("--report-out", pr.report_out, "also write the JSON report here");

  EvaluateArgs ev;
  ev.seed = seed_default;
  auto* evaluate = app.add_subcommand("evaluate", "zero-shot metric suite");
  evaluate->add_option("--pred", ev.pred, "prediction PFM");
  evaluate->add_option("--gt", ev.gt, "ground-truth depth PFM");
  evaluate->add_option("--mask", ev.mask, "validity mask PNG");
  evaluate->add_option("--gt-normals", ev.gt_normals, "ground-truth normals PFM");
  evaluate->add_option("--intrinsics", ev.intrinsics, "fx,fy,cx,cy");
  evaluate->add_option("--mode", ev.mode, "ssi (affine align) | si (scale align)");
  evaluate->add_option("--manifest", ev.manifest, "JSON array of evaluation items");
  evaluate->add_option("--seed", ev.seed, "pair sampling seed");
  evaluate->add_option("--report-out", ev.report_out, "also write the JSON report here");

  TrainArgs tr;
  tr.seed = seed_default ? seed_default : 7;
  auto* train_toy = app.add_subcommand("train-toy", "train the toy net on synthetic scenes");
  train_toy->add_option("--recipe", tr.recipe, "ssi|ranking|ssi_ranking|ssi_so|si");
  train_toy->add_option("--epochs", tr.epochs, "epochs")->check(CLI::PositiveNumber);
  train_toy->add_option("--scenes", tr.scenes, "benchmark scene count")->check(CLI::PositiveNumber);
  train_toy->add_option("--size", tr.size, "scene resolution")->check(CLI::Range(16, 512));
  train_toy->add_option("--seed", tr.seed, "master seed");
  train_toy->add_option("--lr", tr.lr, "learning rate");
  train_toy->add_option("--pairs", tr.pairs, "sampled pairs per step (default keeps full-scale pair density at 64x64)");
  train_toy->add_flag("--rgb-only", tr.rgb_only, "drop the O^L/O^H channels (si recipe ablation)");
  train_toy->add_option("--out-dir", tr.out_dir, "checkpoint + log directory");
  train_toy->add_option("--report-out", tr.report_out, "also write the JSON report here");

  AblateArgs ab;
  ab.seed = seed_default ? seed_default : 7;
  auto* ablate = app.add_subcommand("ablate", "run the four loss recipes and compare");
  ablate->add_option("--epochs", ab.epochs, "epochs")->check(CLI::PositiveNumber);
  ablate->add_option("--scenes", ab.scenes, "benchmark scene count")->check(CLI::PositiveNumber);
  ablate->add_option("--size", ab.size, "scene resolution")->check(CLI::Range(16, 512));
  ablate->add_option("--seed", ab.seed, "master seed");
  ablate->add_option("--out-dir", ab.out_dir, "ablation.json + ablation.csv directory");
  ablate->add_option("--report-out", ab.report_out, "also write the JSON report here");

  InferArgs in;
  auto* infer = app.add_subcommand("infer", "two-stage depth inference");
  infer->add_option("--rgb", in.rgb, "input PNG")->required();
  infer->add_option("--ssi-low", in.ssi_low, "first-stage low-res disparity PFM");
  infer->add_option("--ssi-high", in.ssi_high, "first-stage high-res disparity PFM");
  infer->add_option("--ssi-ckpt", in.ssi_ckpt, "first-stage checkpoint (3-channel)");
  infer->add_option("--si-ckpt", in.si_ckpt, "second-stage checkpoint (5-channel)")->required();
  infer->add_option("--intrinsics", in.intrinsics, "fx,fy,cx,cy");
  infer->add_option("--receptive-field", in.receptive_field, "first-stage training resolution");
  infer->add_option("--max-factor", in.max_factor, "upper bound on the resolution scale");
  infer->add_option("--down-filter", in.down_filter, "bilinear|area");
  infer->add_option("--out-depth", in.out_depth, "depth PFM");
  infer->add_option("--out-disparity", in.out_disparity, "disparity PFM");
  infer->add_option("--out-normals", in.out_normals, "normals PFM");
  infer->add_option("--out-ply", in.out_ply, "point cloud PLY");
  infer->add_option("--report-out", in.report_out, "also write the JSON report here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // prints help, exit 0
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*synth) return run_synth(sy);
    if (*loss) return run_loss(lo);
    if (*align) return run_align(al);
    if (*normals) return run_normals(no);
    if (*project) return run_project(pr);
    if (*evaluate) return run_evaluate(ev);
    if (*train_toy) return run_train_toy(tr);
    if (*ablate) return run_ablate(ab);
    if (*infer) return run_infer(in);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
