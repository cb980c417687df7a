// vwseg: tri-planar carotid vessel-wall segmentation pipeline.
//
// Subcommands: phantom | train | segment | evaluate. Every command echoes its
// resolved configuration to <out>/config.json so a run is reproducible from
// the echo plus the seed.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "vwseg/fusion.hpp"
#include "vwseg/metrics.hpp"
#include "vwseg/phantom.hpp"
#include "vwseg/train.hpp"
#include "vwseg/volume.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace vwseg;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct GlobalArgs {
  std::uint64_t seed = 0;
  std::string out;
};

Dims3 parse_dims(const std::string& s) {
  if (s == "canonical") return kCanonicalDims;
  Dims3 d;
  if (std::sscanf(s.c_str(), "%d,%d,%d", &d.nx, &d.ny, &d.nz) != 3)
    throw std::invalid_argument("expected dims as NX,NY,NZ (e.g. 64,64,32), got '" + s + "'");
  return d;
}

void write_config_echo(const fs::path& out_dir, const json& j) {
  fs::create_directories(out_dir);
  std::ofstream f(out_dir / "config.json");
  if (!f) throw std::runtime_error("cannot write " + (out_dir / "config.json").string());
  f << j.dump(2) << "\n";
}

void require_file(const fs::path& p, const std::string& what) {
  if (!fs::exists(p)) throw std::invalid_argument(what + " not found: " + p.string());
}

LabeledVolume load_labeled(const fs::path& dir, const std::string& base, Dims3 working) {
  LabeledVolume lv{load_volume(dir / base), load_volume(dir / mask_path_for(base))};
  if (!(lv.image.dims() == working)) {
    lv.image = resample_volume(lv.image, working);
    lv.wall_mask = resample_volume(lv.wall_mask, working);
  }
  return lv;
}

// ---------------------------------------------------------------- phantom --

struct PhantomArgs {
  int n = 10;
  std::string dims = "64,64,32";
  double train_ratio = 0.8;
  double noise_lo = 0.10, noise_hi = 0.20;
  bool anisotropic = false;
};

int cmd_phantom(const GlobalArgs& g, const PhantomArgs& a) {
  if (g.out.empty()) throw std::invalid_argument("--out is required");
  const Dims3 dims = parse_dims(a.dims);
  PhantomRange range = default_range_for(dims);
  range.noise_level = {a.noise_lo, a.noise_hi};
  if (a.anisotropic) {
    range.slice_gain_jitter = 0.25;
    range.shadow_count = 3;
    range.shadow_strength = 0.55;
  }

  const fs::path out_dir(g.out);
  Manifest manifest = make_dataset(a.n, range, g.seed, out_dir, a.train_ratio);

  write_config_echo(out_dir, json{{"command", "phantom"},
                                  {"seed", g.seed},
                                  {"out", g.out},
                                  {"n", a.n},
                                  {"dims", {dims.nx, dims.ny, dims.nz}},
                                  {"train_ratio", a.train_ratio},
                                  {"noise", {a.noise_lo, a.noise_hi}},
                                  {"anisotropic", a.anisotropic}});
  std::cout << (out_dir / "manifest.json").string() << "\n";
  std::cout << "train volumes: " << manifest.train.size()
            << ", test volumes: " << manifest.test.size() << "\n";
  return kExitOk;
}

// ------------------------------------------------------------------ train --

struct TrainArgs {
  std::string manifest;
  int n_epoch = 50;
  int batch_size = 16;
  double lr = 1e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-7;
  int depth = 4, base_width = 32, san_width = 8;
  std::string working_dims = "native";
  int keep_checkpoints = 3;
  double threshold = 0.5;
};

struct RunSetup {
  Dims3 working{};
  int depth = 4, base_width = 32, san_width = 8;

  nn::ModelSpec spec_for(const std::string& name) const {
    const SliceShapeTable t = SliceShapeTable::for_dims(working);
    if (name == "M_x") return nn::build_unet("M_x", t.axial.rows, t.axial.cols, depth, base_width);
    if (name == "M_y")
      return nn::build_unet("M_y", t.lateral.rows, t.lateral.cols, depth, base_width);
    if (name == "M_z")
      return nn::build_unet("M_z", t.frontal.rows, t.frontal.cols, depth, base_width);
    return nn::build_san("SAN", t.axial.rows, t.axial.cols, san_width);
  }
};

void check_working_dims(Dims3 d, int depth) {
  const int m = 1 << depth;
  if (d.nx % m != 0 || d.ny % m != 0 || d.nz % m != 0)
    throw std::invalid_argument("working dims " + d.str() + " must be divisible by " +
                                std::to_string(m) + " (depth " + std::to_string(depth) +
                                ") along every axis");
}

double time_per_slice(nn::Network& net, const Volume& volume, Axis axis) {
  const auto t0 = std::chrono::steady_clock::now();
  segment_view(volume, axis, net);
  const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return dt / volume.dims().along(axis);
}

int cmd_train(const GlobalArgs& g, const TrainArgs& a) {
  if (g.out.empty()) throw std::invalid_argument("--out is required");
  require_file(a.manifest, "manifest");
  const fs::path manifest_dir = fs::path(a.manifest).parent_path();
  const Manifest manifest = load_manifest(a.manifest);
  if (manifest.train.empty()) throw std::invalid_argument("manifest has no training volumes");

  Dims3 working;
  if (a.working_dims == "native") {
    working = load_volume(manifest_dir / manifest.train[0]).dims();
  } else {
    working = parse_dims(a.working_dims);
  }
  check_working_dims(working, a.depth);

  std::vector<LabeledVolume> train_volumes;
  train_volumes.reserve(manifest.train.size());
  for (const std::string& base : manifest.train)
    train_volumes.push_back(load_labeled(manifest_dir, base, working));

  const RunSetup setup{working, a.depth, a.base_width, a.san_width};
  HyperParams hp;
  hp.alpha = a.lr;
  hp.beta1 = a.beta1;
  hp.beta2 = a.beta2;
  hp.epsilon = a.eps;
  hp.batch_size = a.batch_size;
  hp.n_epoch = a.n_epoch;

  const fs::path out_dir(g.out);
  write_config_echo(out_dir, json{{"command", "train"},
                                  {"seed", g.seed},
                                  {"out", g.out},
                                  {"manifest", a.manifest},
                                  {"working_dims", {working.nx, working.ny, working.nz}},
                                  {"model",
                                   {{"depth", a.depth},
                                    {"base_width", a.base_width},
                                    {"san_width", a.san_width}}},
                                  {"hyperparams",
                                   {{"alpha", hp.alpha},
                                    {"beta1", hp.beta1},
                                    {"beta2", hp.beta2},
                                    {"epsilon", hp.epsilon},
                                    {"batch_size", hp.batch_size},
                                    {"n_epoch", hp.n_epoch}}},
                                  {"threshold", a.threshold},
                                  {"keep_checkpoints", a.keep_checkpoints}});

  json timing;
  const SliceShapeTable shapes = SliceShapeTable::for_dims(working);

  auto train_view = [&](const std::string& name, Axis axis,
                        SliceShape shape) -> std::pair<nn::Weights, double> {
    std::cout << "== training " << name << " on " << axis_name(axis) << " slices ("
              << shape.rows << "x" << shape.cols << ") ==\n";
    SliceDataset ds = prepare_view_dataset(train_volumes, axis, shape.rows, shape.cols);
    TrainOptions opts;
    opts.checkpoint_dir = out_dir / name;
    opts.keep_checkpoints = a.keep_checkpoints;
    opts.verbose = true;
    auto [weights, history] = train_model(setup.spec_for(name), ds, hp, g.seed, opts);
    return {std::move(weights), history.total_seconds};
  };

  auto [wx, tx] = train_view("M_x", Axis::axial, shapes.axial);
  auto [wy, ty] = train_view("M_y", Axis::lateral, shapes.lateral);
  auto [wz, tz] = train_view("M_z", Axis::frontal, shapes.frontal);

  nn::Network mx(setup.spec_for("M_x"), std::move(wx));
  nn::Network my(setup.spec_for("M_y"), std::move(wy));
  nn::Network mz(setup.spec_for("M_z"), std::move(wz));

  std::cout << "== training SAN on frozen per-view outputs ==\n";
  TrainOptions san_opts;
  san_opts.checkpoint_dir = out_dir / "SAN";
  san_opts.keep_checkpoints = a.keep_checkpoints;
  san_opts.verbose = true;
  auto [wsan, san_history] =
      train_san(setup.spec_for("SAN"), mx, my, mz, train_volumes, hp, g.seed, san_opts,
                a.threshold);
  nn::Network san(setup.spec_for("SAN"), std::move(wsan));

  // Table-2-style timing: total training seconds + per-slice inference time
  const Volume& sample = train_volumes[0].image;
  timing["unet_axial"] = {{"train_seconds", tx},
                          {"seg_seconds_per_slice", time_per_slice(mx, sample, Axis::axial)}};
  timing["unet_lateral"] = {{"train_seconds", ty},
                            {"seg_seconds_per_slice", time_per_slice(my, sample, Axis::lateral)}};
  timing["unet_frontal"] = {{"train_seconds", tz},
                            {"seg_seconds_per_slice", time_per_slice(mz, sample, Axis::frontal)}};
  {
    const auto views = per_view_binary_maps(sample, mx, my, mz, a.threshold);
    const auto t0 = std::chrono::steady_clock::now();
    fuse_with_san(views, san);
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    timing["san"] = {{"train_seconds", san_history.total_seconds},
                     {"seg_seconds_per_slice", dt / working.nz}};
  }
  std::ofstream tf(out_dir / "timing.json");
  tf << timing.dump(2) << "\n";

  std::cout << "run directory: " << out_dir.string() << "\n";
  return kExitOk;
}

// ----------------------------------------------------- weights reconstruction

struct LoadedRun {
  RunSetup setup;
  double threshold = 0.5;
};

LoadedRun read_run_config(const fs::path& run_dir) {
  require_file(run_dir / "config.json", "run config");
  std::ifstream f(run_dir / "config.json");
  json j = json::parse(f);
  LoadedRun run;
  const auto& wd = j.at("working_dims");
  run.setup.working = {wd.at(0).get<int>(), wd.at(1).get<int>(), wd.at(2).get<int>()};
  run.setup.depth = j.at("model").at("depth").get<int>();
  run.setup.base_width = j.at("model").at("base_width").get<int>();
  run.setup.san_width = j.at("model").at("san_width").get<int>();
  run.threshold = j.value("threshold", 0.5);
  return run;
}

nn::Network load_net(const RunSetup& setup, const fs::path& run_dir, const std::string& name) {
  const fs::path dir = run_dir / name / "final";
  require_file(dir / "index.json", "weights for " + name);
  return nn::Network(setup.spec_for(name), nn::load_weights(dir));
}

// ---------------------------------------------------------------- segment --

struct SegmentArgs {
  std::string weights;
  std::string input;
  double threshold = 0.5;
  bool axial_only = false;
};

int cmd_segment(const GlobalArgs& g, const SegmentArgs& a) {
  if (g.out.empty()) throw std::invalid_argument("--out is required");
  const fs::path run_dir(a.weights);
  const LoadedRun run = read_run_config(run_dir);

  Volume input = load_volume(a.input);
  const Dims3 native = input.dims();
  if (!(native == run.setup.working)) input = resample_volume(input, run.setup.working);

  const fs::path out_dir(g.out);
  fs::create_directories(out_dir);

  json summary{{"threshold", a.threshold}, {"axial_only", a.axial_only}, {"input", a.input}};

  nn::Network mx = load_net(run.setup, run_dir, "M_x");
  if (a.axial_only) {
    Volume prob = segment_view(input, Axis::axial, mx);
    save_volume(prob, out_dir / "prob_axial");
    save_volume(binarize(prob, a.threshold), out_dir / "mask_axial");
    summary["prob"] = "prob_axial";
    summary["mask"] = "mask_axial";
  } else {
    nn::Network my = load_net(run.setup, run_dir, "M_y");
    nn::Network mz = load_net(run.setup, run_dir, "M_z");
    nn::Network san = load_net(run.setup, run_dir, "SAN");
    SegmentationResult res = segment_volume(input, mx, my, mz, san, a.threshold);
    save_volume(res.prob_axial, out_dir / "prob_axial");
    save_volume(res.mask_axial, out_dir / "mask_axial");
    const char* view_names[3] = {"view_axial_mask", "view_lateral_mask", "view_frontal_mask"};
    json views = json::array();
    for (int i = 0; i < 3; ++i) {
      save_volume(res.per_view_masks[std::size_t(i)], out_dir / view_names[i]);
      views.push_back(view_names[i]);
    }
    summary["prob"] = "prob_axial";
    summary["mask"] = "mask_axial";
    summary["per_view_masks"] = views;
  }
  std::ofstream sf(out_dir / "summary.json");
  sf << summary.dump(2) << "\n";

  write_config_echo(out_dir, json{{"command", "segment"},
                                  {"seed", g.seed},
                                  {"out", g.out},
                                  {"weights", a.weights},
                                  {"input", a.input},
                                  {"threshold", a.threshold},
                                  {"axial_only", a.axial_only}});
  std::cout << (out_dir / "summary.json").string() << "\n";
  return kExitOk;
}

// --------------------------------------------------------------- evaluate --

struct EvaluateArgs {
  std::string manifest;
  std::string weights;
  double threshold = 0.5;
  int n_thresholds = 101;
};

struct ModelAggregate {
  double dsc = 0, sensitivity = 0, iou = 0, auc = 0;
  int n = 0;

  void add(const MetricReport& r) {
    dsc += r.dsc;
    sensitivity += r.sensitivity;
    iou += r.iou;
    auc += r.auc;
    ++n;
  }
  json to_json() const {
    return {{"dsc", dsc / n}, {"sensitivity", sensitivity / n}, {"iou", iou / n},
            {"auc", auc / n}, {"volumes", n}};
  }
};

int cmd_evaluate(const GlobalArgs& g, const EvaluateArgs& a) {
  if (g.out.empty()) throw std::invalid_argument("--out is required");
  require_file(a.manifest, "manifest");
  const fs::path run_dir(a.weights);
  const LoadedRun run = read_run_config(run_dir);
  const fs::path manifest_dir = fs::path(a.manifest).parent_path();
  const Manifest manifest = load_manifest(a.manifest);
  if (manifest.test.empty()) throw std::invalid_argument("manifest has no test volumes");

  nn::Network mx = load_net(run.setup, run_dir, "M_x");
  nn::Network my = load_net(run.setup, run_dir, "M_y");
  nn::Network mz = load_net(run.setup, run_dir, "M_z");
  nn::Network san = load_net(run.setup, run_dir, "SAN");

  const fs::path out_dir(g.out);
  fs::create_directories(out_dir);

  ModelAggregate agg_unet, agg_fused;
  // pooled voxels across the test set for the Fig-5-style aggregate curve
  std::vector<float> pool_prob_unet, pool_prob_fused, pool_gt;
  json per_volume = json::array();

  for (const std::string& base : manifest.test) {
    Volume image = load_volume(manifest_dir / base);
    Volume gt = load_volume(manifest_dir / mask_path_for(base));
    const Dims3 native = image.dims();

    Volume working_image = image;
    if (!(native == run.setup.working))
      working_image = resample_volume(image, run.setup.working);

    Volume prob_unet = segment_view(working_image, Axis::axial, mx);
    SegmentationResult fused = segment_volume(working_image, mx, my, mz, san, a.threshold);
    Volume prob_fused = fused.prob_axial;

    if (!(native == run.setup.working)) {
      prob_unet = resample_volume(prob_unet, native);
      prob_fused = resample_volume(prob_fused, native);
    }

    const MetricReport r_unet =
        evaluate_pair(prob_unet, binarize(prob_unet, a.threshold), gt, a.n_thresholds);
    const MetricReport r_fused =
        evaluate_pair(prob_fused, binarize(prob_fused, a.threshold), gt, a.n_thresholds);
    agg_unet.add(r_unet);
    agg_fused.add(r_fused);

    write_report_json(r_unet, out_dir / (base + "_unet.report.json"));
    write_report_json(r_fused, out_dir / (base + "_unet_san.report.json"));
    per_volume.push_back({{"volume", base},
                          {"unet", {{"dsc", r_unet.dsc}, {"auc", r_unet.auc}}},
                          {"unet+san", {{"dsc", r_fused.dsc}, {"auc", r_fused.auc}}}});

    pool_prob_unet.insert(pool_prob_unet.end(), prob_unet.data().begin(), prob_unet.data().end());
    pool_prob_fused.insert(pool_prob_fused.end(), prob_fused.data().begin(),
                           prob_fused.data().end());
    pool_gt.insert(pool_gt.end(), gt.data().begin(), gt.data().end());
  }

  write_roc_csv(roc_curve(std::span<const float>(pool_prob_unet), std::span<const float>(pool_gt),
                          a.n_thresholds),
                out_dir / "roc_unet.csv");
  write_roc_csv(roc_curve(std::span<const float>(pool_prob_fused),
                          std::span<const float>(pool_gt), a.n_thresholds),
                out_dir / "roc_unet_san.csv");

  json aggregate{{"models", {{"unet", agg_unet.to_json()}, {"unet+san", agg_fused.to_json()}}},
                 {"per_volume", per_volume},
                 {"threshold", a.threshold},
                 {"n_thresholds", a.n_thresholds}};
  std::ofstream af(out_dir / "aggregate.json");
  af << aggregate.dump(2) << "\n";

  write_config_echo(out_dir, json{{"command", "evaluate"},
                                  {"seed", g.seed},
                                  {"out", g.out},
                                  {"manifest", a.manifest},
                                  {"weights", a.weights},
                                  {"threshold", a.threshold},
                                  {"n_thresholds", a.n_thresholds}});

  std::printf("model        DSC     Sensitivity  IoU     AUC\n");
  std::printf("U-Net        %.3f   %.3f        %.3f   %.3f\n", agg_unet.dsc / agg_unet.n,
              agg_unet.sensitivity / agg_unet.n, agg_unet.iou / agg_unet.n,
              agg_unet.auc / agg_unet.n);
  std::printf("U-Net+SAN    %.3f   %.3f        %.3f   %.3f\n", agg_fused.dsc / agg_fused.n,
              agg_fused.sensitivity / agg_fused.n, agg_fused.iou / agg_fused.n,
              agg_fused.auc / agg_fused.n);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tri-planar carotid vessel-wall segmentation (three U-Nets + SAN fusion)"};
  app.set_config("--config", "", "read options from a config file");
  app.require_subcommand(1);

  GlobalArgs g;
  app.add_option("--seed", g.seed, "global random seed")->capture_default_str();
  app.add_option("--out", g.out, "output directory");

  PhantomArgs pa;
  CLI::App* phantom = app.add_subcommand("phantom", "generate a synthetic labeled dataset");
  phantom->fallthrough();
  phantom->add_option("--n", pa.n, "number of volumes")->check(CLI::PositiveNumber);
  phantom->add_option("--dims", pa.dims, "volume dims NX,NY,NZ or 'canonical'")
      ->capture_default_str();
  phantom->add_option("--train-ratio", pa.train_ratio, "train fraction of volumes")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  phantom->add_option("--noise-lo", pa.noise_lo, "speckle level lower bound")
      ->capture_default_str();
  phantom->add_option("--noise-hi", pa.noise_hi, "speckle level upper bound")
      ->capture_default_str();
  phantom->add_flag("--anisotropic", pa.anisotropic,
                    "add per-slice gain jitter and acoustic shadows");

  TrainArgs ta;
  CLI::App* train = app.add_subcommand("train", "train M_x, M_y, M_z then SAN");
  train->fallthrough();
  train->add_option("--manifest", ta.manifest, "dataset manifest path")->required();
  train->add_option("--n-epoch", ta.n_epoch, "epochs per model")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  train->add_option("--batch-size", ta.batch_size, "mini-batch size")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  train->add_option("--lr", ta.lr, "Adam learning rate")->capture_default_str();
  train->add_option("--beta1", ta.beta1, "Adam beta1")->capture_default_str();
  train->add_option("--beta2", ta.beta2, "Adam beta2")->capture_default_str();
  train->add_option("--eps", ta.eps, "Adam epsilon")->capture_default_str();
  train->add_option("--depth", ta.depth, "U-Net pooling depth")->capture_default_str();
  train->add_option("--base-width", ta.base_width, "U-Net channels at the first level")
      ->capture_default_str();
  train->add_option("--san-width", ta.san_width, "SAN branch width")->capture_default_str();
  train->add_option("--working-dims", ta.working_dims,
                    "'native', 'canonical' (320,256,128) or NX,NY,NZ; volumes are resampled "
                    "to this shape at load time")
      ->capture_default_str();
  train->add_option("--keep-checkpoints", ta.keep_checkpoints,
                    "epoch checkpoints to keep per model (0 keeps all)")
      ->capture_default_str();
  train->add_option("--threshold", ta.threshold, "binarization threshold for SAN inputs")
      ->capture_default_str();

  SegmentArgs sa;
  CLI::App* segment = app.add_subcommand("segment", "segment one volume with a trained run");
  segment->fallthrough();
  segment->add_option("--weights", sa.weights, "run directory from `train`")->required();
  segment->add_option("--input", sa.input, "input volume base path (or .json sidecar)")
      ->required();
  segment->add_option("--threshold", sa.threshold, "binarization threshold")
      ->capture_default_str();
  segment->add_flag("--axial-only", sa.axial_only, "single-view U-Net baseline, bypassing SAN");

  EvaluateArgs ea;
  CLI::App* evaluate =
      app.add_subcommand("evaluate", "evaluate a run on the manifest's test volumes");
  evaluate->fallthrough();
  evaluate->add_option("--manifest", ea.manifest, "dataset manifest path")->required();
  evaluate->add_option("--weights", ea.weights, "run directory from `train`")->required();
  evaluate->add_option("--threshold", ea.threshold, "binarization threshold")
      ->capture_default_str();
  evaluate->add_option("--n-thresholds", ea.n_thresholds, "ROC sweep granularity")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (phantom->parsed()) return cmd_phantom(g, pa);
    if (train->parsed()) return cmd_train(g, ta);
    if (segment->parsed()) return cmd_segment(g, sa);
    if (evaluate->parsed()) return cmd_evaluate(g, ea);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
