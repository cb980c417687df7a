#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <set>

#include "vwseg/nn/adam.hpp"
#include "vwseg/phantom.hpp"
#include "vwseg/train.hpp"

using namespace vwseg;

namespace {

// Small slice dataset cut from a deterministic phantom.
SliceDataset tiny_dataset(int rows = 16, int cols = 16, int n_slices = 8) {
  PhantomParams p;
  p.dims = {rows, cols, n_slices};
  p.lumen_radius = rows / 4.0;
  p.wall_thickness = rows / 8.0;
  p.drift_amplitude = 1.0;
  p.drift_wavelength = 16.0;
  p.noise_level = 0.05;
  p.seed = 31;
  LabeledVolume lv = generate_phantom(p);
  return prepare_view_dataset({lv}, Axis::axial, rows, cols);
}

}  // namespace

TEST_SUITE_BEGIN("training");

TEST_CASE("hyperparameter defaults") {
  const HyperParams hp;
  CHECK(hp.alpha == 1e-3);
  CHECK(hp.beta1 == 0.9);
  CHECK(hp.beta2 == 0.999);
  CHECK(hp.epsilon == 1e-7);
  CHECK(hp.batch_size == 16);
  CHECK(hp.n_epoch == 50);
}

TEST_CASE("epoch order is a permutation") {
  std::mt19937_64 rng(5);
  for (int n : {1, 7, 33}) {
    const std::vector<int> order = epoch_order(n, rng);
    std::set<int> seen(order.begin(), order.end());
    CHECK(int(order.size()) == n);
    CHECK(int(seen.size()) == n);
    CHECK(*seen.begin() == 0);
    CHECK(*seen.rbegin() == n - 1);
  }
}

TEST_CASE("zero learning rate leaves trainable weights unchanged") {
  const nn::ModelSpec spec = nn::build_unet("m", 16, 16, 2, 4);
  SliceDataset ds = tiny_dataset();
  HyperParams hp;
  hp.alpha = 0.0;
  hp.n_epoch = 2;
  hp.batch_size = 4;
  auto [weights, history] = train_model(spec, ds, hp, 11);
  const nn::Weights fresh = nn::init_weights<float>(spec, 11);
  for (const auto& [key, tensor] : fresh.tensors) {
    if (!fresh.trainable(key)) continue;  // running stats do move
    CHECK(weights.tensors.at(key).v == tensor.v);
  }
  CHECK(history.epochs.size() == 2);
}

TEST_CASE("adam step with zero gradient leaves parameters unchanged") {
  std::map<std::string, nn::TensorT<float>> params, grads;
  params.emplace("w", nn::TensorT<float>(2, 3, 1, 1, 0.5f));
  grads.emplace("w", nn::TensorT<float>(2, 3, 1, 1, 0.f));
  nn::Adam adam(1e-3, 0.9, 0.999, 1e-7);
  adam.step(params, grads);
  for (float v : params.at("w").v) CHECK(v == 0.5f);
}

TEST_CASE("adam moves parameters against the gradient") {
  std::map<std::string, nn::TensorT<float>> params, grads;
  params.emplace("w", nn::TensorT<float>(1, 1, 1, 1, 1.0f));
  grads.emplace("w", nn::TensorT<float>(1, 1, 1, 1, 2.0f));
  nn::Adam adam(1e-2, 0.9, 0.999, 1e-7);
  adam.step(params, grads);
  // first bias-corrected step magnitude is alpha regardless of gradient scale
  CHECK(params.at("w").v[0] == doctest::Approx(1.0f - 1e-2f).epsilon(1e-4));
}

TEST_CASE("same seed gives identical training histories") {
  const nn::ModelSpec spec = nn::build_unet("m", 16, 16, 2, 4);
  SliceDataset ds = tiny_dataset();
  HyperParams hp;
  hp.n_epoch = 3;
  hp.batch_size = 4;
  auto [w1, h1] = train_model(spec, ds, hp, 7);
  auto [w2, h2] = train_model(spec, ds, hp, 7);
  REQUIRE(h1.epochs.size() == h2.epochs.size());
  for (std::size_t i = 0; i < h1.epochs.size(); ++i) {
    CHECK(h1.epochs[i].train_loss == h2.epochs[i].train_loss);
    CHECK(h1.epochs[i].eval_dsc == h2.epochs[i].eval_dsc);
  }
  for (const auto& [key, tensor] : w1.tensors) CHECK(w2.tensors.at(key).v == tensor.v);

  auto [w3, h3] = train_model(spec, ds, hp, 8);
  CHECK(h3.epochs[2].train_loss != h1.epochs[2].train_loss);
}

TEST_CASE("every epoch touches each slice exactly once") {
  const nn::ModelSpec spec = nn::build_unet("m", 16, 16, 2, 4);
  SliceDataset ds = tiny_dataset(16, 16, 7);  // odd size forces a partial batch
  HyperParams hp;
  hp.n_epoch = 2;
  hp.batch_size = 4;
  auto [w, history] = train_model(spec, ds, hp, 3);
  for (const EpochStats& e : history.epochs) CHECK(e.slices == 7);
}

TEST_CASE("non-finite loss aborts with epoch and batch diagnostics") {
  // batch norm + relu launder NaN inputs inside the unet, so probe the guard
  // through a minimal conv -> sigmoid graph where NaN reaches the loss
  nn::ModelSpec spec;
  spec.name = "probe";
  spec.input_rows = 4;
  spec.input_cols = 4;
  spec.input_channels = 1;
  spec.layers = {{"input", nn::OpKind::input, {}, 0, 1, 0},
                 {"head", nn::OpKind::conv, {0}, 1, 1, 1},
                 {"out", nn::OpKind::sigmoid, {1}, 1, 1, 0}};

  SliceDataset ds;
  ds.rows = ds.cols = 4;
  for (int i = 0; i < 4; ++i)
    ds.push(std::vector<float>(16, 0.5f), std::vector<float>(16, 0.f));
  ds.inputs[2][5] = std::numeric_limits<float>::quiet_NaN();
  HyperParams hp;
  hp.n_epoch = 1;
  hp.batch_size = 2;
  CHECK_THROWS_WITH_AS(train_model(spec, ds, hp, 1), doctest::Contains("epoch 1"),
                       std::runtime_error);
}

TEST_CASE("empty or mismatched datasets are rejected") {
  const nn::ModelSpec spec = nn::build_unet("m", 16, 16, 2, 4);
  SliceDataset empty;
  empty.rows = 16;
  empty.cols = 16;
  HyperParams hp;
  CHECK_THROWS_AS(train_model(spec, empty, hp, 1), std::invalid_argument);

  SliceDataset wrong = tiny_dataset(32, 32, 2);
  CHECK_THROWS_AS(train_model(spec, wrong, hp, 1), std::invalid_argument);

  SliceDataset nonbinary = tiny_dataset();
  nonbinary.targets[0][0] = 0.25f;
  CHECK_THROWS_AS(train_model(spec, nonbinary, hp, 1), std::invalid_argument);
}

TEST_CASE("checkpoints are written every epoch and pruned on request") {
  const nn::ModelSpec spec = nn::build_unet("m", 16, 16, 2, 4);
  SliceDataset ds = tiny_dataset();
  HyperParams hp;
  hp.n_epoch = 3;
  hp.batch_size = 4;
  const auto dir = std::filesystem::temp_directory_path() / "vwseg_ckpt_test";
  std::filesystem::remove_all(dir);

  TrainOptions opts;
  opts.checkpoint_dir = dir / "all";
  train_model(spec, ds, hp, 5, opts);
  for (int e = 1; e <= 3; ++e) {
    char name[32];
    std::snprintf(name, sizeof(name), "epoch_%03d", e);
    CHECK(std::filesystem::exists(dir / "all" / name / "index.json"));
  }
  CHECK(std::filesystem::exists(dir / "all" / "final" / "index.json"));
  CHECK(std::filesystem::exists(dir / "all" / "history.json"));

  TrainOptions pruned;
  pruned.checkpoint_dir = dir / "pruned";
  pruned.keep_checkpoints = 1;
  train_model(spec, ds, hp, 5, pruned);
  CHECK_FALSE(std::filesystem::exists(dir / "pruned" / "epoch_001"));
  CHECK_FALSE(std::filesystem::exists(dir / "pruned" / "epoch_002"));
  CHECK(std::filesystem::exists(dir / "pruned" / "epoch_003" / "index.json"));

  // final checkpoint reloads into a working model
  nn::Weights final_w = nn::load_weights(dir / "all" / "final");
  nn::NetworkT<float> net(spec, final_w);
  CHECK(final_w.epochs_completed == 3);
  std::filesystem::remove_all(dir);
}

TEST_CASE("a small unet memorizes a tiny phantom") {
  const nn::ModelSpec spec = nn::build_unet("m", 16, 16, 2, 8);
  SliceDataset ds = tiny_dataset(16, 16, 8);
  HyperParams hp;
  hp.n_epoch = 60;
  hp.batch_size = 4;
  auto [w, history] = train_model(spec, ds, hp, 13);
  CHECK(history.epochs.back().eval_dsc >= 0.90);
  CHECK(history.epochs.back().train_loss < history.epochs.front().train_loss);
}

TEST_CASE("train_san freezes the unet weights and rejects empty input") {
  const Dims3 d{16, 16, 8};
  PhantomParams p;
  p.dims = d;
  p.lumen_radius = 4;
  p.wall_thickness = 2;
  p.drift_amplitude = 0.5;
  p.noise_level = 0.05;
  p.seed = 3;
  const std::vector<LabeledVolume> vols{generate_phantom(p)};

  const nn::ModelSpec ax = nn::build_unet("M_x", d.nx, d.ny, 2, 4);
  const nn::ModelSpec lat = nn::build_unet("M_y", d.nx, d.nz, 2, 4);
  const nn::ModelSpec fr = nn::build_unet("M_z", d.ny, d.nz, 2, 4);
  nn::Network mx(ax, nn::init_weights<float>(ax, 1));
  nn::Network my(lat, nn::init_weights<float>(lat, 2));
  nn::Network mz(fr, nn::init_weights<float>(fr, 3));
  const auto mx_before = mx.weights().tensors;

  const nn::ModelSpec san = nn::build_san("SAN", d.nx, d.ny, 4);
  HyperParams hp;
  hp.n_epoch = 2;
  hp.batch_size = 4;
  auto [san_w, history] = train_san(san, mx, my, mz, vols, hp, 21);
  CHECK(history.epochs.size() == 2);
  // frozen: every U-Net tensor is bit-identical after SAN training
  for (const auto& [key, tensor] : mx_before) CHECK(mx.weights().tensors.at(key).v == tensor.v);
  // the result binds to the SAN spec
  nn::Network fused(san, san_w);

  CHECK_THROWS_AS(train_san(san, mx, my, mz, {}, hp, 21), std::invalid_argument);
}

TEST_SUITE_END();
