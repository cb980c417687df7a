#include "vwseg/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "vwseg/fusion.hpp"
#include "vwseg/metrics.hpp"
#include "vwseg/nn/loss.hpp"

namespace vwseg {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void fill_batch(const SliceDataset& ds, const std::vector<int>& order, int start, int nb,
                nn::Tensor& x, nn::Tensor& y) {
  if (x.n != nb) x = nn::Tensor(nb, ds.channels, ds.rows, ds.cols);
  if (y.n != nb) y = nn::Tensor(nb, 1, ds.rows, ds.cols);
  for (int s = 0; s < nb; ++s) {
    const int i = order[std::size_t(start) + s];
    std::copy(ds.inputs[i].begin(), ds.inputs[i].end(), x.plane(s, 0));
    std::copy(ds.targets[i].begin(), ds.targets[i].end(), y.plane(s, 0));
  }
}

void prune_checkpoints(const std::filesystem::path& dir, int keep, int current_epoch) {
  if (keep <= 0) return;
  for (int e = current_epoch - keep; e >= 1; --e) {
    char name[32];
    std::snprintf(name, sizeof(name), "epoch_%03d", e);
    std::error_code ec;
    std::filesystem::remove_all(dir / name, ec);
  }
}

}  // namespace

void SliceDataset::push(std::vector<float> x, std::vector<float> y) {
  if (int(x.size()) != channels * rows * cols || int(y.size()) != rows * cols)
    throw std::invalid_argument("SliceDataset::push: sample size mismatch");
  inputs.push_back(std::move(x));
  targets.push_back(std::move(y));
}

std::vector<int> epoch_order(int n, std::mt19937_64& rng) {
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

SliceDataset prepare_view_dataset(const std::vector<LabeledVolume>& volumes, Axis axis, int rows,
                                  int cols) {
  SliceDataset ds;
  ds.rows = rows;
  ds.cols = cols;
  ds.channels = 1;
  for (const LabeledVolume& vol : volumes) {
    if (!(vol.image.dims() == vol.wall_mask.dims()))
      throw std::invalid_argument("prepare_view_dataset: image/mask dim mismatch");
    SliceStack img = reslice(vol.image, axis);
    SliceStack msk = reslice(vol.wall_mask, axis);
    for (std::size_t k = 0; k < img.slices.size(); ++k) {
      Image2D x = rescale_intensity(resize_slice(img.slices[k], rows, cols, ResizeMode::continuous));
      Image2D y = resize_slice(msk.slices[k], rows, cols, ResizeMode::label);
      ds.push(std::move(x.data), std::move(y.data));
    }
  }
  return ds;
}

double eval_slice_dsc(nn::Network& net, const SliceDataset& ds, int max_slices, int batch_size) {
  const int n = max_slices > 0 ? std::min<int>(max_slices, int(ds.size())) : int(ds.size());
  if (n == 0) return 0.0;
  nn::Tensor x, y;
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::vector<float> bin;
  double total = 0;
  for (int start = 0; start < n; start += batch_size) {
    const int nb = std::min(batch_size, n - start);
    fill_batch(ds, order, start, nb, x, y);
    const nn::Tensor& probs = net.forward(x, /*training=*/false);
    const std::size_t plane = std::size_t(ds.rows) * ds.cols;
    bin.resize(plane);
    for (int s = 0; s < nb; ++s) {
      const float* p = probs.plane(s, 0);
      for (std::size_t i = 0; i < plane; ++i) bin[i] = p[i] >= 0.5f ? 1.f : 0.f;
      total += dsc(std::span<const float>(bin.data(), plane),
                   std::span<const float>(y.plane(s, 0), plane));
    }
  }
  return total / n;
}

std::pair<nn::Weights, TrainHistory> train_model(const nn::ModelSpec& spec,
                                                 const SliceDataset& train_set,
                                                 const HyperParams& hp, std::uint64_t seed,
                                                 const TrainOptions& opts) {
  if (train_set.size() == 0) throw std::invalid_argument("train_model: empty training set");
  if (train_set.rows != spec.input_rows || train_set.cols != spec.input_cols ||
      train_set.channels != spec.input_channels)
    throw std::invalid_argument("train_model: dataset shape (" + std::to_string(train_set.rows) +
                                ", " + std::to_string(train_set.cols) + ", " +
                                std::to_string(train_set.channels) + ") does not match model " +
                                spec.name);
  if (hp.batch_size < 1 || hp.n_epoch < 0)
    throw std::invalid_argument("train_model: batch_size must be >= 1 and n_epoch >= 0");
  for (const auto& t : train_set.targets)
    for (float v : t)
      if (v != 0.f && v != 1.f)
        throw std::invalid_argument("train_model: targets must be binary {0, 1}");

  nn::Network net(spec, nn::init_weights<float>(spec, seed));
  nn::Adam adam(hp.alpha, hp.beta1, hp.beta2, hp.epsilon);
  std::mt19937_64 shuffle_rng(seed ^ 0x9e3779b97f4a7c15ull);

  const SliceDataset& eval_set = opts.eval_set ? *opts.eval_set : train_set;
  TrainHistory history;
  const auto t_start = Clock::now();

  nn::Tensor x, y, grad;
  const int n = int(train_set.size());
  for (int epoch = 1; epoch <= hp.n_epoch; ++epoch) {
    const auto t_epoch = Clock::now();
    const std::vector<int> order = epoch_order(n, shuffle_rng);
    double loss_sum = 0;
    int batch_index = 0;
    for (int start = 0; start < n; start += hp.batch_size, ++batch_index) {
      const int nb = std::min(hp.batch_size, n - start);
      fill_batch(train_set, order, start, nb, x, y);
      const nn::Tensor& pred = net.forward(x, /*training=*/true);
      const float loss = nn::batch_loss(pred, y, &grad);
      if (!std::isfinite(loss))
        throw std::runtime_error("training aborted: non-finite loss in model " + spec.name +
                                 " at epoch " + std::to_string(epoch) + ", batch " +
                                 std::to_string(batch_index + 1));
      net.zero_grads();
      net.backward(grad);
      adam.step(net.weights().tensors, net.grads());
      loss_sum += double(loss) * nb;
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss_sum / n;
    stats.eval_dsc = eval_slice_dsc(net, eval_set, opts.eval_max_slices, hp.batch_size);
    stats.slices = n;
    stats.seconds = seconds_since(t_epoch);
    history.epochs.push_back(stats);
    history.total_seconds = seconds_since(t_start);

    net.weights().epochs_completed = epoch;
    net.weights().final_loss = stats.train_loss;
    if (!opts.checkpoint_dir.empty()) {
      char name[32];
      std::snprintf(name, sizeof(name), "epoch_%03d", epoch);
      nn::save_weights(net.weights(), opts.checkpoint_dir / name);
      save_history(history, opts.checkpoint_dir / "history.json");
      prune_checkpoints(opts.checkpoint_dir, opts.keep_checkpoints, epoch);
    }
    if (opts.verbose)
      std::printf("[%s] epoch %d/%d  loss=%.5f  dsc=%.4f  (%.1fs)\n", spec.name.c_str(), epoch,
                  hp.n_epoch, stats.train_loss, stats.eval_dsc, stats.seconds);
  }

  if (!opts.checkpoint_dir.empty()) {
    nn::save_weights(net.weights(), opts.checkpoint_dir / "final");
    save_history(history, opts.checkpoint_dir / "history.json");
  }
  return {std::move(net.weights()), std::move(history)};
}

std::pair<nn::Weights, TrainHistory> train_san(const nn::ModelSpec& san_spec, nn::Network& mx,
                                               nn::Network& my, nn::Network& mz,
                                               const std::vector<LabeledVolume>& train_volumes,
                                               const HyperParams& hp, std::uint64_t seed,
                                               const TrainOptions& opts, double threshold) {
  if (train_volumes.empty()) throw std::invalid_argument("train_san: empty training set");

  const Dims3 d = train_volumes.front().image.dims();
  SliceDataset ds;
  ds.rows = d.nx;
  ds.cols = d.ny;
  ds.channels = 3;
  const std::size_t plane = std::size_t(d.nx) * d.ny;

  for (const LabeledVolume& vol : train_volumes) {
    if (!(vol.image.dims() == d))
      throw std::invalid_argument("train_san: all training volumes must share dims");
    const std::array<Volume, 3> views = per_view_binary_maps(vol.image, mx, my, mz, threshold);
    const std::array<SliceStack, 3> stacks = {reslice(views[0], Axis::axial),
                                              reslice(views[1], Axis::axial),
                                              reslice(views[2], Axis::axial)};
    SliceStack gt = reslice(vol.wall_mask, Axis::axial);
    for (int k = 0; k < d.nz; ++k) {
      std::vector<float> xyz(3 * plane);
      for (int c = 0; c < 3; ++c) {
        const Image2D& s = stacks[std::size_t(c)].slices[std::size_t(k)];
        std::copy(s.data.begin(), s.data.end(), xyz.begin() + std::ptrdiff_t(c) * plane);
      }
      ds.push(std::move(xyz), std::move(gt.slices[std::size_t(k)].data));
    }
  }
  return train_model(san_spec, ds, hp, seed, opts);
}

void save_history(const TrainHistory& history, const std::filesystem::path& path) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const EpochStats& e : history.epochs)
    epochs.push_back({{"epoch", e.epoch},
                      {"train_loss", e.train_loss},
                      {"eval_dsc", e.eval_dsc},
                      {"seconds", e.seconds},
                      {"slices", e.slices}});
  nlohmann::json j{{"epochs", epochs}, {"total_seconds", history.total_seconds}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << j.dump(2) << "\n";
}

}  // namespace vwseg
