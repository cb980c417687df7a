#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <utility>
#include <vector>

#include "vwseg/nn/adam.hpp"
#include "vwseg/nn/network.hpp"
#include "vwseg/phantom.hpp"
#include "vwseg/volume.hpp"

namespace vwseg {

struct HyperParams {
  double alpha = 1e-3;     // Adam learning rate
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
  int batch_size = 16;
  int n_epoch = 50;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0;
  double eval_dsc = 0;
  double seconds = 0;
  int slices = 0;  // training slices consumed this epoch
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
  double total_seconds = 0;
};

// Flat slice dataset: inputs are channels*rows*cols, targets rows*cols binary.
struct SliceDataset {
  int rows = 0, cols = 0, channels = 1;
  std::vector<std::vector<float>> inputs;
  std::vector<std::vector<float>> targets;

  std::size_t size() const { return inputs.size(); }
  void push(std::vector<float> x, std::vector<float> y);
};

struct TrainOptions {
  std::filesystem::path checkpoint_dir;  // empty disables checkpoints
  int keep_checkpoints = 0;              // >0 prunes all but the newest K epoch dirs
  const SliceDataset* eval_set = nullptr;  // per-epoch DSC source; defaults to the train set
  int eval_max_slices = 128;
  bool verbose = false;
};

// Shuffled epoch visit order; every index appears exactly once.
std::vector<int> epoch_order(int n, std::mt19937_64& rng);

// View-specific training pairs, built the same way inference preprocesses
// slices: reslice along `axis`, resize to rows x cols (bilinear for images,
// nearest for masks), rescale images to [-1, 1].
SliceDataset prepare_view_dataset(const std::vector<LabeledVolume>& volumes, Axis axis, int rows,
                                  int cols);

// Mini-batch Adam over the Dice+MSE loss for n_epoch epochs, reshuffling each
// epoch under `seed`. Throws when the loss turns non-finite. When
// checkpointing is enabled, weights land in <dir>/epoch_<k>/ after every
// epoch plus <dir>/final/, with history.json alongside.
std::pair<nn::Weights, TrainHistory> train_model(const nn::ModelSpec& spec,
                                                 const SliceDataset& train_set,
                                                 const HyperParams& hp, std::uint64_t seed,
                                                 const TrainOptions& opts = {});

// SAN training pairs are (three axial-oriented binary maps from the frozen
// per-view U-Nets, axial ground-truth slice). The U-Net weights are read-only
// throughout.
std::pair<nn::Weights, TrainHistory> train_san(const nn::ModelSpec& san_spec, nn::Network& mx,
                                               nn::Network& my, nn::Network& mz,
                                               const std::vector<LabeledVolume>& train_volumes,
                                               const HyperParams& hp, std::uint64_t seed,
                                               const TrainOptions& opts = {},
                                               double threshold = 0.5);

// Mean slice DSC of 0.5-binarized predictions, evaluation-mode forward.
double eval_slice_dsc(nn::Network& net, const SliceDataset& ds, int max_slices = 0,
                      int batch_size = 16);

void save_history(const TrainHistory& history, const std::filesystem::path& path);

}  // namespace vwseg
