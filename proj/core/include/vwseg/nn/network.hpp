#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "vwseg/nn/model.hpp"
#include "vwseg/nn/tensor.hpp"

namespace vwseg::nn {

// Parameter tensors keyed "<layer>.<param>" (conv: weight/bias, batch norm:
// gamma/beta plus running_mean/running_var buffers). Buffers are serialized
// but never optimized.
template <typename T>
struct WeightsT {
  std::map<std::string, TensorT<T>> tensors;
  std::set<std::string> buffers;
  int epochs_completed = 0;
  double final_loss = std::numeric_limits<double>::quiet_NaN();

  bool trainable(const std::string& key) const { return !buffers.contains(key); }
};

using Weights = WeightsT<float>;

// Fan-in-scaled normal initialization for convolutions, identity batch norm.
template <typename T>
WeightsT<T> init_weights(const ModelSpec& spec, std::uint64_t seed);

// SAN weights implementing channel averaging: the output probability crosses
// 0.5 exactly where the mean of the three input channels does, so binarizing
// the output at 0.5 reproduces the per-voxel 2-of-3 majority vote on binary
// inputs.
template <typename T>
WeightsT<T> averaging_san_weights(const ModelSpec& san_spec);

// Directory layout: index.json ({tensor name -> shape, dtype, file,
// trainable} plus training metadata) and one little-endian float32 .bin file
// per tensor.
void save_weights(const Weights& weights, const std::filesystem::path& dir);
Weights load_weights(const std::filesystem::path& dir);

// Executes a ModelSpec graph over NCHW batches. Accepts any spatial input
// shape compatible with the graph's pooling stages; the spec's input shape is
// the nominal one used for training.
template <typename T>
class NetworkT {
 public:
  NetworkT(ModelSpec spec, WeightsT<T> weights);

  const ModelSpec& spec() const { return spec_; }
  const WeightsT<T>& weights() const { return weights_; }
  WeightsT<T>& weights() { return weights_; }
  std::map<std::string, TensorT<T>>& grads() { return grads_; }

  // The returned reference stays valid until the next forward() call.
  // training=true normalizes with batch statistics and updates running stats;
  // training=false uses running statistics (deterministic).
  const TensorT<T>& forward(const TensorT<T>& input, bool training = false);

  // Accumulates d(loss)/d(param) into grads() for the preceding
  // forward(training=true) pass.
  void backward(const TensorT<T>& grad_output);

  void zero_grads();

 private:
  struct NodeCache {
    TensorT<T> out;
    TensorT<T> grad;
    std::vector<std::int32_t> argmax;  // max_pool
    TensorT<T> xhat;                   // batch_norm normalized input
    std::vector<T> inv_std;            // batch_norm per-channel 1/sqrt(var+eps)
  };

  void check_weights() const;
  void forward_node(int idx, bool training);
  void backward_node(int idx);

  TensorT<T>& param(const std::string& key) { return weights_.tensors.at(key); }
  TensorT<T>& grad(const std::string& key) { return grads_.at(key); }

  ModelSpec spec_;
  WeightsT<T> weights_;
  std::map<std::string, TensorT<T>> grads_;
  std::vector<NodeCache> nodes_;
  std::vector<T> col_buf_, dcol_buf_;
  bool forward_was_training_ = false;
};

using Network = NetworkT<float>;

extern template class NetworkT<float>;
extern template class NetworkT<double>;
extern template WeightsT<float> init_weights<float>(const ModelSpec&, std::uint64_t);
extern template WeightsT<double> init_weights<double>(const ModelSpec&, std::uint64_t);
extern template WeightsT<float> averaging_san_weights<float>(const ModelSpec&);
extern template WeightsT<double> averaging_san_weights<double>(const ModelSpec&);

}  // namespace vwseg::nn
