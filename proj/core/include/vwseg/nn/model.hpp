#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace vwseg::nn {

enum class OpKind {
  input,
  conv,            // stride 1, zero "same" padding
  conv_transpose,  // kernel 2, stride 2 learned upsampling
  batch_norm,
  relu,
  sigmoid,
  max_pool,  // 2x2, stride 2
  avg_pool,  // 3x3, stride 1, same padding, mean over in-bounds cells
  concat,    // channel concatenation
};

struct LayerDef {
  std::string name;
  OpKind kind = OpKind::input;
  std::vector<int> inputs;  // indices of producer layers
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 0;
};

// Framework-agnostic layer graph. Layers are stored in topological order with
// layers[0] the input placeholder.
struct ModelSpec {
  std::string name;  // M_x | M_y | M_z | SAN
  int input_rows = 0, input_cols = 0, input_channels = 1;
  std::vector<LayerDef> layers;

  std::int64_t param_count() const;  // trainable parameters
  const LayerDef& layer(std::string_view name) const;
  bool has_layer(std::string_view name) const;
};

// Encoder-decoder U-Net: `depth` pooling stages, conv channels starting at
// base_width and doubling per stage, every convolution followed by batch norm
// and ReLU, 2x2 max-pool downsampling, learned 2x2 transposed-conv
// upsampling, skip concatenations, and a 1x1 conv + sigmoid head. rows and
// cols must be divisible by 2^depth; violations are rejected with the padded
// shape that would be accepted.
ModelSpec build_unet(const std::string& name, int rows, int cols, int depth = 4,
                     int base_width = 32);

// Segmentation average network: one inception block over the 3-channel stack
// of per-view maps (1x1 / 3x3 / 5x5 conv branches plus average-pool -> 1x1
// conv, each conv followed by batch norm and ReLU), channel concatenation,
// then a 1x1 conv + sigmoid head.
ModelSpec build_san(const std::string& name, int rows, int cols, int branch_width = 8);

}  // namespace vwseg::nn
