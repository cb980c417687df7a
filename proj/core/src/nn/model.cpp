#include "vwseg/nn/model.hpp"

#include <stdexcept>

namespace vwseg::nn {

std::int64_t ModelSpec::param_count() const {
  std::int64_t total = 0;
  for (const LayerDef& l : layers) {
    switch (l.kind) {
      case OpKind::conv:
      case OpKind::conv_transpose:
        total += std::int64_t(l.in_channels) * l.out_channels * l.kernel * l.kernel +
                 l.out_channels;
        break;
      case OpKind::batch_norm:
        total += 2 * std::int64_t(l.out_channels);  // gamma + beta
        break;
      default:
        break;
    }
  }
  return total;
}

const LayerDef& ModelSpec::layer(std::string_view name) const {
  for (const LayerDef& l : layers)
    if (l.name == name) return l;
  throw std::invalid_argument("model " + this->name + " has no layer named " + std::string(name));
}

bool ModelSpec::has_layer(std::string_view name) const {
  for (const LayerDef& l : layers)
    if (l.name == name) return true;
  return false;
}

namespace {

// Incremental graph assembly; returns the index of every appended layer.
struct Builder {
  ModelSpec spec;

  int add(LayerDef def) {
    spec.layers.push_back(std::move(def));
    return int(spec.layers.size()) - 1;
  }

  // conv -> batch norm -> ReLU
  int conv_bn_relu(const std::string& base, int input, int in_ch, int out_ch, int kernel) {
    int c = add({base, OpKind::conv, {input}, in_ch, out_ch, kernel});
    int b = add({base + "_bn", OpKind::batch_norm, {c}, out_ch, out_ch, 0});
    return add({base + "_relu", OpKind::relu, {b}, out_ch, out_ch, 0});
  }
};

int round_up(int v, int multiple) { return (v + multiple - 1) / multiple * multiple; }

}  // namespace

ModelSpec build_unet(const std::string& name, int rows, int cols, int depth, int base_width) {
  if (rows < 1 || cols < 1) throw std::invalid_argument("build_unet: input dims must be >= 1");
  if (depth < 1 || depth > 6) throw std::invalid_argument("build_unet: depth must lie in [1, 6]");
  if (base_width < 1) throw std::invalid_argument("build_unet: base_width must be >= 1");
  const int multiple = 1 << depth;
  if (rows % multiple != 0 || cols % multiple != 0)
    throw std::invalid_argument(
        "build_unet: input (" + std::to_string(rows) + ", " + std::to_string(cols) +
        ") not divisible by " + std::to_string(multiple) + "; pad to (" +
        std::to_string(round_up(rows, multiple)) + ", " + std::to_string(round_up(cols, multiple)) +
        ")");

  Builder b;
  b.spec.name = name;
  b.spec.input_rows = rows;
  b.spec.input_cols = cols;
  b.spec.input_channels = 1;

  int node = b.add({"input", OpKind::input, {}, 0, 1, 0});

  std::vector<int> skips;
  int ch = base_width, prev_ch = 1;
  for (int level = 1; level <= depth; ++level) {
    const std::string tag = "enc" + std::to_string(level);
    node = b.conv_bn_relu(tag + "_conv1", node, prev_ch, ch, 3);
    node = b.conv_bn_relu(tag + "_conv2", node, ch, ch, 3);
    skips.push_back(node);
    node = b.add({"pool" + std::to_string(level), OpKind::max_pool, {node}, ch, ch, 2});
    prev_ch = ch;
    ch *= 2;
  }

  node = b.conv_bn_relu("bott_conv1", node, prev_ch, ch, 3);
  node = b.conv_bn_relu("bott_conv2", node, ch, ch, 3);
  prev_ch = ch;

  for (int level = depth; level >= 1; --level) {
    const std::string tag = "dec" + std::to_string(level);
    ch = prev_ch / 2;
    int up = b.add({"up" + std::to_string(level), OpKind::conv_transpose, {node}, prev_ch, ch, 2});
    up = b.add({"up" + std::to_string(level) + "_bn", OpKind::batch_norm, {up}, ch, ch, 0});
    up = b.add({"up" + std::to_string(level) + "_relu", OpKind::relu, {up}, ch, ch, 0});
    int cat = b.add({"cat" + std::to_string(level), OpKind::concat,
                     {skips[std::size_t(level) - 1], up}, 2 * ch, 2 * ch, 0});
    node = b.conv_bn_relu(tag + "_conv1", cat, 2 * ch, ch, 3);
    node = b.conv_bn_relu(tag + "_conv2", node, ch, ch, 3);
    prev_ch = ch;
  }

  node = b.add({"head", OpKind::conv, {node}, prev_ch, 1, 1});
  b.add({"out", OpKind::sigmoid, {node}, 1, 1, 0});
  return std::move(b.spec);
}

ModelSpec build_san(const std::string& name, int rows, int cols, int branch_width) {
  if (rows < 1 || cols < 1) throw std::invalid_argument("build_san: input dims must be >= 1");
  if (branch_width < 1) throw std::invalid_argument("build_san: branch_width must be >= 1");

  Builder b;
  b.spec.name = name;
  b.spec.input_rows = rows;
  b.spec.input_cols = cols;
  b.spec.input_channels = 3;

  const int input = b.add({"input", OpKind::input, {}, 0, 3, 0});
  const int w = branch_width;

  int b1 = b.conv_bn_relu("branch1x1", input, 3, w, 1);
  int b3 = b.conv_bn_relu("branch3x3", input, 3, w, 3);
  int b5 = b.conv_bn_relu("branch5x5", input, 3, w, 5);
  int pool = b.add({"branch_pool", OpKind::avg_pool, {input}, 3, 3, 3});
  int bp = b.conv_bn_relu("branch_pool_conv", pool, 3, w, 1);

  int cat = b.add({"concat", OpKind::concat, {b1, b3, b5, bp}, 4 * w, 4 * w, 0});
  int head = b.add({"head", OpKind::conv, {cat}, 4 * w, 1, 1});
  b.add({"out", OpKind::sigmoid, {head}, 1, 1, 0});
  return std::move(b.spec);
}

}  // namespace vwseg::nn
