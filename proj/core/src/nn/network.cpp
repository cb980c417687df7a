#include "vwseg/nn/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

namespace vwseg::nn {

namespace {

constexpr double kBnEps = 1e-3;
constexpr double kBnMomentum = 0.9;  // running = momentum * running + (1 - momentum) * batch

template <typename T>
using EMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using EMap = Eigen::Map<EMat<T>>;
template <typename T>
using ECMap = Eigen::Map<const EMat<T>>;

// Lowered convolution patch matrix, row (ci, ky, kx), column (y, x).
template <typename T>
void im2col(const T* x, int C, int H, int W, int k, int pad, T* col) {
  const std::size_t P = std::size_t(H) * W;
  std::size_t row = 0;
  for (int ci = 0; ci < C; ++ci)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx, ++row) {
        T* dst = col + row * P;
        const int dy = ky - pad, dx = kx - pad;
        for (int y = 0; y < H; ++y) {
          T* drow = dst + std::size_t(y) * W;
          const int sy = y + dy;
          if (sy < 0 || sy >= H) {
            std::fill(drow, drow + W, T(0));
            continue;
          }
          const T* srow = x + (std::size_t(ci) * H + sy) * W;
          const int lo = std::max(0, -dx), hi = std::min(W, W - dx);
          for (int xx = 0; xx < lo; ++xx) drow[xx] = T(0);
          if (hi > lo) std::memcpy(drow + lo, srow + lo + dx, std::size_t(hi - lo) * sizeof(T));
          for (int xx = hi; xx < W; ++xx) drow[xx] = T(0);
        }
      }
}

// Scatter-add inverse of im2col.
template <typename T>
void col2im_add(const T* col, int C, int H, int W, int k, int pad, T* x) {
  const std::size_t P = std::size_t(H) * W;
  std::size_t row = 0;
  for (int ci = 0; ci < C; ++ci)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx, ++row) {
        const T* src = col + row * P;
        const int dy = ky - pad, dx = kx - pad;
        for (int y = 0; y < H; ++y) {
          const int sy = y + dy;
          if (sy < 0 || sy >= H) continue;
          T* xrow = x + (std::size_t(ci) * H + sy) * W;
          const T* srow = src + std::size_t(y) * W;
          const int lo = std::max(0, -dx), hi = std::min(W, W - dx);
          for (int xx = lo; xx < hi; ++xx) xrow[xx + dx] += srow[xx];
        }
      }
}

template <typename T>
T stable_sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

}  // namespace

template <typename T>
WeightsT<T> init_weights(const ModelSpec& spec, std::uint64_t seed) {
  WeightsT<T> w;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  for (const LayerDef& l : spec.layers) {
    switch (l.kind) {
      case OpKind::conv: {
        TensorT<T> weight(l.out_channels, l.in_channels, l.kernel, l.kernel);
        const double std = std::sqrt(2.0 / (double(l.in_channels) * l.kernel * l.kernel));
        for (T& v : weight.v) v = T(normal(rng) * std);
        w.tensors.emplace(l.name + ".weight", std::move(weight));
        w.tensors.emplace(l.name + ".bias", TensorT<T>(l.out_channels, 1, 1, 1));
        break;
      }
      case OpKind::conv_transpose: {
        TensorT<T> weight(l.in_channels, l.out_channels, l.kernel, l.kernel);
        const double std = std::sqrt(2.0 / double(l.in_channels));
        for (T& v : weight.v) v = T(normal(rng) * std);
        w.tensors.emplace(l.name + ".weight", std::move(weight));
        w.tensors.emplace(l.name + ".bias", TensorT<T>(l.out_channels, 1, 1, 1));
        break;
      }
      case OpKind::batch_norm: {
        w.tensors.emplace(l.name + ".gamma", TensorT<T>(l.out_channels, 1, 1, 1, T(1)));
        w.tensors.emplace(l.name + ".beta", TensorT<T>(l.out_channels, 1, 1, 1));
        w.tensors.emplace(l.name + ".running_mean", TensorT<T>(l.out_channels, 1, 1, 1));
        w.tensors.emplace(l.name + ".running_var", TensorT<T>(l.out_channels, 1, 1, 1, T(1)));
        w.buffers.insert(l.name + ".running_mean");
        w.buffers.insert(l.name + ".running_var");
        break;
      }
      default:
        break;
    }
  }
  return w;
}

template <typename T>
WeightsT<T> averaging_san_weights(const ModelSpec& san_spec) {
  WeightsT<T> w = init_weights<T>(san_spec, 0);
  for (auto& [key, tensor] : w.tensors) {
    if (key.ends_with(".weight") || key.ends_with(".bias") || key.ends_with(".beta") ||
        key.ends_with(".running_mean"))
      tensor.zero();
    if (key.ends_with(".gamma") || key.ends_with(".running_var"))
      std::fill(tensor.v.begin(), tensor.v.end(), T(1));
  }
  // Channel mean through filter 0 of the 1x1 branch, then a steep logistic
  // centred on mean == 0.5. Binary inputs keep the pre-sigmoid value away
  // from 0 by about 2, so the 0.5-binarized output is an exact majority vote.
  TensorT<T>& b1 = w.tensors.at("branch1x1.weight");
  b1.v[0] = b1.v[1] = b1.v[2] = T(1) / T(3);
  w.tensors.at("head.weight").v[0] = T(12);
  w.tensors.at("head.bias").v[0] = T(-6);
  return w;
}

void save_weights(const Weights& weights, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json tensors = nlohmann::json::object();
  for (const auto& [key, tensor] : weights.tensors) {
    const std::string file = key + ".bin";
    std::ofstream out(dir / file, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write weight file: " + (dir / file).string());
    out.write(reinterpret_cast<const char*>(tensor.data()),
              std::streamsize(tensor.size() * sizeof(float)));
    tensors[key] = {{"shape", {tensor.n, tensor.c, tensor.h, tensor.w}},
                    {"dtype", "float32"},
                    {"file", file},
                    {"trainable", weights.trainable(key)}};
  }
  nlohmann::json index{{"tensors", tensors},
                       {"meta",
                        {{"epochs_completed", weights.epochs_completed},
                         {"final_loss", std::isfinite(weights.final_loss)
                                            ? nlohmann::json(weights.final_loss)
                                            : nlohmann::json()}}}};
  std::ofstream js(dir / "index.json");
  if (!js) throw std::runtime_error("cannot write weight index: " + (dir / "index.json").string());
  js << index.dump(2) << "\n";
}

Weights load_weights(const std::filesystem::path& dir) {
  std::ifstream js(dir / "index.json");
  if (!js) throw std::runtime_error("cannot open weight index: " + (dir / "index.json").string());
  nlohmann::json index = nlohmann::json::parse(js);

  Weights w;
  for (const auto& [key, entry] : index.at("tensors").items()) {
    const auto& shape = entry.at("shape");
    TensorT<float> tensor(shape.at(0).get<int>(), shape.at(1).get<int>(), shape.at(2).get<int>(),
                          shape.at(3).get<int>());
    const std::filesystem::path file = dir / entry.at("file").get<std::string>();
    std::ifstream in(file, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open weight file: " + file.string());
    in.read(reinterpret_cast<char*>(tensor.data()), std::streamsize(tensor.size() * sizeof(float)));
    if (std::size_t(in.gcount()) != tensor.size() * sizeof(float))
      throw std::runtime_error("weight file size mismatch: " + file.string());
    if (!entry.at("trainable").get<bool>()) w.buffers.insert(key);
    w.tensors.emplace(key, std::move(tensor));
  }
  if (index.contains("meta")) {
    const auto& meta = index.at("meta");
    w.epochs_completed = meta.value("epochs_completed", 0);
    if (meta.contains("final_loss") && meta.at("final_loss").is_number())
      w.final_loss = meta.at("final_loss").get<double>();
  }
  return w;
}

template <typename T>
NetworkT<T>::NetworkT(ModelSpec spec, WeightsT<T> weights)
    : spec_(std::move(spec)), weights_(std::move(weights)) {
  check_weights();
  nodes_.resize(spec_.layers.size());
  for (const auto& [key, tensor] : weights_.tensors)
    if (weights_.trainable(key)) {
      TensorT<T> g = tensor;
      g.zero();
      grads_.emplace(key, std::move(g));
    }
}

template <typename T>
void NetworkT<T>::check_weights() const {
  WeightsT<T> expect = init_weights<T>(spec_, 0);
  for (const auto& [key, tensor] : expect.tensors) {
    auto it = weights_.tensors.find(key);
    if (it == weights_.tensors.end())
      throw std::invalid_argument("weights for model " + spec_.name + " missing tensor " + key);
    if (!it->second.same_shape(tensor))
      throw std::invalid_argument("weights tensor " + key + " has shape " +
                                  it->second.shape_str() + ", expected " + tensor.shape_str());
  }
  for (const auto& [key, tensor] : weights_.tensors)
    if (!expect.tensors.contains(key))
      throw std::invalid_argument("weights contain tensor " + key +
                                  " that matches no layer of model " + spec_.name);
}

template <typename T>
void NetworkT<T>::zero_grads() {
  for (auto& [key, g] : grads_) g.zero();
}

template <typename T>
const TensorT<T>& NetworkT<T>::forward(const TensorT<T>& input, bool training) {
  if (input.c != spec_.input_channels)
    throw std::invalid_argument("forward: model " + spec_.name + " expects " +
                                std::to_string(spec_.input_channels) + " input channels, got " +
                                std::to_string(input.c));
  if (input.n < 1 || input.h < 1 || input.w < 1)
    throw std::invalid_argument("forward: empty input batch");
  nodes_[0].out = input;
  for (int i = 1; i < int(spec_.layers.size()); ++i) forward_node(i, training);
  forward_was_training_ = training;
  return nodes_.back().out;
}

template <typename T>
void NetworkT<T>::forward_node(int idx, bool training) {
  const LayerDef& l = spec_.layers[idx];
  NodeCache& node = nodes_[idx];
  const TensorT<T>& x = nodes_[l.inputs.empty() ? 0 : l.inputs[0]].out;

  auto ensure_out = [&](int n, int c, int h, int w) {
    if (node.out.n != n || node.out.c != c || node.out.h != h || node.out.w != w)
      node.out = TensorT<T>(n, c, h, w);
  };

  switch (l.kind) {
    case OpKind::input:
      break;

    case OpKind::conv: {
      if (x.c != l.in_channels)
        throw std::invalid_argument("conv " + l.name + ": input has " + std::to_string(x.c) +
                                    " channels, expected " + std::to_string(l.in_channels));
      const int k = l.kernel, pad = k / 2;
      const std::size_t P = std::size_t(x.h) * x.w;
      const std::size_t K = std::size_t(l.in_channels) * k * k;
      ensure_out(x.n, l.out_channels, x.h, x.w);
      if (k > 1 && col_buf_.size() < K * P) col_buf_.resize(K * P);
      ECMap<T> wM(param(l.name + ".weight").data(), l.out_channels, Eigen::Index(K));
      const TensorT<T>& bias = param(l.name + ".bias");
      for (int s = 0; s < x.n; ++s) {
        const T* col = x.plane(s, 0);
        if (k > 1) {
          im2col(x.plane(s, 0), x.c, x.h, x.w, k, pad, col_buf_.data());
          col = col_buf_.data();
        }
        ECMap<T> colM(col, Eigen::Index(K), Eigen::Index(P));
        EMap<T> yM(node.out.plane(s, 0), l.out_channels, Eigen::Index(P));
        yM.noalias() = wM * colM;
        for (int co = 0; co < l.out_channels; ++co) yM.row(co).array() += bias.v[co];
      }
      break;
    }

    case OpKind::conv_transpose: {
      const int k = l.kernel;  // kernel == stride
      const std::size_t P = std::size_t(x.h) * x.w;
      const std::size_t R = std::size_t(l.out_channels) * k * k;
      ensure_out(x.n, l.out_channels, x.h * k, x.w * k);
      if (col_buf_.size() < R * P) col_buf_.resize(R * P);
      ECMap<T> wM(param(l.name + ".weight").data(), l.in_channels, Eigen::Index(R));
      const TensorT<T>& bias = param(l.name + ".bias");
      const int H = x.h, W = x.w, Wo = x.w * k;
      for (int s = 0; s < x.n; ++s) {
        ECMap<T> xM(x.plane(s, 0), l.in_channels, Eigen::Index(P));
        EMap<T> m(col_buf_.data(), Eigen::Index(R), Eigen::Index(P));
        m.noalias() = wM.transpose() * xM;
        for (int co = 0; co < l.out_channels; ++co) {
          T* yplane = node.out.plane(s, co);
          const T b = bias.v[co];
          for (int dy = 0; dy < k; ++dy)
            for (int dx = 0; dx < k; ++dx) {
              const T* src = col_buf_.data() + ((std::size_t(co) * k + dy) * k + dx) * P;
              for (int y = 0; y < H; ++y) {
                T* yrow = yplane + std::size_t(y * k + dy) * Wo + dx;
                const T* srow = src + std::size_t(y) * W;
                for (int xx = 0; xx < W; ++xx) yrow[std::size_t(xx) * k] = srow[xx] + b;
              }
            }
        }
      }
      break;
    }

    case OpKind::batch_norm: {
      ensure_out(x.n, x.c, x.h, x.w);
      const std::size_t plane = std::size_t(x.h) * x.w;
      const std::size_t M = std::size_t(x.n) * plane;
      const TensorT<T>& gamma = param(l.name + ".gamma");
      const TensorT<T>& beta = param(l.name + ".beta");
      TensorT<T>& rmean = param(l.name + ".running_mean");
      TensorT<T>& rvar = param(l.name + ".running_var");
      if (!node.xhat.same_shape(x)) node.xhat = TensorT<T>(x.n, x.c, x.h, x.w);
      node.inv_std.assign(std::size_t(x.c), T(0));

      for (int c = 0; c < x.c; ++c) {
        T mean, istd;
        if (training) {
          double sum = 0, sumsq = 0;
          for (int s = 0; s < x.n; ++s) {
            const T* p = x.plane(s, c);
            for (std::size_t i = 0; i < plane; ++i) {
              sum += p[i];
              sumsq += double(p[i]) * p[i];
            }
          }
          const double mu = sum / double(M);
          const double var = std::max(0.0, sumsq / double(M) - mu * mu);
          mean = T(mu);
          istd = T(1.0 / std::sqrt(var + kBnEps));
          rmean.v[c] = T(kBnMomentum * rmean.v[c] + (1.0 - kBnMomentum) * mu);
          rvar.v[c] = T(kBnMomentum * rvar.v[c] + (1.0 - kBnMomentum) * var);
        } else {
          mean = rmean.v[c];
          istd = T(1.0 / std::sqrt(double(rvar.v[c]) + kBnEps));
        }
        node.inv_std[c] = istd;
        const T g = gamma.v[c], bt = beta.v[c];
        for (int s = 0; s < x.n; ++s) {
          const T* p = x.plane(s, c);
          T* xh = node.xhat.plane(s, c);
          T* y = node.out.plane(s, c);
          for (std::size_t i = 0; i < plane; ++i) {
            xh[i] = (p[i] - mean) * istd;
            y[i] = g * xh[i] + bt;
          }
        }
      }
      break;
    }

    case OpKind::relu: {
      ensure_out(x.n, x.c, x.h, x.w);
      for (std::size_t i = 0; i < x.size(); ++i) node.out.v[i] = x.v[i] > T(0) ? x.v[i] : T(0);
      break;
    }

    case OpKind::sigmoid: {
      ensure_out(x.n, x.c, x.h, x.w);
      for (std::size_t i = 0; i < x.size(); ++i) node.out.v[i] = stable_sigmoid(x.v[i]);
      break;
    }

    case OpKind::max_pool: {
      if (x.h % 2 != 0 || x.w % 2 != 0)
        throw std::invalid_argument("max_pool " + l.name + ": spatial dims (" +
                                    std::to_string(x.h) + ", " + std::to_string(x.w) +
                                    ") must be even");
      const int Ho = x.h / 2, Wo = x.w / 2;
      ensure_out(x.n, x.c, Ho, Wo);
      node.argmax.assign(node.out.size(), 0);
      std::size_t oi = 0;
      for (int s = 0; s < x.n; ++s)
        for (int c = 0; c < x.c; ++c) {
          const T* p = x.plane(s, c);
          for (int y = 0; y < Ho; ++y)
            for (int xx = 0; xx < Wo; ++xx, ++oi) {
              const int base = 2 * y * x.w + 2 * xx;
              int best = base;
              T bv = p[base];
              if (p[base + 1] > bv) { bv = p[base + 1]; best = base + 1; }
              if (p[base + x.w] > bv) { bv = p[base + x.w]; best = base + x.w; }
              if (p[base + x.w + 1] > bv) { bv = p[base + x.w + 1]; best = base + x.w + 1; }
              node.out.v[oi] = bv;
              node.argmax[oi] = best;
            }
        }
      break;
    }

    case OpKind::avg_pool: {  // 3x3, stride 1, mean over in-bounds cells
      ensure_out(x.n, x.c, x.h, x.w);
      const int H = x.h, W = x.w;
      for (int s = 0; s < x.n; ++s)
        for (int c = 0; c < x.c; ++c) {
          const T* p = x.plane(s, c);
          T* y = node.out.plane(s, c);
          for (int yy = 0; yy < H; ++yy) {
            const int y0 = std::max(0, yy - 1), y1 = std::min(H - 1, yy + 1);
            for (int xx = 0; xx < W; ++xx) {
              const int x0 = std::max(0, xx - 1), x1 = std::min(W - 1, xx + 1);
              T acc = T(0);
              for (int sy = y0; sy <= y1; ++sy)
                for (int sx = x0; sx <= x1; ++sx) acc += p[std::size_t(sy) * W + sx];
              y[std::size_t(yy) * W + xx] = acc / T((y1 - y0 + 1) * (x1 - x0 + 1));
            }
          }
        }
      break;
    }

    case OpKind::concat: {
      int outc = 0;
      for (int in : l.inputs) outc += nodes_[in].out.c;
      ensure_out(x.n, outc, x.h, x.w);
      const std::size_t plane = std::size_t(x.h) * x.w;
      for (int s = 0; s < x.n; ++s) {
        int co = 0;
        for (int in : l.inputs) {
          const TensorT<T>& src = nodes_[in].out;
          if (src.h != x.h || src.w != x.w || src.n != x.n)
            throw std::invalid_argument("concat " + l.name + ": mismatched input shapes");
          std::memcpy(node.out.plane(s, co), src.plane(s, 0),
                      std::size_t(src.c) * plane * sizeof(T));
          co += src.c;
        }
      }
      break;
    }
  }
}

template <typename T>
void NetworkT<T>::backward(const TensorT<T>& grad_output) {
  if (!forward_was_training_)
    throw std::logic_error("backward requires a preceding forward(training=true)");
  if (!grad_output.same_shape(nodes_.back().out))
    throw std::invalid_argument("backward: gradient shape " + grad_output.shape_str() +
                                " does not match output " + nodes_.back().out.shape_str());
  for (NodeCache& n : nodes_) {
    if (!n.grad.same_shape(n.out)) n.grad = TensorT<T>(n.out.n, n.out.c, n.out.h, n.out.w);
    n.grad.zero();
  }
  nodes_.back().grad = grad_output;
  for (int i = int(spec_.layers.size()) - 1; i >= 1; --i) backward_node(i);
}

template <typename T>
void NetworkT<T>::backward_node(int idx) {
  const LayerDef& l = spec_.layers[idx];
  NodeCache& node = nodes_[idx];
  NodeCache& in_node = nodes_[l.inputs.empty() ? 0 : l.inputs[0]];
  const TensorT<T>& x = in_node.out;
  const TensorT<T>& g = node.grad;

  switch (l.kind) {
    case OpKind::input:
      break;

    case OpKind::conv: {
      const int k = l.kernel, pad = k / 2;
      const std::size_t P = std::size_t(x.h) * x.w;
      const std::size_t K = std::size_t(l.in_channels) * k * k;
      ECMap<T> wM(param(l.name + ".weight").data(), l.out_channels, Eigen::Index(K));
      EMap<T> dwM(grad(l.name + ".weight").data(), l.out_channels, Eigen::Index(K));
      TensorT<T>& db = grad(l.name + ".bias");
      if (k > 1 && col_buf_.size() < K * P) col_buf_.resize(K * P);
      if (dcol_buf_.size() < K * P) dcol_buf_.resize(K * P);
      for (int s = 0; s < x.n; ++s) {
        ECMap<T> gM(g.plane(s, 0), l.out_channels, Eigen::Index(P));
        const T* col = x.plane(s, 0);
        if (k > 1) {
          im2col(x.plane(s, 0), x.c, x.h, x.w, k, pad, col_buf_.data());
          col = col_buf_.data();
        }
        ECMap<T> colM(col, Eigen::Index(K), Eigen::Index(P));
        dwM.noalias() += gM * colM.transpose();
        // fixed-order accumulation; Eigen redux order varies with alignment
        for (int co = 0; co < l.out_channels; ++co) {
          const T* grow = g.plane(s, co);
          double acc = 0;
          for (std::size_t i = 0; i < P; ++i) acc += grow[i];
          db.v[co] += T(acc);
        }
        if (k > 1) {
          EMap<T> dcolM(dcol_buf_.data(), Eigen::Index(K), Eigen::Index(P));
          dcolM.noalias() = wM.transpose() * gM;
          col2im_add(dcol_buf_.data(), x.c, x.h, x.w, k, pad, in_node.grad.plane(s, 0));
        } else {
          EMap<T> dxM(in_node.grad.plane(s, 0), l.in_channels, Eigen::Index(P));
          dxM.noalias() += wM.transpose() * gM;
        }
      }
      break;
    }

    case OpKind::conv_transpose: {
      const int k = l.kernel;
      const std::size_t P = std::size_t(x.h) * x.w;
      const std::size_t R = std::size_t(l.out_channels) * k * k;
      ECMap<T> wM(param(l.name + ".weight").data(), l.in_channels, Eigen::Index(R));
      EMap<T> dwM(grad(l.name + ".weight").data(), l.in_channels, Eigen::Index(R));
      TensorT<T>& db = grad(l.name + ".bias");
      if (dcol_buf_.size() < R * P) dcol_buf_.resize(R * P);
      const int H = x.h, W = x.w, Wo = x.w * k;
      for (int s = 0; s < x.n; ++s) {
        // gather output grads back into (co, dy, dx) rows
        for (int co = 0; co < l.out_channels; ++co) {
          const T* gplane = g.plane(s, co);
          T acc = T(0);
          for (int dy = 0; dy < k; ++dy)
            for (int dx = 0; dx < k; ++dx) {
              T* dst = dcol_buf_.data() + ((std::size_t(co) * k + dy) * k + dx) * P;
              for (int y = 0; y < H; ++y) {
                const T* grow = gplane + std::size_t(y * k + dy) * Wo + dx;
                T* drow = dst + std::size_t(y) * W;
                for (int xx = 0; xx < W; ++xx) drow[xx] = grow[std::size_t(xx) * k];
              }
            }
          for (std::size_t i = 0; i < std::size_t(g.h) * g.w; ++i) acc += gplane[i];
          db.v[co] += acc;
        }
        ECMap<T> dmM(dcol_buf_.data(), Eigen::Index(R), Eigen::Index(P));
        ECMap<T> xM(x.plane(s, 0), l.in_channels, Eigen::Index(P));
        EMap<T> dxM(in_node.grad.plane(s, 0), l.in_channels, Eigen::Index(P));
        dxM.noalias() += wM * dmM;
        dwM.noalias() += xM * dmM.transpose();
      }
      break;
    }

    case OpKind::batch_norm: {
      const std::size_t plane = std::size_t(x.h) * x.w;
      const std::size_t M = std::size_t(x.n) * plane;
      const TensorT<T>& gamma = param(l.name + ".gamma");
      TensorT<T>& dgamma = grad(l.name + ".gamma");
      TensorT<T>& dbeta = grad(l.name + ".beta");
      for (int c = 0; c < x.c; ++c) {
        double sdy = 0, sdyx = 0;
        for (int s = 0; s < x.n; ++s) {
          const T* gp = g.plane(s, c);
          const T* xh = node.xhat.plane(s, c);
          for (std::size_t i = 0; i < plane; ++i) {
            sdy += gp[i];
            sdyx += double(gp[i]) * xh[i];
          }
        }
        dgamma.v[c] += T(sdyx);
        dbeta.v[c] += T(sdy);
        const T scale = gamma.v[c] * node.inv_std[c] / T(M);
        const T mdy = T(sdy), mdyx = T(sdyx);
        for (int s = 0; s < x.n; ++s) {
          const T* gp = g.plane(s, c);
          const T* xh = node.xhat.plane(s, c);
          T* dx = in_node.grad.plane(s, c);
          for (std::size_t i = 0; i < plane; ++i)
            dx[i] += scale * (T(M) * gp[i] - mdy - xh[i] * mdyx);
        }
      }
      break;
    }

    case OpKind::relu: {
      for (std::size_t i = 0; i < g.size(); ++i)
        in_node.grad.v[i] += node.out.v[i] > T(0) ? g.v[i] : T(0);
      break;
    }

    case OpKind::sigmoid: {
      for (std::size_t i = 0; i < g.size(); ++i) {
        const T y = node.out.v[i];
        in_node.grad.v[i] += g.v[i] * y * (T(1) - y);
      }
      break;
    }

    case OpKind::max_pool: {
      const std::size_t out_plane = std::size_t(node.out.h) * node.out.w;
      const std::size_t in_plane = std::size_t(x.h) * x.w;
      std::size_t oi = 0;
      for (int s = 0; s < x.n; ++s)
        for (int c = 0; c < x.c; ++c) {
          T* dx = in_node.grad.data() + (std::size_t(s) * x.c + c) * in_plane;
          for (std::size_t i = 0; i < out_plane; ++i, ++oi) dx[node.argmax[oi]] += g.v[oi];
        }
      break;
    }

    case OpKind::avg_pool: {
      const int H = x.h, W = x.w;
      for (int s = 0; s < x.n; ++s)
        for (int c = 0; c < x.c; ++c) {
          const T* gp = g.plane(s, c);
          T* dx = in_node.grad.plane(s, c);
          for (int yy = 0; yy < H; ++yy) {
            const int y0 = std::max(0, yy - 1), y1 = std::min(H - 1, yy + 1);
            for (int xx = 0; xx < W; ++xx) {
              const int x0 = std::max(0, xx - 1), x1 = std::min(W - 1, xx + 1);
              const T share = gp[std::size_t(yy) * W + xx] / T((y1 - y0 + 1) * (x1 - x0 + 1));
              for (int sy = y0; sy <= y1; ++sy)
                for (int sx = x0; sx <= x1; ++sx) dx[std::size_t(sy) * W + sx] += share;
            }
          }
        }
      break;
    }

    case OpKind::concat: {
      const std::size_t plane = std::size_t(x.h) * x.w;
      for (int s = 0; s < g.n; ++s) {
        int co = 0;
        for (int in : l.inputs) {
          TensorT<T>& dst = nodes_[in].grad;
          const std::size_t count = std::size_t(dst.c) * plane;
          const T* src = g.plane(s, co);
          T* d = dst.plane(s, 0);
          for (std::size_t i = 0; i < count; ++i) d[i] += src[i];
          co += dst.c;
        }
      }
      break;
    }
  }
}

template class NetworkT<float>;
template class NetworkT<double>;
template WeightsT<float> init_weights<float>(const ModelSpec&, std::uint64_t);
template WeightsT<double> init_weights<double>(const ModelSpec&, std::uint64_t);
template WeightsT<float> averaging_san_weights<float>(const ModelSpec&);
template WeightsT<double> averaging_san_weights<double>(const ModelSpec&);

}  // namespace vwseg::nn
