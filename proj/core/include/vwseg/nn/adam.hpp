#pragma once

#include <map>
#include <string>
#include <vector>

#include "vwseg/nn/network.hpp"
#include "vwseg/nn/tensor.hpp"

namespace vwseg::nn {

// Bias-corrected Adam over a named parameter set. Only keys present in the
// gradient map are updated, so batch-norm running stats are never touched.
template <typename T>
class AdamT {
 public:
  AdamT(double alpha = 1e-3, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-7)
      : alpha_(alpha), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {}

  void step(std::map<std::string, TensorT<T>>& params,
            const std::map<std::string, TensorT<T>>& grads);

  int steps_taken() const { return t_; }

 private:
  double alpha_, beta1_, beta2_, epsilon_;
  int t_ = 0;
  std::map<std::string, std::vector<T>> m_, v_;
};

using Adam = AdamT<float>;

extern template class AdamT<float>;
extern template class AdamT<double>;

}  // namespace vwseg::nn
