#pragma once

#include <cstddef>

#include "vwseg/nn/tensor.hpp"

namespace vwseg::nn {

// Dice + mean-squared-difference segmentation loss over one map of n values:
//
//   L(p, t) = -2 * sum(p*t) / (sum(p + t) + eps) + (1/n) * sum((p - t)^2)
//
// The eps guard keeps the Dice term defined (and zero) when both maps are
// empty. L >= -1, with equality iff p == t and t has foreground.
template <typename T>
T combined_loss(const T* pred, const T* target, std::size_t n, T eps = T(1e-7));

// Same value; additionally writes grad[i] = scale * dL/dpred[i].
template <typename T>
T combined_loss_grad(const T* pred, const T* target, std::size_t n, T* grad, T scale = T(1),
                     T eps = T(1e-7));

// Batch mean of per-slice losses over [N, 1, H, W] tensors; grad (when given)
// receives d(mean loss)/d(pred).
template <typename T>
T batch_loss(const TensorT<T>& pred, const TensorT<T>& target, TensorT<T>* grad = nullptr);

extern template float combined_loss<float>(const float*, const float*, std::size_t, float);
extern template double combined_loss<double>(const double*, const double*, std::size_t, double);
extern template float combined_loss_grad<float>(const float*, const float*, std::size_t, float*,
                                                float, float);
extern template double combined_loss_grad<double>(const double*, const double*, std::size_t,
                                                  double*, double, double);
extern template float batch_loss<float>(const TensorT<float>&, const TensorT<float>&,
                                        TensorT<float>*);
extern template double batch_loss<double>(const TensorT<double>&, const TensorT<double>&,
                                          TensorT<double>*);

}  // namespace vwseg::nn
