#include "vwseg/nn/loss.hpp"

#include <stdexcept>

namespace vwseg::nn {

template <typename T>
T combined_loss(const T* pred, const T* target, std::size_t n, T eps) {
  if (n == 0) throw std::invalid_argument("combined_loss: empty maps");
  T inter = T(0), total = T(0), sq = T(0);
  for (std::size_t i = 0; i < n; ++i) {
    inter += pred[i] * target[i];
    total += pred[i] + target[i];
    const T d = pred[i] - target[i];
    sq += d * d;
  }
  return -T(2) * inter / (total + eps) + sq / T(n);
}

template <typename T>
T combined_loss_grad(const T* pred, const T* target, std::size_t n, T* grad, T scale, T eps) {
  if (n == 0) throw std::invalid_argument("combined_loss_grad: empty maps");
  T inter = T(0), total = T(0), sq = T(0);
  for (std::size_t i = 0; i < n; ++i) {
    inter += pred[i] * target[i];
    total += pred[i] + target[i];
    const T d = pred[i] - target[i];
    sq += d * d;
  }
  const T denom = total + eps;
  const T dice_const = T(2) * inter / (denom * denom);  // d(-2I/D)/dp = -2t/D + 2I/D^2
  const T mse_scale = T(2) / T(n);
  for (std::size_t i = 0; i < n; ++i)
    grad[i] = scale * (-T(2) * target[i] / denom + dice_const +
                       mse_scale * (pred[i] - target[i]));
  return -T(2) * inter / denom + sq / T(n);
}

template <typename T>
T batch_loss(const TensorT<T>& pred, const TensorT<T>& target, TensorT<T>* grad) {
  if (!pred.same_shape(target))
    throw std::invalid_argument("batch_loss: pred shape " + pred.shape_str() +
                                " != target shape " + target.shape_str());
  if (pred.c != 1) throw std::invalid_argument("batch_loss: expected single-channel maps");
  if (grad && !grad->same_shape(pred)) *grad = TensorT<T>(pred.n, pred.c, pred.h, pred.w);

  const std::size_t n = std::size_t(pred.h) * pred.w;
  T total = T(0);
  for (int s = 0; s < pred.n; ++s) {
    if (grad)
      total += combined_loss_grad(pred.plane(s, 0), target.plane(s, 0), n, grad->plane(s, 0),
                                  T(1) / T(pred.n));
    else
      total += combined_loss(pred.plane(s, 0), target.plane(s, 0), n);
  }
  return total / T(pred.n);
}

template float combined_loss<float>(const float*, const float*, std::size_t, float);
template double combined_loss<double>(const double*, const double*, std::size_t, double);
template float combined_loss_grad<float>(const float*, const float*, std::size_t, float*, float,
                                         float);
template double combined_loss_grad<double>(const double*, const double*, std::size_t, double*,
                                           double, double);
template float batch_loss<float>(const TensorT<float>&, const TensorT<float>&, TensorT<float>*);
template double batch_loss<double>(const TensorT<double>&, const TensorT<double>&,
                                   TensorT<double>*);

}  // namespace vwseg::nn
