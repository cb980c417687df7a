#include "vwseg/nn/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace vwseg::nn {

template <typename T>
void AdamT<T>::step(std::map<std::string, TensorT<T>>& params,
                    const std::map<std::string, TensorT<T>>& grads) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, t_);
  const double bc2 = 1.0 - std::pow(beta2_, t_);

  for (const auto& [key, g] : grads) {
    auto pit = params.find(key);
    if (pit == params.end()) throw std::invalid_argument("adam: gradient for unknown param " + key);
    TensorT<T>& p = pit->second;
    if (!p.same_shape(g))
      throw std::invalid_argument("adam: gradient shape mismatch for " + key);

    std::vector<T>& m = m_[key];
    std::vector<T>& v = v_[key];
    if (m.size() != p.size()) m.assign(p.size(), T(0));
    if (v.size() != p.size()) v.assign(p.size(), T(0));

    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = T(beta1_ * m[i] + (1.0 - beta1_) * g.v[i]);
      v[i] = T(beta2_ * v[i] + (1.0 - beta2_) * double(g.v[i]) * g.v[i]);
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p.v[i] = T(p.v[i] - alpha_ * mhat / (std::sqrt(vhat) + epsilon_));
    }
  }
}

template class AdamT<float>;
template class AdamT<double>;

}  // namespace vwseg::nn
