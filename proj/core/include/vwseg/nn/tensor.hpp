#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace vwseg::nn {

// Dense NCHW tensor. T is float in production; double instantiations exist
// for finite-difference gradient checks.
template <typename T>
struct TensorT {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<T> v;

  TensorT() = default;
  TensorT(int n_, int c_, int h_, int w_, T fill = T(0))
      : n(n_), c(c_), h(h_), w(w_), v(std::size_t(n_) * c_ * h_ * w_, fill) {
    if (n_ < 0 || c_ < 0 || h_ < 0 || w_ < 0)
      throw std::invalid_argument("tensor dims must be non-negative");
  }

  std::size_t size() const { return v.size(); }
  T* data() { return v.data(); }
  const T* data() const { return v.data(); }

  T& at(int in, int ic, int iy, int ix) {
    return v[((std::size_t(in) * c + ic) * h + iy) * w + ix];
  }
  T at(int in, int ic, int iy, int ix) const {
    return v[((std::size_t(in) * c + ic) * h + iy) * w + ix];
  }

  // Pointer to the (n, c) plane, h*w contiguous values.
  T* plane(int in, int ic) { return v.data() + (std::size_t(in) * c + ic) * h * w; }
  const T* plane(int in, int ic) const { return v.data() + (std::size_t(in) * c + ic) * h * w; }

  void zero() { std::fill(v.begin(), v.end(), T(0)); }

  bool same_shape(const TensorT& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }
  std::string shape_str() const {
    return "[" + std::to_string(n) + ", " + std::to_string(c) + ", " + std::to_string(h) + ", " +
           std::to_string(w) + "]";
  }
};

using Tensor = TensorT<float>;

}  // namespace vwseg::nn
