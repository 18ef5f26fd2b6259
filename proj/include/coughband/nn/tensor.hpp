#pragma once

#include <cstddef>
#include <vector>

namespace coughband {

// Channels-last 3-D tensor: index (i, j, c) -> ((i*w) + j)*channels + c.
// Channels-last keeps the hot convolution loop contiguous over filters.
template <class T>
struct Tensor3 {
  int h = 0, w = 0, c = 0;
  std::vector<T> v;

  Tensor3() = default;
  Tensor3(int H, int W, int C) : h(H), w(W), c(C), v(static_cast<std::size_t>(H) * W * C, T(0)) {}

  void resize(int H, int W, int C) {
    h = H; w = W; c = C;
    v.assign(static_cast<std::size_t>(H) * W * C, T(0));
  }

  T* at(int i, int j) { return v.data() + (static_cast<std::size_t>(i) * w + j) * c; }
  const T* at(int i, int j) const { return v.data() + (static_cast<std::size_t>(i) * w + j) * c; }

  T& at(int i, int j, int ch) { return v[(static_cast<std::size_t>(i) * w + j) * c + ch]; }
  T at(int i, int j, int ch) const { return v[(static_cast<std::size_t>(i) * w + j) * c + ch]; }

  std::size_t size() const { return v.size(); }
  void zero() { std::fill(v.begin(), v.end(), T(0)); }
};

}  // namespace coughband
