#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "coughband/nn/tensor.hpp"
#include "coughband/rng.hpp"

namespace coughband {

// All convolutions are valid (no padding), stride 1; pooling is 2x2 with
// floor division of odd extents (the trailing row/column is dropped).
inline int conv_out_extent(int in, int k) {
  if (in < k) throw std::invalid_argument("convolution input smaller than kernel");
  return in - k + 1;
}
inline int pool_out_extent(int in) { return in / 2; }

template <class T>
struct ConvParams {
  int kh = 0, kw = 0, ic = 0, oc = 0;
  std::vector<T> w;  // [kh][kw][ic][oc]
  std::vector<T> b;  // [oc]

  void init_shape(int KH, int KW, int IC, int OC) {
    kh = KH; kw = KW; ic = IC; oc = OC;
    w.assign(static_cast<std::size_t>(KH) * KW * IC * OC, T(0));
    b.assign(OC, T(0));
  }

  // He-uniform over fan-in, zero biases.
  void he_init(Rng& rng) {
    const double limit = std::sqrt(6.0 / (static_cast<double>(kh) * kw * ic));
    for (auto& x : w) x = static_cast<T>(rng.uniform(-limit, limit));
  }
};

template <class T>
struct DenseParams {
  int in = 0, out = 0;
  std::vector<T> w;  // [in][out]
  std::vector<T> b;  // [out]

  void init_shape(int IN, int OUT) {
    in = IN; out = OUT;
    w.assign(static_cast<std::size_t>(IN) * OUT, T(0));
    b.assign(OUT, T(0));
  }

  void he_init(Rng& rng) {
    const double limit = std::sqrt(6.0 / in);
    for (auto& x : w) x = static_cast<T>(rng.uniform(-limit, limit));
  }

  // For the softmax head: a deliberately small symmetric init so the initial
  // logits sit near zero instead of deep in softmax saturation, which costs
  // many optimizer steps to escape.
  void small_init(Rng& rng, double limit = 0.01) {
    for (auto& x : w) x = static_cast<T>(rng.uniform(-limit, limit));
  }
};

template <class T>
void conv_forward(const Tensor3<T>& x, const ConvParams<T>& p, Tensor3<T>& y) {
  if (x.c != p.ic) throw std::invalid_argument("conv input channel mismatch");
  const int oh = conv_out_extent(x.h, p.kh);
  const int ow = conv_out_extent(x.w, p.kw);
  y.resize(oh, ow, p.oc);
  for (int i = 0; i < oh; ++i)
    for (int j = 0; j < ow; ++j) {
      T* yr = y.at(i, j);
      for (int oc = 0; oc < p.oc; ++oc) yr[oc] = p.b[oc];
      for (int ki = 0; ki < p.kh; ++ki)
        for (int kj = 0; kj < p.kw; ++kj) {
          const T* xr = x.at(i + ki, j + kj);
          const T* wr = p.w.data() + ((static_cast<std::size_t>(ki) * p.kw + kj) * p.ic) * p.oc;
          for (int ic = 0; ic < p.ic; ++ic) {
            const T xv = xr[ic];
            if (xv == T(0)) continue;  // post-ReLU/pool inputs are sparse
            const T* wc = wr + static_cast<std::size_t>(ic) * p.oc;
            for (int oc = 0; oc < p.oc; ++oc) yr[oc] += xv * wc[oc];
          }
        }
    }
}

// Accumulates into gp (and gx if non-null); callers zero them per batch.
// The input-gradient pass runs over a transposed kernel copy so its inner
// loop is a contiguous axpy over input channels, and both passes skip the
// zeros that ReLU masks and max-pool routing leave in x and gy.
template <class T>
void conv_backward(const Tensor3<T>& x, const ConvParams<T>& p, const Tensor3<T>& gy,
                   Tensor3<T>* gx, ConvParams<T>* gp) {
  const int oh = gy.h, ow = gy.w;
  if (gp) {
    for (int i = 0; i < oh; ++i)
      for (int j = 0; j < ow; ++j) {
        const T* gyr = gy.at(i, j);
        for (int oc = 0; oc < p.oc; ++oc) gp->b[oc] += gyr[oc];
        for (int ki = 0; ki < p.kh; ++ki)
          for (int kj = 0; kj < p.kw; ++kj) {
            const T* xr = x.at(i + ki, j + kj);
            const std::size_t base = ((static_cast<std::size_t>(ki) * p.kw + kj) * p.ic) * p.oc;
            for (int ic = 0; ic < p.ic; ++ic) {
              const T xv = xr[ic];
              if (xv == T(0)) continue;
              T* gwc = gp->w.data() + base + static_cast<std::size_t>(ic) * p.oc;
              for (int oc = 0; oc < p.oc; ++oc) gwc[oc] += xv * gyr[oc];
            }
          }
      }
  }
  if (gx) {
    gx->resize(x.h, x.w, x.c);
    std::vector<T> wt(p.w.size());  // [kh][kw][oc][ic]
    for (int ki = 0; ki < p.kh; ++ki)
      for (int kj = 0; kj < p.kw; ++kj) {
        const std::size_t tap = (static_cast<std::size_t>(ki) * p.kw + kj);
        for (int ic = 0; ic < p.ic; ++ic)
          for (int oc = 0; oc < p.oc; ++oc)
            wt[(tap * p.oc + oc) * p.ic + ic] = p.w[(tap * p.ic + ic) * p.oc + oc];
      }
    for (int i = 0; i < oh; ++i)
      for (int j = 0; j < ow; ++j) {
        const T* gyr = gy.at(i, j);
        for (int ki = 0; ki < p.kh; ++ki)
          for (int kj = 0; kj < p.kw; ++kj) {
            T* gxr = gx->at(i + ki, j + kj);
            const T* wbase = wt.data() + (static_cast<std::size_t>(ki) * p.kw + kj) * p.ic * p.oc;
            for (int oc = 0; oc < p.oc; ++oc) {
              const T g = gyr[oc];
              if (g == T(0)) continue;
              const T* wrow = wbase + static_cast<std::size_t>(oc) * p.ic;
              for (int ic = 0; ic < p.ic; ++ic) gxr[ic] += g * wrow[ic];
            }
          }
      }
  }
}

template <class T>
void relu_inplace(Tensor3<T>& y) {
  for (auto& v : y.v)
    if (v < T(0)) v = T(0);
}

// Gradient mask from the (post-ReLU) activations; safe to call on a tensor
// that dropout later zeroed in place, because those units' gradients are
// already zero after dropout_backward.
template <class T>
void relu_backward_inplace(const Tensor3<T>& y, Tensor3<T>& gy) {
  for (std::size_t i = 0; i < y.v.size(); ++i)
    if (y.v[i] <= T(0)) gy.v[i] = T(0);
}

template <class T>
void maxpool2_forward(const Tensor3<T>& x, Tensor3<T>& y, std::vector<std::int32_t>& argmax) {
  const int oh = pool_out_extent(x.h), ow = pool_out_extent(x.w);
  y.resize(oh, ow, x.c);
  argmax.assign(y.size(), 0);
  for (int i = 0; i < oh; ++i)
    for (int j = 0; j < ow; ++j)
      for (int c = 0; c < x.c; ++c) {
        T best = x.at(2 * i, 2 * j, c);
        int bi = 2 * i, bj = 2 * j;
        for (int di = 0; di < 2; ++di)
          for (int dj = 0; dj < 2; ++dj) {
            const T v = x.at(2 * i + di, 2 * j + dj, c);
            if (v > best) { best = v; bi = 2 * i + di; bj = 2 * j + dj; }
          }
        y.at(i, j, c) = best;
        argmax[(static_cast<std::size_t>(i) * ow + j) * x.c + c] =
            static_cast<std::int32_t>((static_cast<std::size_t>(bi) * x.w + bj) * x.c + c);
      }
}

template <class T>
void maxpool2_backward(const std::vector<std::int32_t>& argmax, const Tensor3<T>& gy,
                       int in_h, int in_w, Tensor3<T>& gx) {
  gx.resize(in_h, in_w, gy.c);
  for (std::size_t i = 0; i < gy.v.size(); ++i) gx.v[argmax[i]] += gy.v[i];
}

// Inverted dropout, in place: kept units are scaled by 1/keep so eval mode is
// the identity.
template <class T>
void dropout_forward_inplace(Tensor3<T>& y, double drop_rate, Rng& rng, std::vector<std::uint8_t>& mask) {
  const double keep = 1.0 - drop_rate;
  const T inv_keep = static_cast<T>(1.0 / keep);
  mask.assign(y.size(), 0);
  for (std::size_t i = 0; i < y.v.size(); ++i) {
    if (rng.uniform() < keep) {
      mask[i] = 1;
      y.v[i] *= inv_keep;
    } else {
      y.v[i] = T(0);
    }
  }
}

template <class T>
void dropout_backward_inplace(const std::vector<std::uint8_t>& mask, double drop_rate, Tensor3<T>& gy) {
  const T inv_keep = static_cast<T>(1.0 / (1.0 - drop_rate));
  for (std::size_t i = 0; i < gy.v.size(); ++i)
    gy.v[i] = mask[i] ? gy.v[i] * inv_keep : T(0);
}

template <class T>
void dense_forward(const std::vector<T>& x, const DenseParams<T>& p, std::vector<T>& y) {
  if (static_cast<int>(x.size()) != p.in) throw std::invalid_argument("dense input size mismatch");
  y.assign(p.out, T(0));
  for (int o = 0; o < p.out; ++o) y[o] = p.b[o];
  for (int i = 0; i < p.in; ++i) {
    const T xv = x[i];
    if (xv == T(0)) continue;
    const T* wr = p.w.data() + static_cast<std::size_t>(i) * p.out;
    for (int o = 0; o < p.out; ++o) y[o] += xv * wr[o];
  }
}

template <class T>
void dense_backward(const std::vector<T>& x, const DenseParams<T>& p, const std::vector<T>& gy,
                    std::vector<T>* gx, DenseParams<T>* gp) {
  if (gp) {
    for (int o = 0; o < p.out; ++o) gp->b[o] += gy[o];
    for (int i = 0; i < p.in; ++i) {
      const T xv = x[i];
      if (xv == T(0)) continue;
      T* gwr = gp->w.data() + static_cast<std::size_t>(i) * p.out;
      for (int o = 0; o < p.out; ++o) gwr[o] += xv * gy[o];
    }
  }
  if (gx) {
    gx->assign(p.in, T(0));
    for (int i = 0; i < p.in; ++i) {
      const T* wr = p.w.data() + static_cast<std::size_t>(i) * p.out;
      T acc = T(0);
      for (int o = 0; o < p.out; ++o) acc += wr[o] * gy[o];
      (*gx)[i] = acc;
    }
  }
}

// Numerically stable softmax.
template <class T>
std::vector<T> softmax(const std::vector<T>& z) {
  T m = z[0];
  for (T v : z)
    if (v > m) m = v;
  std::vector<T> p(z.size());
  T sum = T(0);
  for (std::size_t i = 0; i < z.size(); ++i) {
    p[i] = std::exp(z[i] - m);
    sum += p[i];
  }
  for (auto& v : p) v /= sum;
  return p;
}

// Cross-entropy loss of a softmax output against an integer label.
template <class T>
double cross_entropy(const std::vector<T>& probs, int label) {
  const double p = std::max(static_cast<double>(probs[label]), 1e-12);
  return -std::log(p);
}

// Gradient of cross-entropy w.r.t. the logits: probs - one_hot(label).
template <class T>
std::vector<T> softmax_ce_logit_grad(const std::vector<T>& probs, int label) {
  std::vector<T> g(probs);
  g[label] -= T(1);
  return g;
}

}  // namespace coughband
