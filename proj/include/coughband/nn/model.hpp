#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "coughband/matrix.hpp"
#include "coughband/nn/layers.hpp"
#include "coughband/nn/tensor.hpp"
#include "coughband/rng.hpp"

namespace coughband {

// Class indices: 0 = non-cough, 1 = cough.
inline constexpr int kClassNonCough = 0;
inline constexpr int kClassCough = 1;

// Activation shapes of the fixed stack for a given input; throws when the
// input is too small for the chain of valid convolutions and 2x2 poolings.
struct StackShape {
  int c1h, c1w, p1h, p1w, c2h, c2w, p2h, p2w, c3h, c3w, c4h, c4w, p3h, p3w;
  int flat;
  StackShape(int in_h, int in_w) {
    c1h = conv_out_extent(in_h, 2); c1w = conv_out_extent(in_w, 2);
    p1h = pool_out_extent(c1h);     p1w = pool_out_extent(c1w);
    c2h = conv_out_extent(p1h, 2);  c2w = conv_out_extent(p1w, 2);
    p2h = pool_out_extent(c2h);     p2w = pool_out_extent(c2w);
    c3h = conv_out_extent(p2h, 2);  c3w = conv_out_extent(p2w, 2);
    c4h = conv_out_extent(c3h, 2);  c4w = conv_out_extent(c3w, 2);
    p3h = pool_out_extent(c4h);     p3w = pool_out_extent(c4w);
    if (p3h < 1 || p3w < 1) throw std::invalid_argument("input too small for layer stack");
    flat = p3h * p3w * 256;
  }
};

// Small CNN for cough/non-cough classification:
// conv(32, 2x2, ReLU) -> maxpool 2x2 -> dropout(0.10) ->
// conv(64) -> maxpool -> dropout -> conv(128) -> dropout ->
// conv(256) -> maxpool -> flatten -> dense(512, ReLU) -> dense(2, softmax).
// Templated on the arithmetic type: float for throughput, double when
// gradients need to be checked against finite differences.
template <class T>
struct CoughCnn {
  int in_h = kFreqBins, in_w = kTimeFrames;
  ConvParams<T> conv1, conv2, conv3, conv4;
  DenseParams<T> fc1, fc2;
  double dropout_rate = 0.10;
  std::uint64_t rng_seed = 0;

  static CoughCnn make(std::uint64_t seed, int in_h = kFreqBins, int in_w = kTimeFrames) {
    CoughCnn m;
    m.in_h = in_h;
    m.in_w = in_w;
    m.rng_seed = seed;
    const StackShape s(in_h, in_w);
    m.conv1.init_shape(2, 2, 1, 32);
    m.conv2.init_shape(2, 2, 32, 64);
    m.conv3.init_shape(2, 2, 64, 128);
    m.conv4.init_shape(2, 2, 128, 256);
    m.fc1.init_shape(s.flat, 512);
    m.fc2.init_shape(512, 2);
    Rng rng(seed);
    m.conv1.he_init(rng);
    m.conv2.he_init(rng);
    m.conv3.he_init(rng);
    m.conv4.he_init(rng);
    m.fc1.he_init(rng);
    m.fc2.small_init(rng);
    return m;
  }

  // Per-call activation storage; owning it outside the model keeps forward
  // reentrant (callers on different workspaces never share state).
  struct Workspace {
    Tensor3<T> c1, p1, c2, p2, c3, c4, p3;
    std::vector<std::int32_t> arg1, arg2, arg3;
    std::vector<std::uint8_t> m1, m2, m3;
    std::vector<T> flat, h, logits, probs;
    bool train_mode = false;
    // backward scratch
    Tensor3<T> gc1, gc2, gc3, gc4, gp1, gp2, gp3;
    std::vector<T> gh, gflat;
  };

  Tensor3<T> to_input(const Mat& m) const {
    if (m.rows != in_h || m.cols != in_w) throw std::invalid_argument("input shape mismatch");
    Tensor3<T> x(in_h, in_w, 1);
    for (std::size_t i = 0; i < m.v.size(); ++i) x.v[i] = static_cast<T>(m.v[i]);
    return x;
  }

  // Returns (p_non_cough, p_cough). Dropout fires only in train mode, with
  // masks drawn from the caller's rng.
  std::array<T, 2> forward(const Tensor3<T>& x, Workspace& ws, bool train_mode = false,
                           Rng* rng = nullptr) const {
    if (x.h != in_h || x.w != in_w || x.c != 1) throw std::invalid_argument("input shape mismatch");
    if (train_mode && rng == nullptr) throw std::invalid_argument("train-mode forward needs an rng");
    ws.train_mode = train_mode;

    conv_forward(x, conv1, ws.c1);
    relu_inplace(ws.c1);
    maxpool2_forward(ws.c1, ws.p1, ws.arg1);
    if (train_mode) dropout_forward_inplace(ws.p1, dropout_rate, *rng, ws.m1);

    conv_forward(ws.p1, conv2, ws.c2);
    relu_inplace(ws.c2);
    maxpool2_forward(ws.c2, ws.p2, ws.arg2);
    if (train_mode) dropout_forward_inplace(ws.p2, dropout_rate, *rng, ws.m2);

    conv_forward(ws.p2, conv3, ws.c3);
    relu_inplace(ws.c3);
    if (train_mode) dropout_forward_inplace(ws.c3, dropout_rate, *rng, ws.m3);

    conv_forward(ws.c3, conv4, ws.c4);
    relu_inplace(ws.c4);
    maxpool2_forward(ws.c4, ws.p3, ws.arg3);

    ws.flat.assign(ws.p3.v.begin(), ws.p3.v.end());
    dense_forward(ws.flat, fc1, ws.h);
    for (auto& v : ws.h)
      if (v < T(0)) v = T(0);
    dense_forward(ws.h, fc2, ws.logits);
    if (!std::isfinite(static_cast<double>(ws.logits[0])) ||
        !std::isfinite(static_cast<double>(ws.logits[1])))
      throw std::runtime_error("non-finite activations in forward pass");
    ws.probs = softmax(ws.logits);
    return {ws.probs[0], ws.probs[1]};
  }

  std::array<T, 2> predict(const Mat& spec) const {
    Workspace ws;
    return forward(to_input(spec), ws, false, nullptr);
  }

  struct Grads {
    ConvParams<T> conv1, conv2, conv3, conv4;
    DenseParams<T> fc1, fc2;
    void match(const CoughCnn& m) {
      conv1.init_shape(2, 2, 1, 32);
      conv2.init_shape(2, 2, 32, 64);
      conv3.init_shape(2, 2, 64, 128);
      conv4.init_shape(2, 2, 128, 256);
      fc1.init_shape(m.fc1.in, m.fc1.out);
      fc2.init_shape(m.fc2.in, m.fc2.out);
    }
    void zero() {
      for (auto* v : {&conv1.w, &conv1.b, &conv2.w, &conv2.b, &conv3.w, &conv3.b,
                      &conv4.w, &conv4.b, &fc1.w, &fc1.b, &fc2.w, &fc2.b})
        std::fill(v->begin(), v->end(), T(0));
    }
  };

  // Accumulates d(cross-entropy)/d(params) into g for the sample whose
  // activations sit in ws (must come from a forward on the same x).
  void backward(const Tensor3<T>& x, Workspace& ws, int label, Grads& g) const {
    std::vector<T> gl = softmax_ce_logit_grad(ws.probs, label);
    dense_backward(ws.h, fc2, gl, &ws.gh, &g.fc2);
    for (std::size_t i = 0; i < ws.h.size(); ++i)
      if (ws.h[i] <= T(0)) ws.gh[i] = T(0);
    dense_backward(ws.flat, fc1, ws.gh, &ws.gflat, &g.fc1);

    ws.gp3.resize(ws.p3.h, ws.p3.w, ws.p3.c);
    std::copy(ws.gflat.begin(), ws.gflat.end(), ws.gp3.v.begin());
    maxpool2_backward(ws.arg3, ws.gp3, ws.c4.h, ws.c4.w, ws.gc4);
    relu_backward_inplace(ws.c4, ws.gc4);
    conv_backward(ws.c3, conv4, ws.gc4, &ws.gc3, &g.conv4);

    if (ws.train_mode) dropout_backward_inplace(ws.m3, dropout_rate, ws.gc3);
    relu_backward_inplace(ws.c3, ws.gc3);
    conv_backward(ws.p2, conv3, ws.gc3, &ws.gp2, &g.conv3);

    if (ws.train_mode) dropout_backward_inplace(ws.m2, dropout_rate, ws.gp2);
    maxpool2_backward(ws.arg2, ws.gp2, ws.c2.h, ws.c2.w, ws.gc2);
    relu_backward_inplace(ws.c2, ws.gc2);
    conv_backward(ws.p1, conv2, ws.gc2, &ws.gp1, &g.conv2);

    if (ws.train_mode) dropout_backward_inplace(ws.m1, dropout_rate, ws.gp1);
    maxpool2_backward(ws.arg1, ws.gp1, ws.c1.h, ws.c1.w, ws.gc1);
    relu_backward_inplace(ws.c1, ws.gc1);
    conv_backward(x, conv1, ws.gc1, static_cast<Tensor3<T>*>(nullptr), &g.conv1);
  }

  // Parameter/gradient blocks in declaration order, for the optimizer.
  struct Block { T* p; T* g; std::size_t n; };
  std::vector<Block> blocks(Grads& g) {
    return {
        {conv1.w.data(), g.conv1.w.data(), conv1.w.size()},
        {conv1.b.data(), g.conv1.b.data(), conv1.b.size()},
        {conv2.w.data(), g.conv2.w.data(), conv2.w.size()},
        {conv2.b.data(), g.conv2.b.data(), conv2.b.size()},
        {conv3.w.data(), g.conv3.w.data(), conv3.w.size()},
        {conv3.b.data(), g.conv3.b.data(), conv3.b.size()},
        {conv4.w.data(), g.conv4.w.data(), conv4.w.size()},
        {conv4.b.data(), g.conv4.b.data(), conv4.b.size()},
        {fc1.w.data(), g.fc1.w.data(), fc1.w.size()},
        {fc1.b.data(), g.fc1.b.data(), fc1.b.size()},
        {fc2.w.data(), g.fc2.w.data(), fc2.w.size()},
        {fc2.b.data(), g.fc2.b.data(), fc2.b.size()},
    };
  }

  std::size_t param_count() const {
    return conv1.w.size() + conv1.b.size() + conv2.w.size() + conv2.b.size() +
           conv3.w.size() + conv3.b.size() + conv4.w.size() + conv4.b.size() +
           fc1.w.size() + fc1.b.size() + fc2.w.size() + fc2.b.size();
  }
};

namespace detail {

inline void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  out.push_back(v & 0xff); out.push_back((v >> 8) & 0xff);
  out.push_back((v >> 16) & 0xff); out.push_back((v >> 24) & 0xff);
}
inline void put_u64(std::vector<unsigned char>& out, std::uint64_t v) {
  put_u32(out, static_cast<std::uint32_t>(v));
  put_u32(out, static_cast<std::uint32_t>(v >> 32));
}
template <class T>
void put_f32_tensor(std::vector<unsigned char>& out, const std::vector<T>& t) {
  for (T x : t) {
    float f = static_cast<float>(x);
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    put_u32(out, u);
  }
}

struct ByteReader {
  const unsigned char* p;
  const unsigned char* end;
  std::uint32_t u32() {
    if (end - p < 4) throw std::runtime_error("model file truncated");
    std::uint32_t v = static_cast<std::uint32_t>(p[0]) | (p[1] << 8) | (p[2] << 16) |
                      (static_cast<std::uint32_t>(p[3]) << 24);
    p += 4;
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t lo = u32();
    return lo | (static_cast<std::uint64_t>(u32()) << 32);
  }
  template <class T>
  void f32_tensor(std::vector<T>& t) {
    for (auto& x : t) {
      std::uint32_t u = u32();
      float f;
      std::memcpy(&f, &u, 4);
      x = static_cast<T>(f);
    }
  }
};

}  // namespace detail

inline constexpr std::uint32_t kModelMagic = 0x4d4e4243;  // "CBNM"
inline constexpr std::uint32_t kModelVersion = 1;

// Versioned binary model file: header (magic, version, input shape, seed,
// dropout rate, layer descriptors), then float32 little-endian tensors in
// declaration order (weights then bias per layer).
template <class T>
void save_model(const std::string& path, const CoughCnn<T>& m) {
  std::vector<unsigned char> out;
  detail::put_u32(out, kModelMagic);
  detail::put_u32(out, kModelVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(m.in_h));
  detail::put_u32(out, static_cast<std::uint32_t>(m.in_w));
  detail::put_u64(out, m.rng_seed);
  detail::put_f32_tensor(out, std::vector<T>{static_cast<T>(m.dropout_rate)});
  detail::put_u32(out, 6);  // layer count
  auto conv_desc = [&](const ConvParams<T>& c) {
    detail::put_u32(out, 1);
    detail::put_u32(out, c.kh); detail::put_u32(out, c.kw);
    detail::put_u32(out, c.ic); detail::put_u32(out, c.oc);
  };
  auto dense_desc = [&](const DenseParams<T>& d) {
    detail::put_u32(out, 2);
    detail::put_u32(out, d.in); detail::put_u32(out, d.out);
  };
  conv_desc(m.conv1); conv_desc(m.conv2); conv_desc(m.conv3); conv_desc(m.conv4);
  dense_desc(m.fc1); dense_desc(m.fc2);
  detail::put_f32_tensor(out, m.conv1.w); detail::put_f32_tensor(out, m.conv1.b);
  detail::put_f32_tensor(out, m.conv2.w); detail::put_f32_tensor(out, m.conv2.b);
  detail::put_f32_tensor(out, m.conv3.w); detail::put_f32_tensor(out, m.conv3.b);
  detail::put_f32_tensor(out, m.conv4.w); detail::put_f32_tensor(out, m.conv4.b);
  detail::put_f32_tensor(out, m.fc1.w); detail::put_f32_tensor(out, m.fc1.b);
  detail::put_f32_tensor(out, m.fc2.w); detail::put_f32_tensor(out, m.fc2.b);

  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write model file: " + path);
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
}

template <class T>
CoughCnn<T> load_model(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open model file: " + path);
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  detail::ByteReader r{buf.data(), buf.data() + buf.size()};
  if (r.u32() != kModelMagic) throw std::runtime_error("bad model magic: " + path);
  if (r.u32() != kModelVersion) throw std::runtime_error("unsupported model version: " + path);
  CoughCnn<T> m;
  m.in_h = static_cast<int>(r.u32());
  m.in_w = static_cast<int>(r.u32());
  m.rng_seed = r.u64();
  std::vector<T> rate(1);
  r.f32_tensor(rate);
  m.dropout_rate = static_cast<double>(rate[0]);
  if (r.u32() != 6) throw std::runtime_error("unexpected layer count: " + path);
  auto read_conv = [&](ConvParams<T>& c) {
    if (r.u32() != 1) throw std::runtime_error("layer descriptor mismatch: " + path);
    const int kh = static_cast<int>(r.u32()), kw = static_cast<int>(r.u32());
    const int ic = static_cast<int>(r.u32()), oc = static_cast<int>(r.u32());
    c.init_shape(kh, kw, ic, oc);
  };
  auto read_dense = [&](DenseParams<T>& d) {
    if (r.u32() != 2) throw std::runtime_error("layer descriptor mismatch: " + path);
    const int in = static_cast<int>(r.u32()), out = static_cast<int>(r.u32());
    d.init_shape(in, out);
  };
  read_conv(m.conv1); read_conv(m.conv2); read_conv(m.conv3); read_conv(m.conv4);
  read_dense(m.fc1); read_dense(m.fc2);
  r.f32_tensor(m.conv1.w); r.f32_tensor(m.conv1.b);
  r.f32_tensor(m.conv2.w); r.f32_tensor(m.conv2.b);
  r.f32_tensor(m.conv3.w); r.f32_tensor(m.conv3.b);
  r.f32_tensor(m.conv4.w); r.f32_tensor(m.conv4.b);
  r.f32_tensor(m.fc1.w); r.f32_tensor(m.fc1.b);
  r.f32_tensor(m.fc2.w); r.f32_tensor(m.fc2.b);
  return m;
}

}  // namespace coughband
