#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace coughband {

struct AdaMaxConfig {
  double alpha = 0.002;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double delta = 1e-8;
};

// First-moment and infinity-norm accumulators, one slot per parameter.
template <class T>
struct AdaMaxState {
  std::vector<T> m, u;
  explicit AdaMaxState(std::size_t n = 0) : m(n, T(0)), u(n, T(0)) {}
};

// One AdaMax update over a contiguous parameter block:
//   m <- b1*m + (1-b1)*g;  u <- max(b2*u, |g|);
//   theta <- theta - (alpha / (1 - b1^t)) * m / (u + delta).
// t is 1-based. state slots [offset, offset+n) back this block.
template <class T>
void adamax_step(T* params, const T* grads, AdaMaxState<T>& state, std::size_t offset,
                 std::size_t n, long t, const AdaMaxConfig& cfg) {
  if (t < 1) throw std::invalid_argument("adamax step index must be >= 1");
  const double bias = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double lr = cfg.alpha / bias;
  for (std::size_t i = 0; i < n; ++i) {
    const double g = static_cast<double>(grads[i]);
    if (!std::isfinite(g)) throw std::runtime_error("non-finite gradient in adamax step");
    double m = cfg.beta1 * static_cast<double>(state.m[offset + i]) + (1.0 - cfg.beta1) * g;
    double u = std::max(cfg.beta2 * static_cast<double>(state.u[offset + i]), std::abs(g));
    state.m[offset + i] = static_cast<T>(m);
    state.u[offset + i] = static_cast<T>(u);
    params[i] = static_cast<T>(static_cast<double>(params[i]) - lr * m / (u + cfg.delta));
  }
}

}  // namespace coughband
