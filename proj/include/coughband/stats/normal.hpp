#pragma once

#include <cmath>
#include <stdexcept>

namespace coughband {

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / 1.4142135623730951); }

inline double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / 2.5066282746310002;  // sqrt(2*pi)
}

// Inverse standard normal CDF via bracketed Newton iterations on erfc-based
// normal_cdf: bisection narrows the bracket, Newton polishes to machine
// precision. No magic rational approximations to mistype.
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal_quantile needs p in (0, 1)");
  double lo = -40.0, hi = 40.0;
  double x = 0.0;
  for (int i = 0; i < 40; ++i) {
    x = 0.5 * (lo + hi);
    if (normal_cdf(x) < p) lo = x; else hi = x;
  }
  for (int i = 0; i < 8; ++i) {
    const double f = normal_cdf(x) - p;
    const double d = normal_pdf(x);
    if (d <= 0.0) break;
    const double step = f / d;
    x -= step;
    if (x < lo) x = lo;
    if (x > hi) x = hi;
    if (std::abs(step) < 1e-15 * (1.0 + std::abs(x))) break;
  }
  return x;
}

}  // namespace coughband
