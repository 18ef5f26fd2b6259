#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "coughband/stats/normal.hpp"

namespace coughband {

struct ShapiroResult {
  double w = 0.0;
  double p = 0.0;
  bool gaussian = false;
  int n = 0;
  bool degenerate = false;  // constant sample: W undefined, reported non-Gaussian
  std::string note;
};

// Shapiro-Wilk test with Royston's 1995 approximation (valid 3 <= n <= 5000):
// Blom-score-based weights with polynomial tail corrections, then a
// normalizing transform of W to a standard normal deviate for the p-value.
inline ShapiroResult shapiro_wilk(std::vector<double> x, double alpha = 0.05) {
  const int n = static_cast<int>(x.size());
  if (n < 3) throw std::invalid_argument("shapiro_wilk needs n >= 3");
  if (n > 5000) throw std::invalid_argument("shapiro_wilk supports n <= 5000");
  std::sort(x.begin(), x.end());

  ShapiroResult res;
  res.n = n;
  if (x.front() == x.back()) {
    res.degenerate = true;
    res.gaussian = false;
    res.p = 0.0;
    res.w = 0.0;
    res.note = "constant sample";
    return res;
  }

  // Blom scores m_i = Phi^-1((i - 0.375)/(n + 0.25)), i = 1..n.
  std::vector<double> m(n);
  double summ2 = 0.0;
  for (int i = 0; i < n; ++i) {
    m[i] = normal_quantile((i + 1 - 0.375) / (n + 0.25));
    summ2 += m[i] * m[i];
  }
  const double rsn = 1.0 / std::sqrt(static_cast<double>(n));

  // Weights: normalized scores with corrected end weights (Royston's
  // polynomials in n^-1/2 for a_n and a_{n-1}).
  auto poly = [](const double* c, int nc, double v) {
    double r = 0.0;
    for (int i = nc - 1; i >= 0; --i) r = r * v + c[i];
    return r;
  };
  static const double c1[6] = {0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056};
  static const double c2[6] = {0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633};

  std::vector<double> a(n);
  const double sqrt_summ2 = std::sqrt(summ2);
  const double an = m[n - 1] / sqrt_summ2 + poly(c1, 6, rsn);
  if (n == 3) {
    // the middle score is 0, so the generic normalization divides 0/0;
    // the exact weights are +-sqrt(1/2)
    a[0] = -std::sqrt(0.5);
    a[1] = 0.0;
    a[2] = std::sqrt(0.5);
  } else if (n > 5) {
    const double an1 = m[n - 2] / sqrt_summ2 + poly(c2, 6, rsn);
    const double phi = (summ2 - 2.0 * m[n - 1] * m[n - 1] - 2.0 * m[n - 2] * m[n - 2]) /
                       (1.0 - 2.0 * an * an - 2.0 * an1 * an1);
    const double sp = std::sqrt(phi);
    a[n - 1] = an;
    a[n - 2] = an1;
    a[0] = -an;
    a[1] = -an1;
    for (int i = 2; i < n - 2; ++i) a[i] = m[i] / sp;
  } else {
    const double phi = (summ2 - 2.0 * m[n - 1] * m[n - 1]) / (1.0 - 2.0 * an * an);
    const double sp = std::sqrt(phi);
    a[n - 1] = an;
    a[0] = -an;
    for (int i = 1; i < n - 1; ++i) a[i] = m[i] / sp;
  }

  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double num = 0.0, den = 0.0;
  for (int i = 0; i < n; ++i) {
    num += a[i] * x[i];
    den += (x[i] - mean) * (x[i] - mean);
  }
  double w = num * num / den;
  if (w > 1.0) w = 1.0;
  res.w = w;

  // p-value regimes (Royston 1995).
  double p;
  if (n == 3) {
    constexpr double kPi6 = 1.90985931710274;    // 6/pi
    constexpr double kStqr = 1.04719755119660;   // asin(sqrt(3/4))
    p = kPi6 * (std::asin(std::sqrt(w)) - kStqr);
    p = std::clamp(p, 0.0, 1.0);
  } else {
    const double lw = std::log(1.0 - w);
    double mu, sigma, z;
    if (n <= 11) {
      const double g = -2.273 + 0.459 * n;
      if (lw >= g) {  // W too small for the transform: decisively non-Gaussian
        res.p = 0.0;
        res.gaussian = false;
        return res;
      }
      mu = 0.5440 - 0.39978 * n + 0.025054 * n * n - 0.0006714 * n * n * n;
      sigma = std::exp(1.3822 - 0.77857 * n + 0.062767 * n * n - 0.0020322 * n * n * n);
      z = (-std::log(g - lw) - mu) / sigma;
    } else {
      const double ln_n = std::log(static_cast<double>(n));
      mu = -1.5861 - 0.31082 * ln_n - 0.083751 * ln_n * ln_n + 0.0038915 * ln_n * ln_n * ln_n;
      sigma = std::exp(-0.4803 - 0.082676 * ln_n + 0.0030302 * ln_n * ln_n);
      z = (lw - mu) / sigma;
    }
    p = 1.0 - normal_cdf(z);
  }
  res.p = std::clamp(p, 0.0, 1.0);
  res.gaussian = res.p >= alpha;
  return res;
}

}  // namespace coughband
