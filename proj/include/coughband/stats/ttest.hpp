#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace coughband {

// Regularized incomplete beta I_x(a, b) via the Lentz continued fraction.
inline double regularized_incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  auto contfrac = [](double a, double b, double x) {
    constexpr double kTiny = 1e-300;
    constexpr double kEps = 1e-15;
    double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0, d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 300; ++m) {
      const int m2 = 2 * m;
      double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
      d = 1.0 + aa * d;
      if (std::abs(d) < kTiny) d = kTiny;
      c = 1.0 + aa / c;
      if (std::abs(c) < kTiny) c = kTiny;
      d = 1.0 / d;
      h *= d * c;
      aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
      d = 1.0 + aa * d;
      if (std::abs(d) < kTiny) d = kTiny;
      c = 1.0 + aa / c;
      if (std::abs(c) < kTiny) c = kTiny;
      d = 1.0 / d;
      const double del = d * c;
      h *= del;
      if (std::abs(del - 1.0) < kEps) break;
    }
    return h;
  };
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log(1.0 - x);
  const double front = std::exp(ln_front);
  // converge faster on the smaller tail
  if (x < (a + 1.0) / (a + b + 2.0)) return front * contfrac(a, b, x) / a;
  return 1.0 - std::exp(std::lgamma(a + b) - std::lgamma(b) - std::lgamma(a) +
                        b * std::log(1.0 - x) + a * std::log(x)) *
                   contfrac(b, a, 1.0 - x) / b;
}

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  int df = 0;
  bool degenerate = false;  // zero pooled variance
};

// Classic pooled-variance unpaired two-sided Student t-test,
// df = n1 + n2 - 2; p from the t CDF via the incomplete beta. Zero pooled
// variance is flagged: equal means give p = 1 by convention, unequal means
// p = 0.
inline TTestResult t_test_unpaired(const std::vector<double>& a, const std::vector<double>& b) {
  const int n1 = static_cast<int>(a.size()), n2 = static_cast<int>(b.size());
  if (n1 < 2 || n2 < 2) throw std::invalid_argument("t-test needs n >= 2 per sample");
  double m1 = 0.0, m2 = 0.0;
  for (double v : a) m1 += v;
  for (double v : b) m2 += v;
  m1 /= n1;
  m2 /= n2;
  double ss = 0.0;
  for (double v : a) ss += (v - m1) * (v - m1);
  for (double v : b) ss += (v - m2) * (v - m2);
  TTestResult res;
  res.df = n1 + n2 - 2;
  const double sp2 = ss / res.df;
  if (sp2 == 0.0) {
    res.degenerate = true;
    if (m1 == m2) {
      res.t = 0.0;
      res.p = 1.0;
    } else {
      res.t = m1 < m2 ? -std::numeric_limits<double>::infinity()
                      : std::numeric_limits<double>::infinity();
      res.p = 0.0;
    }
    return res;
  }
  res.t = (m1 - m2) / std::sqrt(sp2 * (1.0 / n1 + 1.0 / n2));
  const double df = static_cast<double>(res.df);
  res.p = regularized_incomplete_beta(df / 2.0, 0.5, df / (df + res.t * res.t));
  if (res.p > 1.0) res.p = 1.0;
  if (res.p < 0.0) res.p = 0.0;
  return res;
}

}  // namespace coughband
