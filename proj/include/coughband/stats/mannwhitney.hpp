#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "coughband/stats/normal.hpp"

namespace coughband {

struct MannWhitneyResult {
  double u = 0.0;  // min(U1, U2)
  double p = 1.0;  // two-sided
  bool exact = false;
};

// Exact null distribution of U1 as counts over u = 0..n1*n2, built from the
// classic recurrence on the largest pooled value: it is either a sample-1
// value (beating all n2 remaining sample-2 values) or a sample-2 value:
//   f(i, j, u) = f(i-1, j, u-j) + f(i, j-1, u),  f(i, 0, 0) = f(0, j, 0) = 1.
inline std::vector<double> mann_whitney_exact_counts(int n1, int n2) {
  const int umax = n1 * n2;
  const auto at = [&](int i, int j) -> std::size_t {
    return (static_cast<std::size_t>(i) * (n2 + 1) + j) * (umax + 1);
  };
  std::vector<double> f(static_cast<std::size_t>(n1 + 1) * (n2 + 1) * (umax + 1), 0.0);
  for (int i = 0; i <= n1; ++i) f[at(i, 0)] = 1.0;
  for (int j = 0; j <= n2; ++j) f[at(0, j)] = 1.0;
  for (int i = 1; i <= n1; ++i)
    for (int j = 1; j <= n2; ++j) {
      double* cur = f.data() + at(i, j);
      const double* up = f.data() + at(i - 1, j);
      const double* left = f.data() + at(i, j - 1);
      for (int u = 0; u <= umax; ++u) cur[u] = (u >= j ? up[u - j] : 0.0) + left[u];
    }
  return {f.begin() + static_cast<std::ptrdiff_t>(at(n1, n2)),
          f.begin() + static_cast<std::ptrdiff_t>(at(n1, n2)) + umax + 1};
}

// Two-sided Mann-Whitney with midrank ties. Exact enumeration of the U
// distribution when n1+n2 <= 16 and the pooled sample is tie-free; otherwise
// the normal approximation with tie and continuity corrections.
inline MannWhitneyResult mann_whitney_u(const std::vector<double>& a, const std::vector<double>& b) {
  const int n1 = static_cast<int>(a.size()), n2 = static_cast<int>(b.size());
  if (n1 < 1 || n2 < 1) throw std::invalid_argument("mann_whitney_u needs n >= 1 per sample");

  struct Tagged { double v; int who; };
  std::vector<Tagged> pool;
  pool.reserve(a.size() + b.size());
  for (double v : a) pool.push_back({v, 0});
  for (double v : b) pool.push_back({v, 1});
  std::sort(pool.begin(), pool.end(), [](const Tagged& x, const Tagged& y) { return x.v < y.v; });

  const int n = n1 + n2;
  std::vector<double> rank(n);
  bool ties = false;
  double tie_term = 0.0;  // sum of t^3 - t over tie groups
  for (int i = 0; i < n;) {
    int j = i;
    while (j < n && pool[j].v == pool[i].v) ++j;
    const double r = 0.5 * (i + 1 + j);  // midrank of positions i+1..j
    for (int k = i; k < j; ++k) rank[k] = r;
    const int t = j - i;
    if (t > 1) {
      ties = true;
      tie_term += static_cast<double>(t) * t * t - t;
    }
    i = j;
  }

  double r1 = 0.0;
  for (int i = 0; i < n; ++i)
    if (pool[i].who == 0) r1 += rank[i];
  const double u1 = r1 - 0.5 * n1 * (n1 + 1);
  const double u2 = static_cast<double>(n1) * n2 - u1;
  MannWhitneyResult res;
  res.u = std::min(u1, u2);

  if (n <= 16 && !ties) {
    res.exact = true;
    const auto counts = mann_whitney_exact_counts(n1, n2);
    double total = 0.0;
    for (double c : counts) total += c;
    double tail = 0.0;
    for (int u = 0; u < static_cast<int>(counts.size()); ++u) {
      if (u <= std::min(u1, u2) + 1e-9) tail += counts[u];
      if (u >= std::max(u1, u2) - 1e-9) tail += counts[u];
    }
    res.p = std::min(1.0, tail / total);
    return res;
  }

  const double mu = 0.5 * n1 * n2;
  const double nn = static_cast<double>(n);
  const double var = (static_cast<double>(n1) * n2 / 12.0) *
                     ((nn + 1.0) - tie_term / (nn * (nn - 1.0)));
  if (var <= 0.0) {  // every pooled value identical
    res.p = 1.0;
    return res;
  }
  const double z = (res.u - mu + 0.5) / std::sqrt(var);  // continuity toward the mean
  res.p = std::min(1.0, 2.0 * normal_cdf(z));
  return res;
}

}  // namespace coughband
