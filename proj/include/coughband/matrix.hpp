#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

namespace coughband {

// Working-rate geometry shared by the whole pipeline: 1-second clips at
// 8820 Hz are cut into 100 non-overlapping 88-sample frames, each zero-padded
// to an 89-point DFT whose one-sided half gives 45 frequency bins.
inline constexpr int kFreqBins = 45;
inline constexpr int kTimeFrames = 100;
inline constexpr int kFrameLen = 88;
inline constexpr int kDftLen = 89;
inline constexpr double kWorkRateHz = 8820.0;
inline constexpr int kClipLen = 8820;

inline double bin_freq_hz(int k) { return k * kWorkRateHz / kDftLen; }

// Dense row-major double matrix. Spectrograms are rows = frequency bins,
// cols = time frames.
struct Mat {
  int rows = 0, cols = 0;
  std::vector<double> v;

  Mat() = default;
  Mat(int r, int c, double fill = 0.0)
      : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, fill) {}

  double& operator()(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }

  bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }

  double min_value() const { return *std::min_element(v.begin(), v.end()); }
  double max_value() const { return *std::max_element(v.begin(), v.end()); }

  bool all_finite() const {
    for (double x : v)
      if (!std::isfinite(x)) return false;
    return true;
  }
};

// Shortest round-trippable-enough decimal rendering used by every CSV/JSON
// writer, so identical values always serialize identically.
inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", x);
  return buf;
}

// Percentile with linear interpolation between order statistics: rank
// r = (pct/100) * (M-1), value = lerp between floor(r) and ceil(r).
inline double interpolated_percentile(std::vector<double> vals, double pct) {
  if (vals.empty()) throw std::invalid_argument("percentile of empty set");
  if (!(pct >= 0.0 && pct <= 100.0)) throw std::invalid_argument("percentile outside [0, 100]");
  std::sort(vals.begin(), vals.end());
  const double r = pct / 100.0 * static_cast<double>(vals.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(r));
  const std::size_t hi = static_cast<std::size_t>(std::ceil(r));
  const double frac = r - static_cast<double>(lo);
  return vals[lo] + (vals[hi] - vals[lo]) * frac;
}

}  // namespace coughband
