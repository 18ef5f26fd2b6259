#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "coughband/audio.hpp"
#include "coughband/matrix.hpp"

namespace coughband {

// 45x100 log-normalized one-sided PSD of a 1-second clip. Rows are frequency
// bins at f[k] = k * 8820 / 89 Hz, columns are 10 ms frames.
struct Spectrogram {
  Mat values;  // in [0, 1]
};

namespace detail {

struct DftTables {
  std::vector<double> window;                 // Hann, length 88
  std::vector<double> cos_t, sin_t;           // [k * kFrameLen + n]
  DftTables() {
    window.resize(kFrameLen);
    for (int n = 0; n < kFrameLen; ++n)
      window[n] = 0.5 * (1.0 - std::cos(2.0 * 3.14159265358979323846 * n / (kFrameLen - 1)));
    cos_t.resize(static_cast<std::size_t>(kFreqBins) * kFrameLen);
    sin_t.resize(static_cast<std::size_t>(kFreqBins) * kFrameLen);
    for (int k = 0; k < kFreqBins; ++k)
      for (int n = 0; n < kFrameLen; ++n) {
        const double a = 2.0 * 3.14159265358979323846 * k * n / kDftLen;
        cos_t[static_cast<std::size_t>(k) * kFrameLen + n] = std::cos(a);
        sin_t[static_cast<std::size_t>(k) * kFrameLen + n] = std::sin(a);
      }
  }
};

inline const DftTables& dft_tables() {
  static const DftTables t;
  return t;
}

}  // namespace detail

// One-sided PSD: frame n is samples [88n, 88n+88), Hann-windowed, zero-padded
// to an 89-point DFT; PSD[k][n] = |X_n[k]|^2 / 89 for k = 0..44, which makes
// PSD[0] + 2*sum(PSD[1..44]) equal the windowed frame energy (odd length, so
// no Nyquist bin).
inline Mat raw_psd(const std::vector<double>& samples) {
  if (samples.size() != static_cast<std::size_t>(kClipLen))
    throw std::invalid_argument("raw_psd expects 8820 samples");
  const auto& t = detail::dft_tables();
  Mat psd(kFreqBins, kTimeFrames);
  std::array<double, kFrameLen> xw;
  for (int n = 0; n < kTimeFrames; ++n) {
    const double* frame = samples.data() + static_cast<std::size_t>(n) * kFrameLen;
    for (int i = 0; i < kFrameLen; ++i) xw[i] = frame[i] * t.window[i];
    for (int k = 0; k < kFreqBins; ++k) {
      const double* ct = t.cos_t.data() + static_cast<std::size_t>(k) * kFrameLen;
      const double* st = t.sin_t.data() + static_cast<std::size_t>(k) * kFrameLen;
      double re = 0.0, im = 0.0;
      for (int i = 0; i < kFrameLen; ++i) {
        re += xw[i] * ct[i];
        im -= xw[i] * st[i];
      }
      psd(k, n) = (re * re + im * im) / kDftLen;
    }
  }
  return psd;
}

// log10(x + 1e-10) followed by per-spectrogram min-max scaling to [0, 1];
// a constant input maps to all zeros.
inline Mat log_normalize(const Mat& raw) {
  constexpr double kEps = 1e-10;
  Mat out(raw.rows, raw.cols);
  for (std::size_t i = 0; i < raw.v.size(); ++i) {
    const double x = raw.v[i];
    if (!(x >= 0.0) || !std::isfinite(x))
      throw std::invalid_argument("log_normalize expects finite nonnegative input");
    out.v[i] = std::log10(x + kEps);
  }
  const double lo = out.min_value(), hi = out.max_value();
  if (hi == lo) {
    std::fill(out.v.begin(), out.v.end(), 0.0);
    return out;
  }
  const double span = hi - lo;
  for (double& x : out.v) x = (x - lo) / span;  // division: the max lands exactly on 1
  return out;
}

inline Spectrogram compute_spectrogram(const Clip& clip) {
  if (clip.samples.size() != static_cast<std::size_t>(kClipLen))
    throw std::invalid_argument("compute_spectrogram expects a 1-second clip at 8820 Hz");
  return Spectrogram{log_normalize(raw_psd(clip.samples))};
}

}  // namespace coughband
