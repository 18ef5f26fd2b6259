#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "coughband/matrix.hpp"
#include "coughband/wav.hpp"

namespace coughband {

enum class ClipLabel { kCough, kNonCough, kUnlabeled };

inline const char* to_string(ClipLabel l) {
  switch (l) {
    case ClipLabel::kCough: return "cough";
    case ClipLabel::kNonCough: return "non_cough";
    default: return "unlabeled";
  }
}

inline ClipLabel clip_label_from_string(const std::string& s) {
  if (s == "cough") return ClipLabel::kCough;
  if (s == "non_cough") return ClipLabel::kNonCough;
  if (s == "unlabeled") return ClipLabel::kUnlabeled;
  throw std::runtime_error("unknown clip label: " + s);
}

// Annotated time window on a recording, in seconds.
struct LabelWindow {
  double start_s = 0.0, end_s = 0.0;
  ClipLabel label = ClipLabel::kUnlabeled;
};

// One second of audio at the working rate.
struct Clip {
  std::vector<double> samples;  // length kClipLen
  std::string patient_id;
  ClipLabel label = ClipLabel::kUnlabeled;
};

// Anti-aliased integer-factor downsampler: 127-tap windowed-sinc low-pass
// (Hamming window, cutoff 0.9x the new Nyquist, unity DC gain), group delay
// compensated, then every factor-th sample kept. Output length is
// floor(len / factor). Factor 1 is a pass-through.
inline PcmSignal decimate(const PcmSignal& in, int factor) {
  if (factor < 1) throw std::invalid_argument("decimation factor must be >= 1");
  PcmSignal out;
  out.sample_rate = in.sample_rate / factor;
  const std::size_t n_out = in.samples.size() / static_cast<std::size_t>(factor);
  out.samples.resize(n_out);
  if (factor == 1) {
    out.samples = in.samples;
    return out;
  }

  constexpr int kTaps = 127;
  constexpr int kHalf = kTaps / 2;  // 63
  const double fc = 0.9 * 0.5 / factor;  // cycles per input sample
  std::vector<double> h(kTaps);
  double sum = 0.0;
  for (int i = 0; i < kTaps; ++i) {
    const double t = i - kHalf;
    const double x = 2.0 * fc * t;
    const double sinc = t == 0.0 ? 1.0 : std::sin(3.14159265358979323846 * x) / (3.14159265358979323846 * x);
    const double w = 0.54 - 0.46 * std::cos(2.0 * 3.14159265358979323846 * i / (kTaps - 1));
    h[i] = 2.0 * fc * sinc * w;
    sum += h[i];
  }
  for (double& c : h) c /= sum;  // unity DC gain

  const std::ptrdiff_t len = static_cast<std::ptrdiff_t>(in.samples.size());
  for (std::size_t m = 0; m < n_out; ++m) {
    const std::ptrdiff_t center = static_cast<std::ptrdiff_t>(m) * factor;
    double acc = 0.0;
    for (int i = 0; i < kTaps; ++i) {
      const std::ptrdiff_t j = center + kHalf - i;  // delay-compensated
      if (j >= 0 && j < len) acc += h[i] * in.samples[j];
    }
    out.samples[m] = acc;
  }
  return out;
}

// Cuts a working-rate signal into consecutive 1-second clips (tail shorter
// than a second is dropped). A clip is labeled cough/non-cough when at least
// half of it overlaps windows of that label, cough taking precedence.
inline std::vector<Clip> segment_clips(const PcmSignal& in, const std::string& patient_id,
                                       const std::vector<LabelWindow>& windows) {
  if (in.sample_rate != kWorkRateHz)
    throw std::invalid_argument("segment_clips expects the working rate (8820 Hz)");
  const std::size_t n_clips = in.samples.size() / kClipLen;
  std::vector<Clip> clips;
  clips.reserve(n_clips);
  for (std::size_t c = 0; c < n_clips; ++c) {
    Clip clip;
    clip.patient_id = patient_id;
    clip.samples.assign(in.samples.begin() + c * kClipLen, in.samples.begin() + (c + 1) * kClipLen);
    const double t0 = static_cast<double>(c);
    const double t1 = t0 + 1.0;
    double cough = 0.0, non_cough = 0.0;
    for (const auto& w : windows) {
      const double ov = std::min(t1, w.end_s) - std::max(t0, w.start_s);
      if (ov <= 0.0) continue;
      if (w.label == ClipLabel::kCough) cough += ov;
      else if (w.label == ClipLabel::kNonCough) non_cough += ov;
    }
    clip.label = cough >= 0.5 ? ClipLabel::kCough
               : non_cough >= 0.5 ? ClipLabel::kNonCough
                                  : ClipLabel::kUnlabeled;
    clips.push_back(std::move(clip));
  }
  return clips;
}

}  // namespace coughband
