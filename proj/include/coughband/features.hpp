#pragma once

#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "coughband/bands.hpp"
#include "coughband/matrix.hpp"
#include "coughband/occlusion.hpp"

namespace coughband {

// Spectral features of a weighted spectrogram, per band. Time averages of the
// ratio-type features skip frames with zero band power (zero total power for
// the power-ratio features): masked spectrograms routinely contain all-zero
// columns and 0/0 must stay defined. A feature whose every frame is skipped
// is undefined (empty optional). Flux is a plain sum and never skips frames.

namespace detail {

inline double band_power(const Mat& ws, const BandDefinition& band, int n) {
  double s = 0.0;
  for (int k : band.bins) s += ws(k, n);
  return s;
}

inline double total_power(const Mat& ws, int n) {
  double s = 0.0;
  for (int k = 0; k < ws.rows; ++k) s += ws(k, n);
  return s;
}

}  // namespace detail

// S_j: the spectrogram with all bins outside the band zeroed.
inline Mat band_slice(const Mat& ws, const BandDefinition& band) {
  Mat out(ws.rows, ws.cols);
  for (int k : band.bins)
    for (int n = 0; n < ws.cols; ++n) out(k, n) = ws(k, n);
  return out;
}

// Mean over frames of band power / total frame power; frames with zero band
// or zero total power are skipped.
inline std::optional<double> relative_power(const Mat& ws, const BandDefinition& band) {
  double acc = 0.0;
  int count = 0;
  for (int n = 0; n < ws.cols; ++n) {
    const double tot = detail::total_power(ws, n);
    const double bp = detail::band_power(ws, band, n);
    if (tot == 0.0 || bp == 0.0) continue;
    acc += bp / tot;
    ++count;
  }
  if (count == 0) return std::nullopt;
  return acc / count;
}

// Mean over frames of non-DC power / total power; only zero-total frames are
// skipped, so a DC-only spectrogram yields 0.
inline std::optional<double> ac_power(const Mat& ws) {
  double acc = 0.0;
  int count = 0;
  for (int n = 0; n < ws.cols; ++n) {
    const double tot = detail::total_power(ws, n);
    if (tot == 0.0) continue;
    acc += (tot - ws(0, n)) / tot;
    ++count;
  }
  if (count == 0) return std::nullopt;
  return acc / count;
}

// Power-weighted mean frequency of one frame.
inline std::optional<double> spectral_centroid(const Mat& ws, const BandDefinition& band, int n) {
  const double bp = detail::band_power(ws, band, n);
  if (bp == 0.0) return std::nullopt;
  double acc = 0.0;
  for (int k : band.bins) acc += bin_freq_hz(k) * ws(k, n);
  return acc / bp;
}

// Mean over frames of the power-weighted variance of f[k] around the frame
// centroid (Hz^2).
inline std::optional<double> spectral_bandwidth(const Mat& ws, const BandDefinition& band) {
  double acc = 0.0;
  int count = 0;
  for (int n = 0; n < ws.cols; ++n) {
    const double bp = detail::band_power(ws, band, n);
    if (bp == 0.0) continue;
    double c = 0.0;
    for (int k : band.bins) c += bin_freq_hz(k) * ws(k, n);
    c /= bp;
    double var = 0.0;
    for (int k : band.bins) {
      const double d = bin_freq_hz(k) - c;
      var += d * d * ws(k, n);
    }
    acc += var / bp;
    ++count;
  }
  if (count == 0) return std::nullopt;
  return acc / count;
}

// Mean over frames of max bin / (C * band power), C = 1/(f_max - f_min + 1)
// over the band's bin frequencies in Hz.
inline std::optional<double> spectral_crest(const Mat& ws, const BandDefinition& band) {
  const double f_lo = bin_freq_hz(band.bins.front());
  const double f_hi = bin_freq_hz(band.bins.back());
  const double c = 1.0 / (f_hi - f_lo + 1.0);
  double acc = 0.0;
  int count = 0;
  for (int n = 0; n < ws.cols; ++n) {
    const double bp = detail::band_power(ws, band, n);
    if (bp == 0.0) continue;
    double mx = 0.0;
    for (int k : band.bins) mx = std::max(mx, ws(k, n));
    acc += mx / (c * bp);
    ++count;
  }
  if (count == 0) return std::nullopt;
  return acc / count;
}

// Mean over frames of geometric mean / arithmetic mean of the band bins,
// floored at 1e-10 before both means.
inline std::optional<double> spectral_flatness(const Mat& ws, const BandDefinition& band) {
  constexpr double kFloor = 1e-10;
  double acc = 0.0;
  int count = 0;
  const double nb = static_cast<double>(band.bins.size());
  for (int n = 0; n < ws.cols; ++n) {
    if (detail::band_power(ws, band, n) == 0.0) continue;
    double log_sum = 0.0, am = 0.0;
    for (int k : band.bins) {
      const double v = std::max(ws(k, n), kFloor);
      log_sum += std::log(v);
      am += v;
    }
    acc += std::exp(log_sum / nb) / (am / nb);
    ++count;
  }
  if (count == 0) return std::nullopt;
  return acc / count;
}

// (1/(N-1)) * sum over consecutive frame pairs of the raw bin differences,
// exactly as the defining sum is written (no squaring); telescopes to
// (last frame band power - first frame band power)/(N-1). All frames
// participate.
inline double spectral_flux(const Mat& ws, const BandDefinition& band) {
  double acc = 0.0;
  for (int n = 1; n < ws.cols; ++n)
    for (int k : band.bins) acc += ws(k, n) - ws(k, n - 1);
  return acc / (ws.cols - 1);
}

// Mean over frames of the order-q Renyi entropy of the normalized band
// spectrum, natural log.
inline std::optional<double> renyi_entropy(const Mat& ws, const BandDefinition& band, double q = 4.0) {
  double acc = 0.0;
  int count = 0;
  for (int n = 0; n < ws.cols; ++n) {
    const double bp = detail::band_power(ws, band, n);
    if (bp == 0.0) continue;
    double sum_pq = 0.0;
    for (int k : band.bins) {
      const double p = ws(k, n) / bp;
      sum_pq += std::pow(p, q);
    }
    acc += std::log(sum_pq) / (1.0 - q);
    ++count;
  }
  if (count == 0) return std::nullopt;
  return acc / count;
}

// Mean over frames of f[k85], the smallest band bin whose cumulative band
// power reaches 85% of the frame's band power.
inline std::optional<double> spectral_rolloff(const Mat& ws, const BandDefinition& band,
                                              double fraction = 0.85) {
  double acc = 0.0;
  int count = 0;
  for (int n = 0; n < ws.cols; ++n) {
    const double bp = detail::band_power(ws, band, n);
    if (bp == 0.0) continue;
    const double target = fraction * bp;
    double cum = 0.0;
    int k85 = band.bins.back();
    for (int k : band.bins) {
      cum += ws(k, n);
      if (cum >= target) { k85 = k; break; }
    }
    acc += bin_freq_hz(k85);
    ++count;
  }
  if (count == 0) return std::nullopt;
  return acc / count;
}

inline const std::vector<std::string>& feature_names() {
  static const std::vector<std::string> names = {"RP", "SpBW", "SpCF", "SpF", "SpFx", "SpRE", "SpR"};
  return names;
}

struct BandFeatures {
  std::string band_id;
  // order matches feature_names(); for the global band the RP slot holds AC
  std::vector<std::optional<double>> values;
};

struct BandFeatureVector {
  std::string patient_id;
  double th = 0.0;
  std::vector<BandFeatures> bands;  // B1..B5 then B
};

// All seven features for each sub-band plus the global band (AC replaces RP
// there). A band with no energy anywhere yields all-undefined entries — a
// fully masked band was never observed, so no feature of it is reported
// (flux included, although the bare flux sum of a zero slice would be 0).
inline BandFeatureVector feature_vector(const WeightedSpectrogram& ws, double th) {
  BandFeatureVector out;
  out.patient_id = ws.patient_id;
  out.th = th;
  for (const auto& band : all_bands()) {
    BandFeatures bf;
    bf.band_id = band.id;
    bool any_energy = false;
    for (int n = 0; n < ws.values.cols && !any_energy; ++n)
      if (detail::band_power(ws.values, band, n) != 0.0) any_energy = true;
    if (!any_energy) {
      bf.values.assign(7, std::nullopt);
      out.bands.push_back(std::move(bf));
      continue;
    }
    bf.values.push_back(band.id == "B" ? ac_power(ws.values) : relative_power(ws.values, band));
    bf.values.push_back(spectral_bandwidth(ws.values, band));
    bf.values.push_back(spectral_crest(ws.values, band));
    bf.values.push_back(spectral_flatness(ws.values, band));
    bf.values.push_back(spectral_flux(ws.values, band));
    bf.values.push_back(renyi_entropy(ws.values, band));
    bf.values.push_back(spectral_rolloff(ws.values, band));
    out.bands.push_back(std::move(bf));
  }
  return out;
}

// Feature table CSV: one row per (patient, Th, band); undefined cells are
// empty. The RP column of band-B rows carries AC.
inline std::string feature_csv_header() {
  std::string h = "patient_id,Th,band";
  for (const auto& n : feature_names()) h += "," + n;
  return h + "\n";
}

inline std::string feature_csv_rows(const BandFeatureVector& fv) {
  std::string out;
  for (const auto& bf : fv.bands) {
    out += fv.patient_id + "," + format_double(fv.th) + "," + bf.band_id;
    for (const auto& v : bf.values) out += "," + (v ? format_double(*v) : std::string());
    out += "\n";
  }
  return out;
}

}  // namespace coughband
