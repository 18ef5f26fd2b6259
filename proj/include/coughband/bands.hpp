#pragma once

#include <string>
#include <vector>

#include "coughband/matrix.hpp"

namespace coughband {

// Frequency sub-band over the 45-bin axis: bins k with f[k] in [lo_hz, hi_hz).
struct BandDefinition {
  std::string id;
  double lo_hz = 0.0, hi_hz = 0.0;
  std::vector<int> bins;
};

namespace detail {

inline BandDefinition make_band(const std::string& id, double lo, double hi) {
  BandDefinition b{id, lo, hi, {}};
  for (int k = 0; k < kFreqBins; ++k) {
    const double f = bin_freq_hz(k);
    if (f >= lo && f < hi) b.bins.push_back(k);
  }
  return b;
}

}  // namespace detail

// The five analysis sub-bands partition the 0..44 bin axis.
inline const std::vector<BandDefinition>& subbands() {
  static const std::vector<BandDefinition> bands = {
      detail::make_band("B1", 0.0, 500.0),
      detail::make_band("B2", 500.0, 1000.0),
      detail::make_band("B3", 1000.0, 1500.0),
      detail::make_band("B4", 1500.0, 2000.0),
      detail::make_band("B5", 2000.0, 4410.0),
  };
  return bands;
}

inline const BandDefinition& global_band() {
  static const BandDefinition b = detail::make_band("B", 0.0, 4410.0);
  return b;
}

// B1..B5 then the global band, the order feature tables use.
inline std::vector<BandDefinition> all_bands() {
  std::vector<BandDefinition> out = subbands();
  out.push_back(global_band());
  return out;
}

}  // namespace coughband
