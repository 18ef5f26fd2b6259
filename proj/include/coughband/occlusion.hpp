#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "coughband/matrix.hpp"

namespace coughband {

// Sliding-mask geometry for occlusion maps. The last anchor along each axis
// is clamped so the patch never leaves the matrix and the far edge is always
// reached; with stride <= patch every pixel is covered.
struct MaskConfig {
  int patch_height = 5;
  int patch_width = 10;
  int stride_k = 1;
  int stride_n = 1;
  double fill = 0.0;
};

// Anything that maps a spectrogram to a cough probability; keeps the map
// engine independent of the classifier implementation.
using ScoreFn = std::function<double(const Mat&)>;

struct OcclusionMap {
  Mat values;  // normalized to [0, 1]
  MaskConfig cfg;
};

struct MeanOcclusionMap {
  Mat values;
  std::string patient_id;
  int contributing = 0;  // number of averaged maps
};

struct WeightedSpectrogram {
  Mat values;
  std::string patient_id;
  double threshold_percentile = 0.0;
  double alpha = 0.0;
};

// Indices of spectrograms the model assigns p_cough >= cutoff. An empty
// result is valid (callers warn).
inline std::vector<std::size_t> select_confident(const ScoreFn& p_cough, const std::vector<Mat>& specs,
                                                 double cutoff = 0.90) {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < specs.size(); ++i)
    if (p_cough(specs[i]) >= cutoff) keep.push_back(i);
  return keep;
}

namespace detail {

inline std::vector<int> mask_anchors(int extent, int patch, int stride) {
  std::vector<int> anchors;
  const int last = extent - patch;
  for (int a = 0; a <= last; a += stride) anchors.push_back(a);
  if (anchors.empty() || anchors.back() != last) anchors.push_back(last);
  return anchors;
}

}  // namespace detail

// Importance of each pixel for the cough decision: slide a fill-valued patch
// over the spectrogram; each position contributes max(0, baseline - occluded
// p_cough) to every pixel it covers; pixels average their contributions over
// covering positions, and the map is min-max normalized (constant map -> all
// zeros). Pixels never covered (stride > patch) stay 0.
inline OcclusionMap occlusion_map(const ScoreFn& p_cough, const Mat& spec, const MaskConfig& cfg) {
  if (cfg.patch_height < 1 || cfg.patch_width < 1 || cfg.patch_height > spec.rows ||
      cfg.patch_width > spec.cols)
    throw std::invalid_argument("occlusion patch must fit inside the spectrogram");
  if (cfg.stride_k < 1 || cfg.stride_n < 1) throw std::invalid_argument("mask strides must be >= 1");

  const double baseline = p_cough(spec);
  Mat sum(spec.rows, spec.cols), cnt(spec.rows, spec.cols);
  Mat occluded = spec;
  const auto r_anchors = detail::mask_anchors(spec.rows, cfg.patch_height, cfg.stride_k);
  const auto c_anchors = detail::mask_anchors(spec.cols, cfg.patch_width, cfg.stride_n);
  for (int ra : r_anchors)
    for (int ca : c_anchors) {
      for (int i = 0; i < cfg.patch_height; ++i)
        for (int j = 0; j < cfg.patch_width; ++j)
          occluded(ra + i, ca + j) = cfg.fill;
      const double drop = std::max(0.0, baseline - p_cough(occluded));
      for (int i = 0; i < cfg.patch_height; ++i)
        for (int j = 0; j < cfg.patch_width; ++j) {
          sum(ra + i, ca + j) += drop;
          cnt(ra + i, ca + j) += 1.0;
          occluded(ra + i, ca + j) = spec(ra + i, ca + j);  // restore
        }
    }

  OcclusionMap map;
  map.cfg = cfg;
  map.values = Mat(spec.rows, spec.cols);
  for (std::size_t i = 0; i < sum.v.size(); ++i)
    map.values.v[i] = cnt.v[i] > 0.0 ? sum.v[i] / cnt.v[i] : 0.0;
  const double lo = map.values.min_value(), hi = map.values.max_value();
  if (hi > lo) {
    const double span = hi - lo;
    for (double& x : map.values.v) x = (x - lo) / span;  // division: the max lands exactly on 1
  } else {
    std::fill(map.values.v.begin(), map.values.v.end(), 0.0);
  }
  return map;
}

// Pixelwise mean of already-normalized maps.
inline MeanOcclusionMap average_maps(const std::vector<OcclusionMap>& maps) {
  if (maps.empty()) throw std::invalid_argument("average_maps needs at least one map");
  MeanOcclusionMap mean;
  mean.values = Mat(maps[0].values.rows, maps[0].values.cols);
  for (const auto& m : maps) {
    if (!m.values.same_shape(mean.values)) throw std::invalid_argument("occlusion map shape mismatch");
    for (std::size_t i = 0; i < mean.values.v.size(); ++i) mean.values.v[i] += m.values.v[i];
  }
  const double inv = 1.0 / static_cast<double>(maps.size());
  for (double& x : mean.values.v) x *= inv;
  mean.contributing = static_cast<int>(maps.size());
  return mean;
}

// Linear-interpolation percentile over all map values.
inline double percentile_threshold(const MeanOcclusionMap& map, double th) {
  return interpolated_percentile(map.values.v, th);
}

// Mean of the patient's confident spectrograms, kept where the mean map
// strictly exceeds alpha and zeroed elsewhere.
inline WeightedSpectrogram weighted_spectrogram(const std::vector<Mat>& specs,
                                                const MeanOcclusionMap& mean_map, double alpha) {
  if (specs.empty()) throw std::invalid_argument("weighted_spectrogram needs at least one spectrogram");
  WeightedSpectrogram ws;
  ws.patient_id = mean_map.patient_id;
  ws.alpha = alpha;
  ws.values = Mat(mean_map.values.rows, mean_map.values.cols);
  for (const auto& s : specs) {
    if (!s.same_shape(ws.values)) throw std::invalid_argument("spectrogram shape mismatch");
    for (std::size_t i = 0; i < ws.values.v.size(); ++i) ws.values.v[i] += s.v[i];
  }
  const double inv = 1.0 / static_cast<double>(specs.size());
  for (std::size_t i = 0; i < ws.values.v.size(); ++i)
    ws.values.v[i] = mean_map.values.v[i] > alpha ? ws.values.v[i] * inv : 0.0;
  return ws;
}

}  // namespace coughband
