#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "coughband/manifest.hpp"
#include "coughband/matrix.hpp"
#include "coughband/nn/adamax.hpp"
#include "coughband/nn/model.hpp"
#include "coughband/rng.hpp"

namespace coughband {

struct TrainConfig {
  double alpha = 0.002;
  double beta1 = 0.9;
  double beta2 = 0.999;
  int batch_size = 128;
  int epochs = 50;
  double val_fraction = 0.2;
  int folds = 5;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(val_fraction > 0.0 && val_fraction < 1.0))
      throw std::invalid_argument("val_fraction must be in (0, 1)");
    if (folds < 2) throw std::invalid_argument("folds must be >= 2");
    if (batch_size < 1 || epochs < 1) throw std::invalid_argument("batch_size and epochs must be >= 1");
  }
};

struct EpochTrace {
  double train_loss = 0.0;
  double val_loss = 0.0;
};

template <class T>
struct TrainResult {
  CoughCnn<T> model;
  std::vector<EpochTrace> trace;
};

// Per-class shuffle, then the tail val_fraction of each class goes to
// validation; keeps both splits stratified by label.
inline void stratified_split(const std::vector<int>& labels, double val_fraction, std::uint64_t seed,
                             std::vector<std::size_t>& train_idx, std::vector<std::size_t>& val_idx) {
  train_idx.clear();
  val_idx.clear();
  Rng rng(seed);
  for (int cls : {0, 1}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == cls) idx.push_back(i);
    rng.shuffle(idx);
    std::size_t n_val = static_cast<std::size_t>(std::lround(val_fraction * static_cast<double>(idx.size())));
    if (n_val >= idx.size() && !idx.empty()) n_val = idx.size() - 1;  // keep at least one for training
    for (std::size_t i = 0; i < idx.size(); ++i)
      (i < idx.size() - n_val ? train_idx : val_idx).push_back(idx[i]);
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(val_idx.begin(), val_idx.end());
}

// Minimizes cross-entropy with AdaMax over shuffled mini-batches (gradients
// averaged per batch, partial tail batch included). Deterministic for a fixed
// seed: init, shuffles, dropout masks, and the stratified train/validation
// split all derive from it. Returns the model and a per-epoch loss trace.
template <class T>
TrainResult<T> train(const std::vector<Mat>& specs, const std::vector<int>& labels,
                     const TrainConfig& cfg) {
  cfg.validate();
  if (specs.size() != labels.size()) throw std::invalid_argument("specs/labels size mismatch");
  if (specs.size() < 2 * static_cast<std::size_t>(cfg.batch_size))
    throw std::invalid_argument("need at least 2*batch_size labeled spectrograms");
  const bool has0 = std::find(labels.begin(), labels.end(), 0) != labels.end();
  const bool has1 = std::find(labels.begin(), labels.end(), 1) != labels.end();
  if (!has0 || !has1) throw std::invalid_argument("training data must contain both classes");

  std::vector<std::size_t> train_idx, val_idx;
  stratified_split(labels, cfg.val_fraction, cfg.seed, train_idx, val_idx);

  TrainResult<T> res;
  res.model = CoughCnn<T>::make(cfg.seed, specs[0].rows, specs[0].cols);
  auto& model = res.model;

  std::vector<Tensor3<T>> inputs(specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) inputs[i] = model.to_input(specs[i]);

  typename CoughCnn<T>::Grads grads;
  grads.match(model);
  AdaMaxState<T> state(model.param_count());
  AdaMaxConfig opt{cfg.alpha, cfg.beta1, cfg.beta2, 1e-8};

  typename CoughCnn<T>::Workspace ws;
  Rng run_rng(cfg.seed + 0x9e3779b97f4a7c15ull);  // shuffles + dropout masks
  long t = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    run_rng.shuffle(train_idx);
    double train_loss = 0.0;
    std::size_t batch_start = 0;
    while (batch_start < train_idx.size()) {
      const std::size_t batch_end = std::min(batch_start + cfg.batch_size, train_idx.size());
      const std::size_t bs = batch_end - batch_start;
      grads.zero();
      for (std::size_t b = batch_start; b < batch_end; ++b) {
        const std::size_t i = train_idx[b];
        model.forward(inputs[i], ws, true, &run_rng);
        train_loss += cross_entropy(ws.probs, labels[i]);
        model.backward(inputs[i], ws, labels[i], grads);
      }
      const T inv = static_cast<T>(1.0 / static_cast<double>(bs));
      ++t;
      for (auto& blk : model.blocks(grads)) {
        for (std::size_t k = 0; k < blk.n; ++k) blk.g[k] *= inv;
      }
      std::size_t offset = 0;
      for (auto& blk : model.blocks(grads)) {
        adamax_step(blk.p, blk.g, state, offset, blk.n, t, opt);
        offset += blk.n;
      }
      batch_start = batch_end;
    }
    EpochTrace tr;
    tr.train_loss = train_loss / static_cast<double>(train_idx.size());
    double val_loss = 0.0;
    for (std::size_t i : val_idx) {
      model.forward(inputs[i], ws, false, nullptr);
      val_loss += cross_entropy(ws.probs, labels[i]);
    }
    tr.val_loss = val_idx.empty() ? 0.0 : val_loss / static_cast<double>(val_idx.size());
    if (!std::isfinite(tr.train_loss) || !std::isfinite(tr.val_loss))
      throw std::runtime_error("NaN loss at epoch " + std::to_string(epoch));
    res.trace.push_back(tr);
  }
  return res;
}

// Patient-grouped cross-validation plan: patients shuffled once by seed, then
// dealt into `folds` groups with sizes differing by at most one; fold i holds
// out group i for testing. Clip-level 80/20 train/validation stratification
// happens inside train() on the fold's training clips.
struct FoldPlan {
  struct Fold {
    std::vector<std::string> train_patients, test_patients;
  };
  std::vector<Fold> folds;
};

inline FoldPlan make_folds(const DatasetManifest& manifest, int folds, std::uint64_t seed) {
  if (folds < 2) throw std::invalid_argument("folds must be >= 2");
  std::vector<std::string> patients = manifest.patient_ids();
  if (patients.size() < static_cast<std::size_t>(folds))
    throw std::invalid_argument("fewer patients than folds");
  Rng rng(seed);
  rng.shuffle(patients);

  const std::size_t n = patients.size();
  const std::size_t base = n / folds, extra = n % folds;
  FoldPlan plan;
  plan.folds.resize(folds);
  std::size_t pos = 0;
  for (int f = 0; f < folds; ++f) {
    const std::size_t size = base + (static_cast<std::size_t>(f) < extra ? 1 : 0);
    auto& fold = plan.folds[f];
    fold.test_patients.assign(patients.begin() + pos, patients.begin() + pos + size);
    for (std::size_t i = 0; i < n; ++i)
      if (i < pos || i >= pos + size) fold.train_patients.push_back(patients[i]);
    std::sort(fold.test_patients.begin(), fold.test_patients.end());
    std::sort(fold.train_patients.begin(), fold.train_patients.end());
    pos += size;
  }
  return plan;
}

}  // namespace coughband
