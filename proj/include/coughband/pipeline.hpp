#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "coughband/audio.hpp"
#include "coughband/bands.hpp"
#include "coughband/blob_io.hpp"
#include "coughband/boxplot.hpp"
#include "coughband/features.hpp"
#include "coughband/manifest.hpp"
#include "coughband/nn/model.hpp"
#include "coughband/nn/train.hpp"
#include "coughband/occlusion.hpp"
#include "coughband/spectrogram.hpp"
#include "coughband/stats/compare.hpp"

namespace coughband {

inline constexpr const char* kVersionString = "0.1.0";

struct PipelineConfig {
  std::string manifest_path;
  std::string workdir;
  std::uint64_t seed = 0;
  double confidence_cutoff = 0.90;
  std::vector<double> thresholds{50, 60, 70, 80, 90};
  MaskConfig mask;
  TrainConfig train;
  bool write_svg = false;
  bool boxplot_all = false;

  void validate() const {
    if (manifest_path.empty() || workdir.empty())
      throw std::invalid_argument("config needs manifest and workdir paths");
    if (!(confidence_cutoff > 0.0 && confidence_cutoff < 1.0))
      throw std::invalid_argument("confidence_cutoff must be in (0, 1)");
    if (thresholds.empty()) throw std::invalid_argument("threshold list must not be empty");
    for (double th : thresholds)
      if (!(th >= 0.0 && th <= 100.0))
        throw std::invalid_argument("thresholds must be percentiles in [0, 100]");
    train.validate();
  }
};

// config.json: {"manifest", "workdir", "seed", "confidence_cutoff",
// "thresholds", "mask": {"patch_height", "patch_width", "stride_k",
// "stride_n", "fill"}, "train": {"alpha", "beta1", "beta2", "batch_size",
// "epochs", "val_fraction", "folds"}, "write_svg", "boxplot_all"}.
// Relative paths resolve against the config file's directory; absent keys
// keep the defaults above. The pipeline derives every RNG stream from the
// top-level seed.
inline PipelineConfig load_pipeline_config(const std::string& path) {
  const nlohmann::json j = read_json_file(path);
  const auto base = std::filesystem::absolute(path).parent_path();
  auto resolve = [&](std::string p) {
    std::filesystem::path fp(p);
    return fp.is_relative() ? (base / fp).string() : p;
  };
  PipelineConfig c;
  c.manifest_path = resolve(j.at("manifest").get<std::string>());
  c.workdir = resolve(j.at("workdir").get<std::string>());
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("confidence_cutoff")) c.confidence_cutoff = j.at("confidence_cutoff").get<double>();
  if (j.contains("thresholds")) c.thresholds = j.at("thresholds").get<std::vector<double>>();
  if (j.contains("mask")) {
    const auto& m = j.at("mask");
    if (m.contains("patch_height")) c.mask.patch_height = m.at("patch_height").get<int>();
    if (m.contains("patch_width")) c.mask.patch_width = m.at("patch_width").get<int>();
    if (m.contains("stride_k")) c.mask.stride_k = m.at("stride_k").get<int>();
    if (m.contains("stride_n")) c.mask.stride_n = m.at("stride_n").get<int>();
    if (m.contains("fill")) c.mask.fill = m.at("fill").get<double>();
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    if (t.contains("alpha")) c.train.alpha = t.at("alpha").get<double>();
    if (t.contains("beta1")) c.train.beta1 = t.at("beta1").get<double>();
    if (t.contains("beta2")) c.train.beta2 = t.at("beta2").get<double>();
    if (t.contains("batch_size")) c.train.batch_size = t.at("batch_size").get<int>();
    if (t.contains("epochs")) c.train.epochs = t.at("epochs").get<int>();
    if (t.contains("val_fraction")) c.train.val_fraction = t.at("val_fraction").get<double>();
    if (t.contains("folds")) c.train.folds = t.at("folds").get<int>();
  }
  if (j.contains("write_svg")) c.write_svg = j.at("write_svg").get<bool>();
  if (j.contains("boxplot_all")) c.boxplot_all = j.at("boxplot_all").get<bool>();
  c.validate();
  return c;
}

// Clip/spectrogram store records; both stores share the index layout
// index.json: {"items": [{"id", "patient_id", "label", "file"}]}.
struct StoreRecord {
  std::string id, patient_id, file;
  ClipLabel label = ClipLabel::kUnlabeled;
};

inline void write_store_index(const std::string& dir, const std::vector<StoreRecord>& items) {
  nlohmann::json j;
  j["items"] = nlohmann::json::array();
  for (const auto& r : items)
    j["items"].push_back({{"id", r.id},
                          {"patient_id", r.patient_id},
                          {"label", to_string(r.label)},
                          {"file", r.file}});
  write_json_file((std::filesystem::path(dir) / "index.json").string(), j);
}

inline std::vector<StoreRecord> read_store_index(const std::string& dir) {
  const auto j = read_json_file((std::filesystem::path(dir) / "index.json").string());
  std::vector<StoreRecord> items;
  for (const auto& e : j.at("items")) {
    StoreRecord r;
    r.id = e.at("id").get<std::string>();
    r.patient_id = e.at("patient_id").get<std::string>();
    r.label = clip_label_from_string(e.at("label").get<std::string>());
    r.file = e.at("file").get<std::string>();
    items.push_back(std::move(r));
  }
  return items;
}

// Decode, resample to the working rate, and cut every manifest recording into
// labeled 1-second clips stored as f32 blobs.
inline std::vector<StoreRecord> stage_ingest(const DatasetManifest& manifest, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  std::vector<StoreRecord> records;
  for (std::size_t ei = 0; ei < manifest.entries.size(); ++ei) {
    const auto& entry = manifest.entries[ei];
    PcmSignal sig = decode_wav(entry.path);
    if (sig.sample_rate != kWorkRateHz) {
      const double ratio = sig.sample_rate / kWorkRateHz;
      const int factor = static_cast<int>(std::lround(ratio));
      if (factor < 1 || std::abs(ratio - factor) > 1e-9)
        throw std::runtime_error("sample rate " + format_double(sig.sample_rate) +
                                 " is not an integer multiple of 8820 Hz: " + entry.path);
      sig = decimate(sig, factor);
    }
    const auto clips = segment_clips(sig, entry.patient_id, entry.windows);
    for (std::size_t ci = 0; ci < clips.size(); ++ci) {
      char suffix[32];
      std::snprintf(suffix, sizeof(suffix), "_e%02zu_c%04zu", ei, ci);
      StoreRecord r;
      r.id = entry.patient_id + suffix;
      r.patient_id = entry.patient_id;
      r.label = clips[ci].label;
      r.file = r.id + ".f32";
      Mat m(1, kClipLen);
      std::copy(clips[ci].samples.begin(), clips[ci].samples.end(), m.v.begin());
      write_f32_blob((fs::path(out_dir) / r.file).string(), m);
      records.push_back(std::move(r));
    }
  }
  write_store_index(out_dir, records);
  return records;
}

// Turn every stored clip into a stored 45x100 spectrogram.
inline std::vector<StoreRecord> stage_spectrogram(const std::string& clips_dir, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  std::vector<StoreRecord> out;
  for (const auto& rec : read_store_index(clips_dir)) {
    const Mat raw = read_f32_blob((fs::path(clips_dir) / rec.file).string(), 1, kClipLen);
    Clip clip;
    clip.samples = raw.v;
    clip.patient_id = rec.patient_id;
    clip.label = rec.label;
    const Spectrogram spec = compute_spectrogram(clip);
    StoreRecord r = rec;
    r.file = r.id + ".f32";
    write_f32_blob((fs::path(out_dir) / r.file).string(), spec.values);
    out.push_back(std::move(r));
  }
  write_store_index(out_dir, out);
  return out;
}

struct LoadedSpec {
  StoreRecord rec;
  Mat values;
};

inline std::vector<LoadedSpec> load_spec_store(const std::string& dir) {
  std::vector<LoadedSpec> out;
  for (const auto& rec : read_store_index(dir)) {
    LoadedSpec ls;
    ls.values = read_f32_blob((std::filesystem::path(dir) / rec.file).string(), kFreqBins, kTimeFrames);
    ls.rec = rec;
    out.push_back(std::move(ls));
  }
  std::sort(out.begin(), out.end(),
            [](const LoadedSpec& a, const LoadedSpec& b) { return a.rec.id < b.rec.id; });
  return out;
}

// Labeled training set of one fold: every labeled spectrogram of the fold's
// training patients.
inline void collect_fold_training_set(const std::vector<LoadedSpec>& specs,
                                      const std::vector<std::string>& train_patients,
                                      std::vector<Mat>& xs, std::vector<int>& ys) {
  const std::set<std::string> train_set(train_patients.begin(), train_patients.end());
  xs.clear();
  ys.clear();
  for (const auto& s : specs) {
    if (!train_set.count(s.rec.patient_id)) continue;
    if (s.rec.label == ClipLabel::kUnlabeled) continue;
    xs.push_back(s.values);
    ys.push_back(s.rec.label == ClipLabel::kCough ? kClassCough : kClassNonCough);
  }
}

// Reusable-workspace adapter turning a trained model into the ScoreFn the
// occlusion engine consumes.
struct ModelScorer {
  const CoughCnn<float>* model;
  mutable CoughCnn<float>::Workspace ws;
  double operator()(const Mat& spec) const {
    return static_cast<double>(model->forward(model->to_input(spec), ws, false, nullptr)[1]);
  }
};

struct PipelineReport {
  std::string summary_path;
  nlohmann::json summary;
};

namespace detail {

inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline nlohmann::json config_echo(const PipelineConfig& cfg) {
  return {
      {"manifest", cfg.manifest_path},
      {"workdir", cfg.workdir},
      {"seed", cfg.seed},
      {"confidence_cutoff", cfg.confidence_cutoff},
      {"thresholds", cfg.thresholds},
      {"mask",
       {{"patch_height", cfg.mask.patch_height},
        {"patch_width", cfg.mask.patch_width},
        {"stride_k", cfg.mask.stride_k},
        {"stride_n", cfg.mask.stride_n},
        {"fill", cfg.mask.fill}}},
      {"train",
       {{"alpha", cfg.train.alpha},
        {"beta1", cfg.train.beta1},
        {"beta2", cfg.train.beta2},
        {"batch_size", cfg.train.batch_size},
        {"epochs", cfg.train.epochs},
        {"val_fraction", cfg.train.val_fraction},
        {"folds", cfg.train.folds}}},
      {"write_svg", cfg.write_svg},
      {"boxplot_all", cfg.boxplot_all},
  };
}

}  // namespace detail

// The whole study: ingest -> spectrograms -> per-fold training -> confident
// selection -> occlusion maps -> thresholded weighted spectrograms ->
// features -> group comparison -> boxplot data, all under workdir, fully
// deterministic for a fixed (config, seed, inputs). Each patient's maps come
// from the model of the first fold holding that patient out (never a model
// trained on the patient). Any stage failure aborts with the stage name and
// the artifact path it was working under.
inline PipelineReport run_pipeline(const PipelineConfig& cfg) {
  namespace fs = std::filesystem;
  cfg.validate();
  fs::create_directories(cfg.workdir);

  nlohmann::json summary;
  summary["version"] = kVersionString;
  summary["config"] = detail::config_echo(cfg);
  summary["config_hash"] = detail::fnv1a64(summary["config"].dump());
  summary["seed"] = cfg.seed;
  summary["confidence_cutoff"] = cfg.confidence_cutoff;
  summary["thresholds"] = cfg.thresholds;
  nlohmann::json warnings = nlohmann::json::array();
  nlohmann::json timings;

  std::string current_stage = "config";
  std::string current_path = cfg.manifest_path;
  auto stage_clock = std::chrono::steady_clock::now();
  auto begin_stage = [&](const std::string& name, const std::string& path) {
    current_stage = name;
    current_path = path;
    stage_clock = std::chrono::steady_clock::now();
  };
  auto end_stage = [&]() {
    const double sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - stage_clock).count();
    timings[current_stage] = sec;
  };

  try {
    // -- configuration checks that must precede any compute
    const DatasetManifest manifest = load_manifest(cfg.manifest_path);
    const auto groups = manifest.populated_groups();
    if (groups.empty())
      throw std::runtime_error("manifest assigns no patient to any study-group cohort");

    const std::string clips_dir = (fs::path(cfg.workdir) / "clips").string();
    const std::string specs_dir = (fs::path(cfg.workdir) / "specs").string();
    const std::string models_dir = (fs::path(cfg.workdir) / "models").string();
    const std::string maps_dir = (fs::path(cfg.workdir) / "maps").string();
    const std::string weighted_dir = (fs::path(cfg.workdir) / "weighted").string();
    const std::string results_dir = (fs::path(cfg.workdir) / "results").string();
    const std::string boxplots_dir = (fs::path(cfg.workdir) / "boxplots").string();

    begin_stage("ingest", clips_dir);
    const auto clip_records = stage_ingest(manifest, clips_dir);
    summary["counts"]["clips"] = clip_records.size();
    end_stage();

    begin_stage("spectrogram", specs_dir);
    const auto spec_records = stage_spectrogram(clips_dir, specs_dir);
    summary["counts"]["spectrograms"] = spec_records.size();
    end_stage();

    begin_stage("train", models_dir);
    fs::create_directories(models_dir);
    const auto specs = load_spec_store(specs_dir);
    const FoldPlan plan = make_folds(manifest, cfg.train.folds, cfg.seed);
    std::vector<CoughCnn<float>> fold_models;
    nlohmann::json folds_json = nlohmann::json::array();
    for (std::size_t f = 0; f < plan.folds.size(); ++f) {
      std::vector<Mat> xs;
      std::vector<int> ys;
      collect_fold_training_set(specs, plan.folds[f].train_patients, xs, ys);
      TrainConfig tc = cfg.train;
      tc.seed = cfg.seed + f;
      const auto result = train<float>(xs, ys, tc);
      const std::string model_path = (fs::path(models_dir) / ("fold" + std::to_string(f) + ".bin")).string();
      save_model(model_path, result.model);
      nlohmann::json trace = nlohmann::json::array();
      for (const auto& e : result.trace)
        trace.push_back({{"train_loss", e.train_loss}, {"val_loss", e.val_loss}});
      write_json_file(model_path + ".trace.json", trace);
      folds_json.push_back({{"fold", f},
                            {"train_patients", plan.folds[f].train_patients},
                            {"test_patients", plan.folds[f].test_patients},
                            {"model", model_path}});
      fold_models.push_back(result.model);
    }
    summary["folds"] = folds_json;
    end_stage();

    // model assignment: the first fold that holds the patient out
    std::map<std::string, std::size_t> patient_fold;
    for (const auto& pid : manifest.patient_ids())
      for (std::size_t f = 0; f < plan.folds.size(); ++f) {
        const auto& tp = plan.folds[f].test_patients;
        if (std::find(tp.begin(), tp.end(), pid) != tp.end()) {
          patient_fold[pid] = f;
          break;
        }
      }

    begin_stage("predict", (fs::path(cfg.workdir) / "predictions.csv").string());
    {
      std::string csv = "clip_id,patient_id,label,fold,p_non_cough,p_cough\n";
      for (const auto& s : specs) {
        const std::size_t f = patient_fold.at(s.rec.patient_id);
        const auto probs = fold_models[f].predict(s.values);
        csv += s.rec.id + "," + s.rec.patient_id + "," + to_string(s.rec.label) + "," +
               std::to_string(f) + "," + format_double(probs[0]) + "," + format_double(probs[1]) + "\n";
      }
      write_text_file((fs::path(cfg.workdir) / "predictions.csv").string(), csv);
    }
    end_stage();

    begin_stage("occlusion", maps_dir);
    fs::create_directories(maps_dir);
    fs::create_directories(weighted_dir);
    std::vector<BandFeatureVector> feature_rows;
    nlohmann::json weighted_index = nlohmann::json::array();
    for (const auto& pid : manifest.patient_ids()) {
      std::vector<Mat> cough_specs;
      for (const auto& s : specs)
        if (s.rec.patient_id == pid && s.rec.label == ClipLabel::kCough)
          cough_specs.push_back(s.values);
      if (cough_specs.empty()) {
        warnings.push_back("patient " + pid + " has no cough-labeled clips; skipped");
        continue;
      }
      ModelScorer scorer{&fold_models[patient_fold.at(pid)], {}};
      const auto keep = select_confident(std::ref(scorer), cough_specs, cfg.confidence_cutoff);
      if (keep.empty()) {
        warnings.push_back("patient " + pid + " has no confident cough spectrograms; skipped");
        continue;
      }
      std::vector<Mat> confident;
      std::vector<OcclusionMap> maps;
      for (std::size_t idx : keep) {
        confident.push_back(cough_specs[idx]);
        maps.push_back(occlusion_map(std::ref(scorer), cough_specs[idx], cfg.mask));
      }
      MeanOcclusionMap mean_map = average_maps(maps);
      mean_map.patient_id = pid;
      const std::string map_file = pid + "_mean.f32";
      write_f32_blob((fs::path(maps_dir) / map_file).string(), mean_map.values);
      write_json_file((fs::path(maps_dir) / (pid + "_mean.json")).string(),
                      {{"patient_id", pid},
                       {"P", mean_map.contributing},
                       {"mask_cfg",
                        {{"patch_height", cfg.mask.patch_height},
                         {"patch_width", cfg.mask.patch_width},
                         {"stride_k", cfg.mask.stride_k},
                         {"stride_n", cfg.mask.stride_n},
                         {"fill", cfg.mask.fill}}},
                       {"file", map_file}});

      for (double th : cfg.thresholds) {
        const double alpha = percentile_threshold(mean_map, th);
        const WeightedSpectrogram ws = weighted_spectrogram(confident, mean_map, alpha);
        const std::string stem = pid + "_th" + format_double(th);
        write_f32_blob((fs::path(weighted_dir) / (stem + ".f32")).string(), ws.values);
        const nlohmann::json sidecar = {{"patient_id", pid},
                                        {"P", mean_map.contributing},
                                        {"Th", th},
                                        {"alpha", alpha},
                                        {"mask_cfg",
                                         {{"patch_height", cfg.mask.patch_height},
                                          {"patch_width", cfg.mask.patch_width},
                                          {"stride_k", cfg.mask.stride_k},
                                          {"stride_n", cfg.mask.stride_n},
                                          {"fill", cfg.mask.fill}}},
                                        {"file", stem + ".f32"}};
        write_json_file((fs::path(weighted_dir) / (stem + ".json")).string(), sidecar);
        weighted_index.push_back(sidecar);
        feature_rows.push_back(feature_vector(ws, th));
      }
    }
    write_json_file((fs::path(weighted_dir) / "index.json").string(),
                    {{"items", weighted_index}});
    summary["counts"]["weighted_spectrograms"] = weighted_index.size();
    end_stage();

    begin_stage("features", (fs::path(cfg.workdir) / "features.csv").string());
    std::string features_csv = feature_csv_header();
    for (const auto& fv : feature_rows) features_csv += feature_csv_rows(fv);
    write_text_file((fs::path(cfg.workdir) / "features.csv").string(), features_csv);
    end_stage();

    begin_stage("compare", results_dir);
    fs::create_directories(results_dir);
    const FeatureTable table = parse_features_csv(features_csv);
    std::vector<std::string> band_ids;
    for (const auto& b : all_bands()) band_ids.push_back(b.id);
    const auto cells = compare_groups(table, manifest, groups, band_ids, cfg.thresholds);
    std::string cells_csv = results_csv_header();
    for (const auto& c : cells) cells_csv += results_csv_row(c);
    write_text_file((fs::path(results_dir) / "cells.csv").string(), cells_csv);
    const auto best = best_thresholds(cells);
    for (const auto& band : band_ids)
      write_text_file((fs::path(results_dir) / ("best_" + band + ".csv")).string(),
                      best_grid_csv(best, band, groups));
    int significant = 0;
    for (const auto& c : cells)
      if (c.significant) ++significant;
    summary["counts"]["grid_cells"] = cells.size();
    summary["counts"]["significant_cells"] = significant;
    end_stage();

    begin_stage("boxplots", boxplots_dir);
    fs::create_directories(boxplots_dir);
    nlohmann::json box_cells = nlohmann::json::array();
    for (const auto& c : cells) {
      if (!(c.significant || cfg.boxplot_all) || !c.testable) continue;
      const std::size_t fi =
          std::find(feature_names().begin(), feature_names().end(),
                    (c.feature == "AC" ? std::string("RP") : c.feature)) -
          feature_names().begin();
      nlohmann::json entry = {{"study_group", c.study_group}, {"band", c.band},
                              {"feature", c.feature},         {"th", c.th},
                              {"test", c.test_used},          {"p_value", *c.p_value},
                              {"direction", c.direction}};
      BoxplotSummary summaries[2];
      bool ok = true;
      for (int side = 0; side < 2; ++side) {
        const auto cohort =
            manifest.cohort(c.study_group, side == 0 ? Membership::kC1 : Membership::kC2);
        std::vector<double> vals;
        nlohmann::json points = nlohmann::json::array();
        for (const auto& pid : cohort) {
          const auto* row = table.find(pid, c.th, c.band);
          if (row == nullptr || !row->values[fi]) continue;
          vals.push_back(*row->values[fi]);
          points.push_back({{"patient", pid}, {"value", *row->values[fi]}});
        }
        if (vals.empty()) { ok = false; break; }
        summaries[side] = boxplot_summary(vals);
        nlohmann::json bj = boxplot_json(summaries[side]);
        bj["points"] = points;
        entry[side == 0 ? "c1" : "c2"] = bj;
      }
      if (!ok) continue;
      box_cells.push_back(entry);
      if (cfg.write_svg) {
        const std::string name = c.study_group + "_" + c.band + "_" + c.feature + "_th" +
                                 format_double(c.th) + ".svg";
        const std::string title = c.study_group + " " + c.band + " " + c.feature +
                                  " (Th=" + format_double(c.th) + ")";
        write_text_file((fs::path(boxplots_dir) / name).string(),
                        boxplot_svg(title, summaries[0], summaries[1]));
      }
    }
    nlohmann::json box_doc;
    box_doc["cells"] = box_cells;
    if (box_cells.empty()) box_doc["note"] = "no significant cells";
    write_json_file((fs::path(boxplots_dir) / "boxplots.json").string(), box_doc);
    end_stage();

    summary["warnings"] = warnings;
    summary["timings_s"] = timings;
    summary["artifacts"] = {
        {"clips", clips_dir},
        {"specs", specs_dir},
        {"models", models_dir},
        {"maps", maps_dir},
        {"weighted", weighted_dir},
        {"features", (fs::path(cfg.workdir) / "features.csv").string()},
        {"predictions", (fs::path(cfg.workdir) / "predictions.csv").string()},
        {"results", results_dir},
        {"boxplots", boxplots_dir},
    };
  } catch (const std::exception& e) {
    throw std::runtime_error("stage '" + current_stage + "' failed (" + current_path +
                             "): " + e.what());
  }

  PipelineReport report;
  report.summary = summary;
  report.summary_path = (fs::path(cfg.workdir) / "summary.json").string();
  write_json_file(report.summary_path, summary);
  return report;
}

}  // namespace coughband
