#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "coughband/pipeline.hpp"
#include "coughband/synth.hpp"

namespace fs = std::filesystem;
using namespace coughband;

namespace {

std::vector<double> parse_th_list(const std::string& csv) {
  std::vector<double> out;
  std::istringstream in(csv);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    if (tok.empty()) continue;
    out.push_back(std::stod(tok));
  }
  if (out.empty()) throw CLI::ValidationError("--th", "needs at least one percentile");
  for (double th : out)
    if (!(th >= 0.0 && th <= 100.0))
      throw CLI::ValidationError("--th", "percentiles must lie in [0, 100]");
  return out;
}

std::vector<double> parse_db_list(const std::string& csv) {
  std::vector<double> out;
  std::istringstream in(csv);
  std::string tok;
  while (std::getline(in, tok, ',')) out.push_back(tok.empty() ? 0.0 : std::stod(tok));
  if (out.size() != 5)
    throw CLI::ValidationError("band offsets", "need exactly 5 comma-separated dB values");
  return out;
}

// Weighted-spectrogram sidecars in a directory, sorted by (patient, Th).
struct WeightedEntry {
  std::string patient_id, file;
  double th = 0.0;
};

std::vector<WeightedEntry> scan_weighted_dir(const std::string& dir) {
  std::vector<WeightedEntry> entries;
  std::vector<std::string> sidecars;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string name = e.path().filename().string();
    if (name == "index.json" || e.path().extension() != ".json") continue;
    sidecars.push_back(e.path().string());
  }
  std::sort(sidecars.begin(), sidecars.end());
  for (const auto& path : sidecars) {
    const auto j = read_json_file(path);
    if (!j.contains("patient_id") || !j.contains("Th") || !j.contains("file")) continue;
    entries.push_back({j.at("patient_id").get<std::string>(),
                       (fs::path(dir) / j.at("file").get<std::string>()).string(),
                       j.at("Th").get<double>()});
  }
  std::stable_sort(entries.begin(), entries.end(), [](const WeightedEntry& a, const WeightedEntry& b) {
    return a.patient_id != b.patient_id ? a.patient_id < b.patient_id : a.th < b.th;
  });
  return entries;
}

nlohmann::json mask_cfg_json(const MaskConfig& m) {
  return {{"patch_height", m.patch_height},
          {"patch_width", m.patch_width},
          {"stride_k", m.stride_k},
          {"stride_n", m.stride_n},
          {"fill", m.fill}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cough-spectrogram band analysis pipeline"};
  app.require_subcommand(1);

  // ---- ingest
  std::string ingest_manifest, ingest_out;
  auto* ingest = app.add_subcommand("ingest", "decode and clip manifest audio into a clip store");
  ingest->add_option("--manifest", ingest_manifest, "dataset manifest JSON")->required();
  ingest->add_option("--out", ingest_out, "clip store directory")->required();

  // ---- spectrogram
  std::string spec_clips, spec_out;
  auto* spect = app.add_subcommand("spectrogram", "turn stored clips into 45x100 spectrograms");
  spect->add_option("--clips", spec_clips, "clip store directory")->required();
  spect->add_option("--out", spec_out, "spectrogram store directory")->required();

  // ---- train
  std::string train_specs, train_manifest, train_out;
  int train_fold = 0;
  std::uint64_t train_seed = 0;
  TrainConfig train_cfg;
  auto* train_cmd = app.add_subcommand("train", "train the classifier on one cross-validation fold");
  train_cmd->add_option("--specs", train_specs, "spectrogram store directory")->required();
  train_cmd->add_option("--manifest", train_manifest, "dataset manifest JSON")->required();
  train_cmd->add_option("--fold", train_fold, "fold index to hold out")->required();
  train_cmd->add_option("--seed", train_seed, "base seed (fold plan + init + shuffles)");
  train_cmd->add_option("--out", train_out, "model file to write")->required();
  train_cmd->add_option("--folds", train_cfg.folds, "number of folds")->capture_default_str();
  train_cmd->add_option("--alpha", train_cfg.alpha, "AdaMax step size")->capture_default_str();
  train_cmd->add_option("--batch-size", train_cfg.batch_size, "mini-batch size")->capture_default_str();
  train_cmd->add_option("--epochs", train_cfg.epochs, "training epochs")->capture_default_str();
  train_cmd->add_option("--val-fraction", train_cfg.val_fraction, "validation split fraction")->capture_default_str();

  // ---- eval
  std::string eval_model, eval_specs, eval_out;
  auto* eval_cmd = app.add_subcommand("eval", "per-clip class probabilities of a trained model");
  eval_cmd->add_option("--model", eval_model, "model file")->required();
  eval_cmd->add_option("--specs", eval_specs, "spectrogram store directory")->required();
  eval_cmd->add_option("--out", eval_out, "CSV output path (default: stdout)");

  // ---- explain
  std::string expl_model, expl_specs, expl_patient, expl_out, expl_th = "50,60,70,80,90";
  double expl_cutoff = 0.90;
  MaskConfig expl_mask;
  auto* expl = app.add_subcommand("explain",
                                  "occlusion map and thresholded weighted spectrograms for a patient");
  expl->add_option("--model", expl_model, "model file")->required();
  expl->add_option("--specs", expl_specs, "spectrogram store directory")->required();
  expl->add_option("--patient", expl_patient, "patient id")->required();
  expl->add_option("--th", expl_th, "threshold percentile or comma list")->capture_default_str();
  expl->add_option("--cutoff", expl_cutoff, "p_cough confidence cutoff")->capture_default_str();
  expl->add_option("--patch-height", expl_mask.patch_height, "occlusion patch height")->capture_default_str();
  expl->add_option("--patch-width", expl_mask.patch_width, "occlusion patch width")->capture_default_str();
  expl->add_option("--stride-k", expl_mask.stride_k, "patch stride along frequency")->capture_default_str();
  expl->add_option("--stride-n", expl_mask.stride_n, "patch stride along time")->capture_default_str();
  expl->add_option("--fill", expl_mask.fill, "patch fill value")->capture_default_str();
  expl->add_option("--out", expl_out, "output directory")->required();

  // ---- features
  std::string feat_weighted, feat_out;
  auto* feat = app.add_subcommand("features", "band feature table from weighted spectrograms");
  feat->add_option("--weighted", feat_weighted, "weighted-spectrogram directory")->required();
  feat->add_option("--out", feat_out, "feature CSV path")->required();

  // ---- compare
  std::string cmp_features, cmp_manifest, cmp_out, cmp_th = "50,60,70,80,90";
  auto* cmp = app.add_subcommand("compare", "per-cell cohort tests over the feature grid");
  cmp->add_option("--features", cmp_features, "feature CSV")->required();
  cmp->add_option("--manifest", cmp_manifest, "dataset manifest JSON")->required();
  cmp->add_option("--th", cmp_th, "threshold percentiles (comma list)")->capture_default_str();
  cmp->add_option("--out", cmp_out, "results directory")->required();

  // ---- report
  std::string rep_results, rep_features, rep_manifest, rep_out;
  bool rep_all = false, rep_svg = false;
  auto* rep = app.add_subcommand("report", "boxplot data for significant comparison cells");
  rep->add_option("--results", rep_results, "long-format results CSV (cells.csv)")->required();
  rep->add_option("--features", rep_features, "feature CSV")->required();
  rep->add_option("--manifest", rep_manifest, "dataset manifest JSON")->required();
  rep->add_option("--out", rep_out, "output directory")->required();
  rep->add_flag("--all", rep_all, "emit every testable cell, not only significant ones");
  rep->add_flag("--svg", rep_svg, "also render SVG boxplots");

  // ---- synth
  std::string synth_out, synth_c1 = "0,0,0,0,0", synth_c2 = "0,0,0,0,0", synth_group = "G1";
  std::uint64_t synth_seed = 0;
  SynthSpec synth_spec;
  auto* synth = app.add_subcommand("synth", "generate a synthetic two-cohort study");
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_option("--patients", synth_spec.patients_per_cohort, "patients per cohort")->capture_default_str();
  synth->add_option("--coughs", synth_spec.coughs_per_patient, "coughs per patient")->capture_default_str();
  synth->add_option("--c1-db", synth_c1, "C1 sub-band offsets, 5 comma dB values")->capture_default_str();
  synth->add_option("--c2-db", synth_c2, "C2 sub-band offsets, 5 comma dB values")->capture_default_str();
  synth->add_option("--noise", synth_spec.noise_level, "background noise amplitude")->capture_default_str();
  synth->add_option("--group", synth_group, "study group to populate")->capture_default_str();

  // ---- run
  std::string run_config;
  auto* run = app.add_subcommand("run", "full pipeline from a config file");
  run->add_option("--config", run_config, "pipeline config JSON")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) {
      const auto manifest = load_manifest(ingest_manifest);
      const auto records = stage_ingest(manifest, ingest_out);
      std::cout << records.size() << " clips -> " << ingest_out << "\n";
    } else if (*spect) {
      const auto records = stage_spectrogram(spec_clips, spec_out);
      std::cout << records.size() << " spectrograms -> " << spec_out << "\n";
    } else if (*train_cmd) {
      const auto manifest = load_manifest(train_manifest);
      const auto specs = load_spec_store(train_specs);
      const FoldPlan plan = make_folds(manifest, train_cfg.folds, train_seed);
      if (train_fold < 0 || train_fold >= static_cast<int>(plan.folds.size()))
        throw std::runtime_error("fold index out of range");
      std::vector<Mat> xs;
      std::vector<int> ys;
      collect_fold_training_set(specs, plan.folds[train_fold].train_patients, xs, ys);
      train_cfg.seed = train_seed + static_cast<std::uint64_t>(train_fold);
      const auto result = train<float>(xs, ys, train_cfg);
      save_model(train_out, result.model);
      nlohmann::json trace = nlohmann::json::array();
      for (const auto& e : result.trace)
        trace.push_back({{"train_loss", e.train_loss}, {"val_loss", e.val_loss}});
      write_json_file(train_out + ".trace.json", trace);
      std::cout << "fold " << train_fold << ": " << xs.size() << " clips, final train loss "
                << format_double(result.trace.back().train_loss) << " -> " << train_out << "\n";
    } else if (*eval_cmd) {
      const auto model = load_model<float>(eval_model);
      std::string csv = "clip_id,patient_id,label,p_non_cough,p_cough\n";
      for (const auto& s : load_spec_store(eval_specs)) {
        const auto probs = model.predict(s.values);
        csv += s.rec.id + "," + s.rec.patient_id + "," + to_string(s.rec.label) + "," +
               format_double(probs[0]) + "," + format_double(probs[1]) + "\n";
      }
      if (eval_out.empty())
        std::cout << csv;
      else {
        write_text_file(eval_out, csv);
        std::cout << "probabilities -> " << eval_out << "\n";
      }
    } else if (*expl) {
      const auto model = load_model<float>(expl_model);
      const auto th_list = parse_th_list(expl_th);
      std::vector<Mat> cough_specs;
      for (const auto& s : load_spec_store(expl_specs))
        if (s.rec.patient_id == expl_patient && s.rec.label == ClipLabel::kCough)
          cough_specs.push_back(s.values);
      if (cough_specs.empty()) throw std::runtime_error("no cough clips for patient " + expl_patient);
      ModelScorer scorer{&model, {}};
      const auto keep = select_confident(std::ref(scorer), cough_specs, expl_cutoff);
      if (keep.empty())
        throw std::runtime_error("no spectrogram reaches the confidence cutoff for " + expl_patient);
      std::vector<Mat> confident;
      std::vector<OcclusionMap> maps;
      for (std::size_t idx : keep) {
        confident.push_back(cough_specs[idx]);
        maps.push_back(occlusion_map(std::ref(scorer), cough_specs[idx], expl_mask));
      }
      MeanOcclusionMap mean_map = average_maps(maps);
      mean_map.patient_id = expl_patient;
      fs::create_directories(expl_out);
      write_f32_blob((fs::path(expl_out) / (expl_patient + "_mean.f32")).string(), mean_map.values);
      write_json_file((fs::path(expl_out) / (expl_patient + "_mean.json")).string(),
                      {{"patient_id", expl_patient},
                       {"P", mean_map.contributing},
                       {"mask_cfg", mask_cfg_json(expl_mask)},
                       {"file", expl_patient + "_mean.f32"}});
      for (double th : th_list) {
        const double alpha = percentile_threshold(mean_map, th);
        const auto ws = weighted_spectrogram(confident, mean_map, alpha);
        const std::string stem = expl_patient + "_th" + format_double(th);
        write_f32_blob((fs::path(expl_out) / (stem + ".f32")).string(), ws.values);
        write_json_file((fs::path(expl_out) / (stem + ".json")).string(),
                        {{"patient_id", expl_patient},
                         {"P", mean_map.contributing},
                         {"Th", th},
                         {"alpha", alpha},
                         {"mask_cfg", mask_cfg_json(expl_mask)},
                         {"file", stem + ".f32"}});
      }
      std::cout << expl_patient << ": " << keep.size() << "/" << cough_specs.size()
                << " confident spectrograms, " << th_list.size() << " thresholds -> " << expl_out
                << "\n";
    } else if (*feat) {
      std::string csv = feature_csv_header();
      for (const auto& e : scan_weighted_dir(feat_weighted)) {
        WeightedSpectrogram ws;
        ws.values = read_f32_blob(e.file, kFreqBins, kTimeFrames);
        ws.patient_id = e.patient_id;
        csv += feature_csv_rows(feature_vector(ws, e.th));
      }
      write_text_file(feat_out, csv);
      std::cout << "feature table -> " << feat_out << "\n";
    } else if (*cmp) {
      const auto manifest = load_manifest(cmp_manifest);
      const auto groups = manifest.populated_groups();
      if (groups.empty()) throw std::runtime_error("manifest assigns no patient to any study group");
      std::ifstream f(cmp_features);
      if (!f) throw std::runtime_error("cannot open " + cmp_features);
      std::stringstream buf;
      buf << f.rdbuf();
      const FeatureTable table = parse_features_csv(buf.str());
      std::vector<std::string> band_ids;
      for (const auto& b : all_bands()) band_ids.push_back(b.id);
      const auto th_list = parse_th_list(cmp_th);
      const auto cells = compare_groups(table, manifest, groups, band_ids, th_list);
      fs::create_directories(cmp_out);
      std::string cells_csv = results_csv_header();
      for (const auto& c : cells) cells_csv += results_csv_row(c);
      write_text_file((fs::path(cmp_out) / "cells.csv").string(), cells_csv);
      const auto best = best_thresholds(cells);
      for (const auto& band : band_ids)
        write_text_file((fs::path(cmp_out) / ("best_" + band + ".csv")).string(),
                        best_grid_csv(best, band, groups));
      int significant = 0;
      for (const auto& c : cells)
        if (c.significant) ++significant;
      std::cout << cells.size() << " cells (" << significant << " significant) -> " << cmp_out << "\n";
    } else if (*rep) {
      const auto manifest = load_manifest(rep_manifest);
      std::ifstream ff(rep_features);
      if (!ff) throw std::runtime_error("cannot open " + rep_features);
      std::stringstream fbuf;
      fbuf << ff.rdbuf();
      const FeatureTable table = parse_features_csv(fbuf.str());

      std::ifstream rf(rep_results);
      if (!rf) throw std::runtime_error("cannot open " + rep_results);
      fs::create_directories(rep_out);
      nlohmann::json box_cells = nlohmann::json::array();
      std::string line;
      std::getline(rf, line);  // header
      while (std::getline(rf, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        while (cells.size() < 14) cells.emplace_back();
        const bool significant = cells[7] == "1";
        const bool testable = cells[12] == "1";
        if (!(significant || rep_all) || !testable) continue;
        const std::string group = cells[0], band = cells[1], feature = cells[2];
        const double th = std::stod(cells[3]);
        const std::size_t fi =
            std::find(feature_names().begin(), feature_names().end(),
                      (feature == "AC" ? std::string("RP") : feature)) -
            feature_names().begin();
        nlohmann::json entry = {{"study_group", group}, {"band", band}, {"feature", feature},
                                {"th", th},             {"test", cells[4]}};
        if (!cells[6].empty()) entry["p_value"] = std::stod(cells[6]);
        BoxplotSummary summaries[2];
        bool ok = true;
        for (int side = 0; side < 2; ++side) {
          const auto cohort = manifest.cohort(group, side == 0 ? Membership::kC1 : Membership::kC2);
          std::vector<double> vals;
          nlohmann::json points = nlohmann::json::array();
          for (const auto& pid : cohort) {
            const auto* row = table.find(pid, th, band);
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
        if (rep_svg) {
          const std::string name =
              group + "_" + band + "_" + feature + "_th" + format_double(th) + ".svg";
          write_text_file((fs::path(rep_out) / name).string(),
                          boxplot_svg(group + " " + band + " " + feature +
                                          " (Th=" + format_double(th) + ")",
                                      summaries[0], summaries[1]));
        }
      }
      nlohmann::json doc;
      doc["cells"] = box_cells;
      if (box_cells.empty()) doc["note"] = "no significant cells";
      write_json_file((fs::path(rep_out) / "boxplots.json").string(), doc);
      std::cout << box_cells.size() << " boxplot cells -> " << rep_out << "\n";
    } else if (*synth) {
      const auto c1 = parse_db_list(synth_c1);
      const auto c2 = parse_db_list(synth_c2);
      std::copy(c1.begin(), c1.end(), synth_spec.c1_band_db.begin());
      std::copy(c2.begin(), c2.end(), synth_spec.c2_band_db.begin());
      synth_spec.group = synth_group;
      const auto result = generate_synthetic_cohort(synth_spec, synth_seed, synth_out);
      std::cout << result.patient_ids.size() << " patients -> " << result.manifest_path << "\n";
    } else if (*run) {
      const auto cfg = load_pipeline_config(run_config);
      const auto report = run_pipeline(cfg);
      std::cout << "summary -> " << report.summary_path << "\n";
      const auto& counts = report.summary["counts"];
      std::cout << counts["clips"] << " clips, " << counts["spectrograms"] << " spectrograms, "
                << counts["grid_cells"] << " cells (" << counts["significant_cells"]
                << " significant)\n";
      for (const auto& w : report.summary["warnings"])
        std::cout << "warning: " << w.get<std::string>() << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
