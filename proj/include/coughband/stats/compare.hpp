#pragma once

#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "coughband/features.hpp"
#include "coughband/manifest.hpp"
#include "coughband/stats/mannwhitney.hpp"
#include "coughband/stats/shapiro.hpp"
#include "coughband/stats/ttest.hpp"

namespace coughband {

// One cohort's usable values for a (group, band, feature, Th) cell.
struct SampleSet {
  std::vector<double> values;  // one per patient, undefined entries dropped
  std::string cohort;          // "C1" or "C2"
  std::string study_group;
};

struct GroupComparisonResult {
  std::string study_group, band, feature;
  double th = 0.0;
  bool testable = false;
  std::string test_used;  // "t_test" or "mann_whitney" when testable
  double statistic = 0.0;
  std::optional<double> p_value;
  bool significant = false;
  int direction = 0;  // sign of (median C1 - median C2)
  int n1 = 0, n2 = 0;
  int excluded_undefined = 0;
  std::string note;
};

// In-memory feature table, one row per (patient, Th, band).
struct FeatureTable {
  struct Row {
    std::string patient_id;
    double th = 0.0;
    std::string band;
    std::vector<std::optional<double>> values;  // per feature_names()
  };
  std::vector<Row> rows;

  const Row* find(const std::string& patient, double th, const std::string& band) const {
    for (const auto& r : rows)
      if (r.patient_id == patient && r.band == band && r.th == th) return &r;
    return nullptr;
  }
};

inline FeatureTable parse_features_csv(const std::string& csv_text) {
  FeatureTable table;
  std::istringstream in(csv_text);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    while (cells.size() < 3 + feature_names().size()) cells.emplace_back();  // trailing empty cells
    if (cells.size() != 3 + feature_names().size())
      throw std::runtime_error("malformed feature CSV row: " + line);
    FeatureTable::Row row;
    row.patient_id = cells[0];
    row.th = std::stod(cells[1]);
    row.band = cells[2];
    for (std::size_t i = 3; i < cells.size(); ++i) {
      if (cells[i].empty())
        row.values.push_back(std::nullopt);
      else
        row.values.push_back(std::stod(cells[i]));
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

namespace detail {

inline double median(std::vector<double> v) { return interpolated_percentile(std::move(v), 50.0); }

// Normality verdict feeding the test gate: fewer than 3 values or a constant
// sample can never certify Gaussianity.
inline bool passes_normality(const std::vector<double>& v) {
  if (v.size() < 3) return false;
  return shapiro_wilk(v).gaussian;
}

}  // namespace detail

// The comparison protocol per cell: split the group's patients into C1/C2,
// drop undefined values, and when both cohorts have >= 2 usable values run a
// pooled t-test if BOTH pass Shapiro-Wilk at 0.05, a Mann-Whitney U test
// otherwise. Cells with a short cohort come back marked untestable.
inline GroupComparisonResult compare_cell(const SampleSet& c1, const SampleSet& c2,
                                          const std::string& band, const std::string& feature,
                                          double th, int excluded) {
  GroupComparisonResult r;
  r.study_group = c1.study_group;
  r.band = band;
  r.feature = feature;
  r.th = th;
  r.n1 = static_cast<int>(c1.values.size());
  r.n2 = static_cast<int>(c2.values.size());
  r.excluded_undefined = excluded;
  if (r.n1 < 2 || r.n2 < 2) {
    r.note = "untestable: cohort with < 2 usable values";
    return r;
  }
  r.testable = true;
  r.direction = [&] {
    const double d = detail::median(c1.values) - detail::median(c2.values);
    return d > 0.0 ? 1 : d < 0.0 ? -1 : 0;
  }();
  const bool gaussian = detail::passes_normality(c1.values) && detail::passes_normality(c2.values);
  if (gaussian) {
    const auto t = t_test_unpaired(c1.values, c2.values);
    r.test_used = "t_test";
    r.statistic = t.t;
    r.p_value = t.p;
    if (t.degenerate) r.note = "degenerate t-test (zero pooled variance)";
  } else {
    const auto mw = mann_whitney_u(c1.values, c2.values);
    r.test_used = "mann_whitney";
    r.statistic = mw.u;
    r.p_value = mw.p;
    if (!mw.exact) r.note = "normal-approximation p";
  }
  r.significant = r.p_value && *r.p_value < 0.05;
  return r;
}

// Full (group x band x feature x Th) grid.
inline std::vector<GroupComparisonResult> compare_groups(const FeatureTable& features,
                                                         const DatasetManifest& manifest,
                                                         const std::vector<std::string>& groups,
                                                         const std::vector<std::string>& bands,
                                                         const std::vector<double>& th_list) {
  std::vector<GroupComparisonResult> out;
  for (const auto& g : groups) {
    const auto c1_patients = manifest.cohort(g, Membership::kC1);
    const auto c2_patients = manifest.cohort(g, Membership::kC2);
    for (const auto& band : bands) {
      for (std::size_t fi = 0; fi < feature_names().size(); ++fi) {
        const std::string feature = (band == "B" && fi == 0) ? "AC" : feature_names()[fi];
        for (double th : th_list) {
          SampleSet s1{{}, "C1", g}, s2{{}, "C2", g};
          int excluded = 0;
          auto collect = [&](const std::vector<std::string>& patients, SampleSet& s) {
            for (const auto& p : patients) {
              const auto* row = features.find(p, th, band);
              if (row == nullptr || !row->values[fi]) {
                ++excluded;
                continue;
              }
              s.values.push_back(*row->values[fi]);
            }
          };
          collect(c1_patients, s1);
          collect(c2_patients, s2);
          out.push_back(compare_cell(s1, s2, band, feature, th, excluded));
        }
      }
    }
  }
  return out;
}

// Minimum-p threshold per (group, band, feature); earlier Th wins ties.
struct BestCell {
  std::string study_group, band, feature;
  double th = 0.0;
  std::optional<double> p_value;
  std::string test_used;
  bool significant = false;
};

inline std::vector<BestCell> best_thresholds(const std::vector<GroupComparisonResult>& cells) {
  std::vector<BestCell> best;
  auto key_of = [](const GroupComparisonResult& c) {
    return c.study_group + "\x1f" + c.band + "\x1f" + c.feature;
  };
  std::map<std::string, std::size_t> index;
  for (const auto& c : cells) {
    const std::string key = key_of(c);
    auto it = index.find(key);
    if (it == index.end()) {
      index[key] = best.size();
      best.push_back({c.study_group, c.band, c.feature, c.th, c.p_value, c.test_used, c.significant});
      continue;
    }
    BestCell& b = best[it->second];
    if (c.p_value && (!b.p_value || *c.p_value < *b.p_value)) {
      b.th = c.th;
      b.p_value = c.p_value;
      b.test_used = c.test_used;
      b.significant = c.significant;
    }
  }
  return best;
}

inline std::string results_csv_header() {
  return "study_group,band,feature,th,test,statistic,p_value,significant,direction,n1,n2,"
         "excluded_undefined,testable,note\n";
}

inline std::string results_csv_row(const GroupComparisonResult& r) {
  std::string out = r.study_group + "," + r.band + "," + r.feature + "," + format_double(r.th) + "," +
                    r.test_used + ",";
  out += r.testable ? format_double(r.statistic) : std::string();
  out += ",";
  out += r.p_value ? format_double(*r.p_value) : std::string();
  out += std::string(",") + (r.significant ? "1" : "0") + "," + std::to_string(r.direction) + "," +
         std::to_string(r.n1) + "," + std::to_string(r.n2) + "," +
         std::to_string(r.excluded_undefined) + "," + (r.testable ? "1" : "0") + "," + r.note + "\n";
  return out;
}

// Per-band grid mirroring the best-threshold tables: rows = study groups,
// columns = features, cell = best p with its Th.
inline std::string best_grid_csv(const std::vector<BestCell>& best, const std::string& band,
                                 const std::vector<std::string>& groups) {
  std::string out = "study_group";
  for (std::size_t fi = 0; fi < feature_names().size(); ++fi)
    out += "," + ((band == "B" && fi == 0) ? std::string("AC") : feature_names()[fi]);
  out += "\n";
  for (const auto& g : groups) {
    out += g;
    for (std::size_t fi = 0; fi < feature_names().size(); ++fi) {
      const std::string feature = (band == "B" && fi == 0) ? "AC" : feature_names()[fi];
      const BestCell* hit = nullptr;
      for (const auto& b : best)
        if (b.study_group == g && b.band == band && b.feature == feature) { hit = &b; break; }
      if (hit == nullptr || !hit->p_value)
        out += ",-";
      else
        out += "," + format_double(*hit->p_value) + " (Th=" + format_double(hit->th) + ")" +
               (hit->significant ? " *" : "");
    }
    out += "\n";
  }
  return out;
}

}  // namespace coughband
