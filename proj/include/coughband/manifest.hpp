#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "coughband/audio.hpp"

namespace coughband {

// Per-study-group cohort membership of a patient.
enum class Membership { kC1, kC2, kExcluded };

inline const char* to_string(Membership m) {
  switch (m) {
    case Membership::kC1: return "C1";
    case Membership::kC2: return "C2";
    default: return "excluded";
  }
}

inline Membership membership_from_string(const std::string& s) {
  if (s == "C1") return Membership::kC1;
  if (s == "C2") return Membership::kC2;
  if (s == "excluded") return Membership::kExcluded;
  throw std::runtime_error("unknown cohort state: " + s);
}

inline const std::vector<std::string>& study_group_ids() {
  static const std::vector<std::string> ids = {"G1", "G2", "G3", "G4", "G5", "G6"};
  return ids;
}

struct ManifestEntry {
  std::string path;        // resolved absolute path to the recording
  std::string patient_id;
  std::map<std::string, Membership> groups;  // keys from study_group_ids()
  std::vector<LabelWindow> windows;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;

  std::vector<std::string> patient_ids() const {
    std::set<std::string> s;
    for (const auto& e : entries) s.insert(e.patient_id);
    return {s.begin(), s.end()};
  }

  // Membership of a patient in a study group; entries may omit groups, which
  // reads as excluded.
  Membership membership(const std::string& patient_id, const std::string& group) const {
    for (const auto& e : entries) {
      if (e.patient_id != patient_id) continue;
      auto it = e.groups.find(group);
      return it == e.groups.end() ? Membership::kExcluded : it->second;
    }
    throw std::runtime_error("unknown patient: " + patient_id);
  }

  std::vector<std::string> cohort(const std::string& group, Membership m) const {
    std::vector<std::string> out;
    for (const auto& p : patient_ids())
      if (membership(p, group) == m) out.push_back(p);
    return out;
  }

  // Groups with at least one patient assigned to either cohort.
  std::vector<std::string> populated_groups() const {
    std::vector<std::string> out;
    for (const auto& g : study_group_ids()) {
      bool any = false;
      for (const auto& e : entries) {
        auto it = e.groups.find(g);
        if (it != e.groups.end() && it->second != Membership::kExcluded) { any = true; break; }
      }
      if (any) out.push_back(g);
    }
    return out;
  }
};

// Loads and validates the dataset manifest: a JSON list of recordings with
// patient id, per-group cohort membership, and label windows. Relative
// recording paths are resolved against the manifest's directory. Rejected:
// unknown group keys, unknown states, missing files, malformed windows, and
// patients whose membership differs between entries.
inline DatasetManifest load_manifest(const std::string& manifest_path) {
  std::ifstream f(manifest_path);
  if (!f) throw std::runtime_error("cannot open manifest: " + manifest_path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const std::exception& e) {
    throw std::runtime_error("manifest is not valid JSON: " + std::string(e.what()));
  }
  if (!j.is_array()) throw std::runtime_error("manifest must be a JSON list of recordings");

  const auto base = std::filesystem::absolute(manifest_path).parent_path();
  const std::set<std::string> known(study_group_ids().begin(), study_group_ids().end());

  DatasetManifest m;
  std::map<std::string, std::map<std::string, Membership>> seen_groups;
  for (const auto& rec : j) {
    ManifestEntry e;
    if (!rec.contains("path") || !rec.contains("patient_id"))
      throw std::runtime_error("manifest entry missing path/patient_id");
    const std::string raw_path = rec.at("path").get<std::string>();
    std::filesystem::path p(raw_path);
    if (p.is_relative()) p = base / p;
    if (!std::filesystem::exists(p))
      throw std::runtime_error("manifest references missing file: " + p.string());
    e.path = p.string();
    e.patient_id = rec.at("patient_id").get<std::string>();
    if (e.patient_id.empty()) throw std::runtime_error("manifest entry with empty patient_id");

    if (rec.contains("groups")) {
      for (const auto& [key, val] : rec.at("groups").items()) {
        if (!known.count(key)) throw std::runtime_error("unknown study-group key: " + key);
        e.groups[key] = membership_from_string(val.get<std::string>());
      }
    }
    auto it = seen_groups.find(e.patient_id);
    if (it == seen_groups.end()) {
      seen_groups[e.patient_id] = e.groups;
    } else if (it->second != e.groups) {
      throw std::runtime_error("conflicting group membership for patient: " + e.patient_id);
    }

    if (rec.contains("labels")) {
      for (const auto& lw : rec.at("labels")) {
        LabelWindow w;
        w.start_s = lw.at("start_s").get<double>();
        w.end_s = lw.at("end_s").get<double>();
        w.label = clip_label_from_string(lw.at("label").get<std::string>());
        if (!(w.end_s > w.start_s))
          throw std::runtime_error("label window with end <= start for patient " + e.patient_id);
        e.windows.push_back(w);
      }
    }
    m.entries.push_back(std::move(e));
  }
  return m;
}

}  // namespace coughband
