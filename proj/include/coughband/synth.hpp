#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "coughband/bands.hpp"
#include "coughband/blob_io.hpp"
#include "coughband/rng.hpp"
#include "coughband/wav.hpp"

namespace coughband {

// Parameters of the synthetic two-cohort study used for desk-scale runs:
// cough-like band-shaped sinusoid bursts with per-cohort sub-band energy
// offsets, over a light noise floor.
struct SynthSpec {
  int patients_per_cohort = 6;
  int coughs_per_patient = 5;
  std::array<double, 5> c1_band_db{0, 0, 0, 0, 0};  // per sub-band offsets, dB
  std::array<double, 5> c2_band_db{0, 0, 0, 0, 0};
  double base_amplitude = 0.05;
  double patient_jitter_db = 0.5;  // per-patient gain spread
  double noise_level = 0.004;      // uniform background noise amplitude
  double sample_rate = 44100.0;
  std::string group = "G1";
};

struct SynthResult {
  std::string manifest_path;
  std::vector<std::string> patient_ids;
};

namespace detail {

// One 300 ms burst: per sub-band, a pack of random sinusoids under a raised-
// cosine envelope, scaled to the band's target amplitude.
inline void add_burst(std::vector<double>& samples, double rate, double start_s,
                      const std::array<double, 5>& band_amp, Rng& rng) {
  constexpr int kPack = 10;
  const double dur = 0.3;
  const int n0 = static_cast<int>(start_s * rate);
  const int len = static_cast<int>(dur * rate);
  const auto& bands = subbands();
  for (std::size_t bi = 0; bi < bands.size(); ++bi) {
    const double lo = std::max(bands[bi].lo_hz, 40.0);
    const double hi = std::min(bands[bi].hi_hz, 3900.0);  // survives the anti-alias filter
    const double a = band_amp[bi] * std::sqrt(2.0 / kPack);
    for (int s = 0; s < kPack; ++s) {
      const double f = rng.uniform(lo, hi);
      const double phase = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
      const double w = 2.0 * 3.14159265358979323846 * f / rate;
      for (int i = 0; i < len && n0 + i < static_cast<int>(samples.size()); ++i) {
        const double env = 0.5 * (1.0 - std::cos(2.0 * 3.14159265358979323846 * i / (len - 1)));
        samples[n0 + i] += a * env * std::sin(w * i + phase);
      }
    }
  }
}

}  // namespace detail

// Writes one WAV per patient (alternating 1-second cough/quiet slots) plus a
// manifest with a two-cohort study group. Byte-identical output for a fixed
// (spec, seed).
inline SynthResult generate_synthetic_cohort(const SynthSpec& spec, std::uint64_t seed,
                                             const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  Rng rng(seed);
  nlohmann::json manifest = nlohmann::json::array();
  SynthResult res;

  const int n_patients = 2 * spec.patients_per_cohort;
  for (int p = 0; p < n_patients; ++p) {
    const bool is_c1 = p < spec.patients_per_cohort;
    const auto& offs = is_c1 ? spec.c1_band_db : spec.c2_band_db;
    char idbuf[16];
    std::snprintf(idbuf, sizeof(idbuf), "p%02d", p + 1);
    const std::string pid = idbuf;
    res.patient_ids.push_back(pid);

    const double jitter_db = spec.patient_jitter_db * rng.gaussian();
    std::array<double, 5> band_amp;
    for (int b = 0; b < 5; ++b)
      band_amp[b] = spec.base_amplitude * std::pow(10.0, (offs[b] + jitter_db) / 20.0);

    const int slots = 2 * spec.coughs_per_patient;  // cough, quiet, cough, ...
    const int n = static_cast<int>(spec.sample_rate) * slots;
    std::vector<double> samples(n, 0.0);
    for (auto& s : samples) s = spec.noise_level * (2.0 * rng.uniform() - 1.0);

    nlohmann::json labels = nlohmann::json::array();
    for (int slot = 0; slot < slots; ++slot) {
      const double t0 = static_cast<double>(slot);
      if (slot % 2 == 0) {
        detail::add_burst(samples, spec.sample_rate, t0 + 0.35, band_amp, rng);
        labels.push_back({{"start_s", t0}, {"end_s", t0 + 1.0}, {"label", "cough"}});
      } else {
        labels.push_back({{"start_s", t0}, {"end_s", t0 + 1.0}, {"label", "non_cough"}});
      }
    }

    const std::string wav_name = pid + ".wav";
    write_wav((fs::path(out_dir) / wav_name).string(), samples,
              static_cast<std::uint32_t>(spec.sample_rate));
    manifest.push_back({
        {"path", wav_name},
        {"patient_id", pid},
        {"groups", {{spec.group, is_c1 ? "C1" : "C2"}}},
        {"labels", labels},
    });
  }

  res.manifest_path = (fs::path(out_dir) / "manifest.json").string();
  write_json_file(res.manifest_path, manifest);
  nlohmann::json echo = {
      {"patients_per_cohort", spec.patients_per_cohort},
      {"coughs_per_patient", spec.coughs_per_patient},
      {"c1_band_db", spec.c1_band_db},
      {"c2_band_db", spec.c2_band_db},
      {"base_amplitude", spec.base_amplitude},
      {"patient_jitter_db", spec.patient_jitter_db},
      {"noise_level", spec.noise_level},
      {"sample_rate", spec.sample_rate},
      {"group", spec.group},
      {"seed", seed},
  };
  write_json_file((fs::path(out_dir) / "synth_config.json").string(), echo);
  return res;
}

}  // namespace coughband
