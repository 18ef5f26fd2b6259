#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <coughband/bands.hpp>
#include <coughband/features.hpp>
#include <coughband/occlusion.hpp>
#include <coughband/rng.hpp>
#include <coughband/stats/compare.hpp>

#include "oracles.hpp"

using namespace coughband;

namespace {

const BandDefinition& band_by_id(const std::string& id) {
  static const std::vector<BandDefinition> bands = all_bands();
  for (const auto& b : bands)
    if (b.id == id) return b;
  throw std::logic_error("unknown band " + id);
}

Mat random_ws(std::uint64_t seed, double zero_col_fraction = 0.0) {
  Mat ws(kFreqBins, kTimeFrames);
  Rng rng(seed);
  for (auto& v : ws.v) v = rng.uniform(0.0, 1.0);
  for (int n = 0; n < ws.cols; ++n)
    if (rng.uniform() < zero_col_fraction)
      for (int k = 0; k < ws.rows; ++k) ws(k, n) = 0.0;
  return ws;
}

WeightedSpectrogram wrap(Mat values, std::string pid = "p01", double alpha = 0.0) {
  WeightedSpectrogram ws;
  ws.values = std::move(values);
  ws.patient_id = std::move(pid);
  ws.alpha = alpha;
  return ws;
}

bool close_opt(const std::optional<double>& a, const std::optional<double>& b, double rel = 1e-9) {
  if (a.has_value() != b.has_value()) return false;
  if (!a) return true;
  return std::abs(*a - *b) <= rel * std::max({std::abs(*a), std::abs(*b), 1e-30});
}

}  // namespace

TEST_CASE("the five sub-bands partition the bin axis", "[features]") {
  const auto& bands = subbands();
  REQUIRE(bands.size() == 5);
  CHECK(bands[0].id == "B1");
  CHECK(bands[4].id == "B5");

  CHECK(bands[0].bins == std::vector<int>{0, 1, 2, 3, 4, 5});
  CHECK(bands[1].bins == std::vector<int>{6, 7, 8, 9, 10});
  CHECK(bands[2].bins == std::vector<int>{11, 12, 13, 14, 15});
  CHECK(bands[3].bins == std::vector<int>{16, 17, 18, 19, 20});
  REQUIRE(bands[4].bins.size() == 24);
  CHECK(bands[4].bins.front() == 21);
  CHECK(bands[4].bins.back() == 44);

  std::set<int> all;
  for (const auto& b : bands) {
    CHECK(b.bins == oracle::bins_in(b.lo_hz, b.hi_hz));
    for (int k : b.bins) CHECK(all.insert(k).second);  // no overlap
  }
  CHECK(all.size() == 45);

  const auto& g = global_band();
  CHECK(g.id == "B");
  REQUIRE(g.bins.size() == 45);
  CHECK(g.bins.front() == 0);
  CHECK(g.bins.back() == 44);

  const auto order = all_bands();
  REQUIRE(order.size() == 6);
  CHECK(order[5].id == "B");
}

TEST_CASE("band_slice zeroes everything outside the band", "[features]") {
  const Mat ws = random_ws(3);
  const auto& b3 = band_by_id("B3");
  const Mat s = band_slice(ws, b3);
  REQUIRE(s.rows == ws.rows);
  REQUIRE(s.cols == ws.cols);
  for (int k = 0; k < ws.rows; ++k)
    for (int n = 0; n < ws.cols; ++n) {
      const bool in_band = k >= 11 && k <= 15;
      REQUIRE(s(k, n) == (in_band ? ws(k, n) : 0.0));
    }

  // the five slices add back to the original
  Mat sum(ws.rows, ws.cols);
  for (const auto& b : subbands()) {
    const Mat sl = band_slice(ws, b);
    for (std::size_t i = 0; i < sum.v.size(); ++i) sum.v[i] += sl.v[i];
  }
  CHECK(sum.v == ws.v);
}

TEST_CASE("relative power: concentration, uniformity, unit sum", "[features]") {
  // all energy in B3: that band averages exactly 1, others are undefined
  Mat only_b3(kFreqBins, kTimeFrames);
  Rng rng(4);
  for (int k = 11; k <= 15; ++k)
    for (int n = 0; n < kTimeFrames; ++n) only_b3(k, n) = rng.uniform(0.1, 1.0);
  CHECK(relative_power(only_b3, band_by_id("B3")) == 1.0);
  CHECK_FALSE(relative_power(only_b3, band_by_id("B1")).has_value());
  CHECK_FALSE(relative_power(only_b3, band_by_id("B5")).has_value());

  // flat spectrogram: RP_j is the band's share of the 45 bins
  const Mat flat(kFreqBins, kTimeFrames, 0.25);
  for (const auto& b : subbands()) {
    const auto rp = relative_power(flat, b);
    REQUIRE(rp.has_value());
    REQUIRE_THAT(*rp, Catch::Matchers::WithinAbs(b.bins.size() / 45.0, 1e-12));
  }

  // strictly positive random spectrogram: the five RPs sum to 1
  const Mat ws = random_ws(5);
  double total = 0.0;
  for (const auto& b : subbands()) total += relative_power(ws, b).value();
  REQUIRE_THAT(total, Catch::Matchers::WithinAbs(1.0, 1e-12));
}

TEST_CASE("AC power measures the non-DC share", "[features]") {
  Mat dc_only(kFreqBins, kTimeFrames);
  for (int n = 0; n < kTimeFrames; ++n) dc_only(0, n) = 1.0 + n;
  CHECK(ac_power(dc_only) == 0.0);

  Mat no_dc = random_ws(6);
  for (int n = 0; n < no_dc.cols; ++n) no_dc(0, n) = 0.0;
  CHECK(ac_power(no_dc) == 1.0);

  const Mat zero(kFreqBins, kTimeFrames);
  CHECK_FALSE(ac_power(zero).has_value());

  const Mat ws = random_ws(7);
  CHECK(close_opt(ac_power(ws), oracle::ac(ws), 1e-12));
}

TEST_CASE("per-frame spectral centroid", "[features]") {
  const auto& b = band_by_id("B5");

  Mat single(kFreqBins, kTimeFrames);
  single(30, 4) = 0.7;
  REQUIRE_THAT(spectral_centroid(single, b, 4).value(),
               Catch::Matchers::WithinRel(oracle::fhz(30), 1e-12));
  CHECK_FALSE(spectral_centroid(single, b, 5).has_value());

  Mat pair(kFreqBins, kTimeFrames);
  pair(25, 0) = 0.4;
  pair(35, 0) = 0.4;
  REQUIRE_THAT(spectral_centroid(pair, b, 0).value(),
               Catch::Matchers::WithinAbs((oracle::fhz(25) + oracle::fhz(35)) / 2.0, 1e-9));

  const Mat ws = random_ws(8);
  for (int n = 0; n < ws.cols; n += 7)
    for (const auto& band : all_bands()) {
      const auto lib = spectral_centroid(ws, band, n);
      const auto ref = oracle::centroid_frame(ws, band.bins, n);
      REQUIRE(close_opt(lib, ref, 1e-12));
    }
}

TEST_CASE("spectral bandwidth is the mean weighted variance in Hz^2", "[features]") {
  const auto& b = band_by_id("B5");

  Mat single(kFreqBins, kTimeFrames);
  for (int n = 0; n < kTimeFrames; ++n) single(33, n) = 0.5 + n * 0.01;
  // zero up to the rounding of the frame centroid against the bin frequency
  REQUIRE_THAT(spectral_bandwidth(single, b).value(), Catch::Matchers::WithinAbs(0.0, 1e-18));

  // two equal bins one apart: variance (delta_f / 2)^2 in every frame
  Mat pair(kFreqBins, kTimeFrames);
  for (int n = 0; n < kTimeFrames; ++n) {
    pair(25, n) = 0.3;
    pair(26, n) = 0.3;
  }
  const double half_gap = (oracle::fhz(26) - oracle::fhz(25)) / 2.0;
  REQUIRE_THAT(spectral_bandwidth(pair, b).value(),
               Catch::Matchers::WithinRel(half_gap * half_gap, 1e-9));

  const Mat ws = random_ws(9);
  for (const auto& band : all_bands()) {
    const auto lib = spectral_bandwidth(ws, band);
    const auto ref = oracle::bandwidth(ws, band.bins);
    REQUIRE(close_opt(lib, ref, 1e-9));
    REQUIRE(*lib >= 0.0);
  }
}

TEST_CASE("spectral crest against the closed forms", "[features]") {
  // flat band: peak equals mean, crest reduces to (f_hi - f_lo + 1) / n_bins
  const Mat flat(kFreqBins, kTimeFrames, 0.4);
  for (const auto& band : all_bands()) {
    const double span = oracle::fhz(band.bins.back()) - oracle::fhz(band.bins.front()) + 1.0;
    REQUIRE_THAT(spectral_crest(flat, band).value(),
                 Catch::Matchers::WithinRel(span / static_cast<double>(band.bins.size()), 1e-12));
  }

  // all band energy in one bin: crest = f-span regardless of the bin's level
  const auto& b2 = band_by_id("B2");
  Mat single(kFreqBins, kTimeFrames);
  for (int n = 0; n < kTimeFrames; ++n) single(8, n) = 1.7;
  const double span2 = oracle::fhz(10) - oracle::fhz(6) + 1.0;
  REQUIRE_THAT(spectral_crest(single, b2).value(), Catch::Matchers::WithinRel(span2, 1e-12));

  const Mat ws = random_ws(10);
  for (const auto& band : all_bands())
    REQUIRE(close_opt(spectral_crest(ws, band), oracle::crest(ws, band.bins), 1e-9));
}

TEST_CASE("spectral flatness: bounds and references", "[features]") {
  const Mat flat(kFreqBins, kTimeFrames, 0.125);
  for (const auto& band : all_bands())
    REQUIRE_THAT(spectral_flatness(flat, band).value(), Catch::Matchers::WithinAbs(1.0, 1e-12));

  // a lone spike with floored companions is extremely non-flat
  const auto& b5 = band_by_id("B5");
  Mat spike(kFreqBins, kTimeFrames);
  for (int n = 0; n < kTimeFrames; ++n) spike(30, n) = 1.0;
  CHECK(spectral_flatness(spike, b5).value() < 1e-6);

  const Mat ws = random_ws(11);
  for (const auto& band : all_bands()) {
    const auto lib = spectral_flatness(ws, band);
    REQUIRE(close_opt(lib, oracle::flatness(ws, band.bins), 1e-9));
    REQUIRE(*lib >= 0.0);
    REQUIRE(*lib <= 1.0 + 1e-12);  // AM >= GM
  }
}

TEST_CASE("spectral flux telescopes to the endpoint difference", "[features]") {
  const Mat constant(kFreqBins, kTimeFrames, 0.6);
  for (const auto& band : all_bands()) CHECK(spectral_flux(constant, band) == 0.0);

  // single-bin unit ramp: every consecutive difference is exactly 1
  const auto& b4 = band_by_id("B4");
  Mat ramp(kFreqBins, kTimeFrames);
  for (int n = 0; n < kTimeFrames; ++n) ramp(18, n) = static_cast<double>(n);
  CHECK(spectral_flux(ramp, b4) == 1.0);

  const Mat ws = random_ws(12);
  for (const auto& band : all_bands())
    REQUIRE_THAT(spectral_flux(ws, band),
                 Catch::Matchers::WithinAbs(oracle::flux(ws, band.bins), 1e-9));
}

TEST_CASE("Renyi entropy of order 4", "[features]") {
  // B1 has six bins; uniform distribution gives ln 6 for any entropy order
  const auto& b1 = band_by_id("B1");
  Mat uniform(kFreqBins, kTimeFrames);
  for (int k = 0; k <= 5; ++k)
    for (int n = 0; n < kTimeFrames; ++n) uniform(k, n) = 0.2;
  REQUIRE_THAT(renyi_entropy(uniform, b1).value(),
               Catch::Matchers::WithinAbs(1.791759469228055, 1e-12));

  // all mass on one bin: zero entropy
  Mat single(kFreqBins, kTimeFrames);
  for (int n = 0; n < kTimeFrames; ++n) single(2, n) = 0.9;
  CHECK(renyi_entropy(single, b1).value() == 0.0);

  const Mat ws = random_ws(13);
  for (const auto& band : all_bands())
    REQUIRE(close_opt(renyi_entropy(ws, band), oracle::renyi(ws, band.bins), 1e-12));
}

TEST_CASE("spectral rolloff at 85 percent", "[features]") {
  const auto& b3 = band_by_id("B3");
  Mat single(kFreqBins, kTimeFrames);
  for (int n = 0; n < kTimeFrames; ++n) single(13, n) = 0.8;
  REQUIRE_THAT(spectral_rolloff(single, b3).value(),
               Catch::Matchers::WithinRel(oracle::fhz(13), 1e-12));

  // flat full band: ceil(0.85 * 45) = 39 bins needed, so bin index 38
  const Mat flat(kFreqBins, kTimeFrames, 0.3);
  REQUIRE_THAT(spectral_rolloff(flat, global_band()).value(),
               Catch::Matchers::WithinRel(oracle::fhz(38), 1e-12));

  const Mat ws = random_ws(14);
  for (const auto& band : all_bands()) {
    const auto lib = spectral_rolloff(ws, band);
    const auto ref = oracle::rolloff(ws, band.bins);
    REQUIRE(lib.has_value() == ref.has_value());
    REQUIRE(*lib == *ref);
  }
}

TEST_CASE("feature vector: gating, AC slot, and wiring", "[features]") {
  // no energy anywhere: every band row is fully undefined
  const auto empty_fv = feature_vector(wrap(Mat(kFreqBins, kTimeFrames)), 70.0);
  REQUIRE(empty_fv.bands.size() == 6);
  for (const auto& bf : empty_fv.bands) {
    REQUIRE(bf.values.size() == 7);
    for (const auto& v : bf.values) CHECK_FALSE(v.has_value());
  }

  // B2-only energy: B2 and the global band respond, the others stay undefined
  Mat b2_only(kFreqBins, kTimeFrames);
  Rng rng(15);
  for (int k = 6; k <= 10; ++k)
    for (int n = 0; n < kTimeFrames; ++n) b2_only(k, n) = rng.uniform(0.1, 1.0);
  const auto fv = feature_vector(wrap(b2_only, "p09"), 50.0);
  CHECK(fv.patient_id == "p09");
  CHECK(fv.th == 50.0);
  REQUIRE(fv.bands.size() == 6);
  CHECK(fv.bands[0].band_id == "B1");
  CHECK(fv.bands[5].band_id == "B");
  for (int j : {0, 2, 3, 4})
    for (const auto& v : fv.bands[j].values) CHECK_FALSE(v.has_value());
  CHECK(fv.bands[1].values[0] == 1.0);  // RP of the only active band
  CHECK(fv.bands[5].values[0] == 1.0);  // AC: bin 0 is outside B2, so no DC power

  // wiring matches the individual feature calls on a generic input
  const Mat ws = random_ws(16);
  const auto gv = feature_vector(wrap(ws), 60.0);
  const auto bands = all_bands();
  for (std::size_t bi = 0; bi < 6; ++bi) {
    const auto& band = bands[bi];
    const auto& vals = gv.bands[bi].values;
    CHECK(vals[0] == (band.id == "B" ? ac_power(ws) : relative_power(ws, band)));
    CHECK(vals[1] == spectral_bandwidth(ws, band));
    CHECK(vals[2] == spectral_crest(ws, band));
    CHECK(vals[3] == spectral_flatness(ws, band));
    CHECK(vals[4] == spectral_flux(ws, band));
    CHECK(vals[5] == renyi_entropy(ws, band));
    CHECK(vals[6] == spectral_rolloff(ws, band));
  }
}

TEST_CASE("amplitude scaling moves only the flux", "[features]") {
  const Mat ws = random_ws(17);
  Mat scaled = ws;
  for (auto& v : scaled.v) v *= 3.7;

  for (const auto& band : all_bands()) {
    REQUIRE_THAT(*relative_power(scaled, band),
                 Catch::Matchers::WithinRel(*relative_power(ws, band), 1e-12));
    REQUIRE_THAT(*spectral_bandwidth(scaled, band),
                 Catch::Matchers::WithinRel(*spectral_bandwidth(ws, band), 1e-12));
    REQUIRE_THAT(*spectral_crest(scaled, band),
                 Catch::Matchers::WithinRel(*spectral_crest(ws, band), 1e-12));
    REQUIRE_THAT(*spectral_flatness(scaled, band),
                 Catch::Matchers::WithinRel(*spectral_flatness(ws, band), 1e-9));
    REQUIRE_THAT(*renyi_entropy(scaled, band),
                 Catch::Matchers::WithinRel(*renyi_entropy(ws, band), 1e-12));
    REQUIRE(*spectral_rolloff(scaled, band) == *spectral_rolloff(ws, band));
    REQUIRE_THAT(spectral_flux(scaled, band),
                 Catch::Matchers::WithinRel(3.7 * spectral_flux(ws, band), 1e-12));
  }
  REQUIRE_THAT(*ac_power(scaled), Catch::Matchers::WithinRel(*ac_power(ws), 1e-12));
}

TEST_CASE("hundred-spectrogram sweep against independent oracles", "[features]") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Mat ws = random_ws(1000 + seed, 0.3);  // ~30% silent columns
    for (const auto& band : all_bands()) {
      REQUIRE(close_opt(band.id == "B" ? ac_power(ws) : relative_power(ws, band),
                        band.id == "B" ? oracle::ac(ws) : oracle::rp(ws, band.bins)));
      REQUIRE(close_opt(spectral_bandwidth(ws, band), oracle::bandwidth(ws, band.bins)));
      REQUIRE(close_opt(spectral_crest(ws, band), oracle::crest(ws, band.bins)));
      REQUIRE(close_opt(spectral_flatness(ws, band), oracle::flatness(ws, band.bins)));
      REQUIRE_THAT(spectral_flux(ws, band),
                   Catch::Matchers::WithinAbs(oracle::flux(ws, band.bins), 1e-9));
      REQUIRE(close_opt(renyi_entropy(ws, band), oracle::renyi(ws, band.bins)));
      REQUIRE(close_opt(spectral_rolloff(ws, band), oracle::rolloff(ws, band.bins)));
    }
  }
}

TEST_CASE("feature CSV round-trips through the parser", "[features]") {
  CHECK(feature_csv_header() == "patient_id,Th,band,RP,SpBW,SpCF,SpF,SpFx,SpRE,SpR\n");
  CHECK(feature_names() ==
        std::vector<std::string>{"RP", "SpBW", "SpCF", "SpF", "SpFx", "SpRE", "SpR"});

  // B2-only input leaves undefined cells, exercising empty-cell round-trip
  Mat b2_only(kFreqBins, kTimeFrames);
  Rng rng(18);
  for (int k = 6; k <= 10; ++k)
    for (int n = 0; n < kTimeFrames; ++n) b2_only(k, n) = rng.uniform(0.1, 1.0);
  const auto fv = feature_vector(wrap(b2_only, "p03"), 80.0);
  const std::string csv = feature_csv_header() + feature_csv_rows(fv);

  const FeatureTable table = parse_features_csv(csv);
  REQUIRE(table.rows.size() == 6);
  for (std::size_t bi = 0; bi < 6; ++bi) {
    const auto& row = table.rows[bi];
    CHECK(row.patient_id == "p03");
    CHECK(row.th == 80.0);
    CHECK(row.band == fv.bands[bi].band_id);
    REQUIRE(row.values.size() == 7);
    for (std::size_t f = 0; f < 7; ++f) {
      REQUIRE(row.values[f].has_value() == fv.bands[bi].values[f].has_value());
      if (row.values[f])
        REQUIRE_THAT(*row.values[f],
                     Catch::Matchers::WithinRel(*fv.bands[bi].values[f], 1e-8));
    }
  }

  CHECK(table.find("p03", 80.0, "B3") != nullptr);
  CHECK(table.find("p03", 70.0, "B3") == nullptr);
  CHECK(table.find("p04", 80.0, "B3") == nullptr);
}
