#include <catch2/catch_amalgamated.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <coughband/audio.hpp>
#include <coughband/manifest.hpp>
#include <coughband/wav.hpp>
#include <json.hpp>

#include "testutil.hpp"

using namespace coughband;
namespace fs = std::filesystem;

namespace {

std::string le32(std::uint32_t v) {
  std::string s(4, '\0');
  for (int i = 0; i < 4; ++i) s[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  return s;
}

std::string le16(std::uint16_t v) {
  std::string s(2, '\0');
  s[0] = static_cast<char>(v & 0xff);
  s[1] = static_cast<char>((v >> 8) & 0xff);
  return s;
}

std::string wav_bytes(std::uint16_t format, std::uint16_t channels, std::uint32_t rate,
                      std::uint16_t bits, const std::string& data) {
  const std::uint16_t block = static_cast<std::uint16_t>(channels * bits / 8);
  std::string fmt = le16(format) + le16(channels) + le32(rate) + le32(rate * block) +
                    le16(block) + le16(bits);
  std::string body = "WAVE";
  body += "fmt " + le32(static_cast<std::uint32_t>(fmt.size())) + fmt;
  body += "data" + le32(static_cast<std::uint32_t>(data.size())) + data;
  if (data.size() % 2) body += '\0';
  return "RIFF" + le32(static_cast<std::uint32_t>(body.size())) + body;
}

std::string pcm16(const std::vector<int>& vals) {
  std::string s;
  for (int v : vals) s += le16(static_cast<std::uint16_t>(static_cast<std::int16_t>(v)));
  return s;
}

fs::path write_wav_file(const fs::path& dir, const std::string& name, const std::string& bytes) {
  const fs::path p = dir / name;
  testutil::spit(p, bytes);
  return p;
}

}  // namespace

TEST_CASE("16-bit PCM samples scale by 1/32768", "[audio]") {
  const auto dir = testutil::scratch_dir("wav16");
  const auto p = write_wav_file(dir, "a.wav", wav_bytes(1, 1, 44100, 16, pcm16({16384, 0, -32768, 32767})));
  const PcmSignal sig = decode_wav(p.string());
  REQUIRE(sig.sample_rate == 44100.0);
  REQUIRE(sig.samples.size() == 4);
  CHECK(sig.samples[0] == 0.5);
  CHECK(sig.samples[1] == 0.0);
  CHECK(sig.samples[2] == -1.0);
  CHECK(sig.samples[3] == 32767.0 / 32768.0);
}

TEST_CASE("stereo channels average to mono", "[audio]") {
  const auto dir = testutil::scratch_dir("wavst");
  // frame 0: +0.5 / -0.5 cancel; frame 1: 0.5 / 0.5
  const auto p = write_wav_file(dir, "s.wav", wav_bytes(1, 2, 8000, 16, pcm16({16384, -16384, 16384, 16384})));
  const PcmSignal sig = decode_wav(p.string());
  REQUIRE(sig.samples.size() == 2);
  CHECK(sig.samples[0] == 0.0);
  CHECK(sig.samples[1] == 0.5);
}

TEST_CASE("8-bit PCM is offset binary scaled by 1/128", "[audio]") {
  const auto dir = testutil::scratch_dir("wav8");
  std::string data;
  data += static_cast<char>(192);  // (192-128)/128 = 0.5
  data += static_cast<char>(128);  // 0
  data += static_cast<char>(0);    // -1
  const auto p = write_wav_file(dir, "b.wav", wav_bytes(1, 1, 8000, 8, data));
  const PcmSignal sig = decode_wav(p.string());
  REQUIRE(sig.samples.size() == 3);
  CHECK(sig.samples[0] == 0.5);
  CHECK(sig.samples[1] == 0.0);
  CHECK(sig.samples[2] == -1.0);
}

TEST_CASE("24-bit PCM scales by 1/8388608", "[audio]") {
  const auto dir = testutil::scratch_dir("wav24");
  std::string data;
  auto put24 = [&](std::int32_t v) {
    data += static_cast<char>(v & 0xff);
    data += static_cast<char>((v >> 8) & 0xff);
    data += static_cast<char>((v >> 16) & 0xff);
  };
  put24(0x400000);   // 0.5
  put24(-0x800000);  // -1
  const auto p = write_wav_file(dir, "c.wav", wav_bytes(1, 1, 8000, 24, data));
  const PcmSignal sig = decode_wav(p.string());
  REQUIRE(sig.samples.size() == 2);
  CHECK(sig.samples[0] == 0.5);
  CHECK(sig.samples[1] == -1.0);
}

TEST_CASE("32-bit float samples decode exactly", "[audio]") {
  const auto dir = testutil::scratch_dir("wavf");
  std::string data;
  for (float f : {0.25f, -0.75f}) {
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    data += le32(u);
  }
  const auto p = write_wav_file(dir, "f.wav", wav_bytes(3, 1, 8820, 32, data));
  const PcmSignal sig = decode_wav(p.string());
  REQUIRE(sig.samples.size() == 2);
  CHECK(sig.samples[0] == 0.25);
  CHECK(sig.samples[1] == -0.75);
}

TEST_CASE("write/decode round-trip stays within 16-bit quantization", "[audio]") {
  const auto dir = testutil::scratch_dir("wavrt");
  std::vector<double> samples(1000);
  for (std::size_t i = 0; i < samples.size(); ++i)
    samples[i] = 0.8 * std::sin(0.01 * static_cast<double>(i));
  const auto p = dir / "rt.wav";
  write_wav(p.string(), samples, 8820);
  const PcmSignal sig = decode_wav(p.string());
  REQUIRE(sig.samples.size() == samples.size());
  REQUIRE(sig.sample_rate == 8820.0);
  for (std::size_t i = 0; i < samples.size(); ++i)
    REQUIRE_THAT(sig.samples[i], Catch::Matchers::WithinAbs(samples[i], 5e-5));
}

TEST_CASE("malformed wav files are rejected", "[audio]") {
  const auto dir = testutil::scratch_dir("wavbad");
  const auto not_riff = write_wav_file(dir, "x.wav", "JUNKJUNKJUNKJUNK");
  CHECK_THROWS_WITH(decode_wav(not_riff.string()), Catch::Matchers::ContainsSubstring("RIFF"));

  std::string good = wav_bytes(1, 1, 8000, 16, pcm16({1, 2, 3, 4}));
  const auto truncated = write_wav_file(dir, "t.wav", good.substr(0, good.size() - 3));
  CHECK_THROWS_WITH(decode_wav(truncated.string()), Catch::Matchers::ContainsSubstring("truncated"));

  std::string no_fmt = "RIFF" + le32(12) + "WAVE" + "data" + le32(0);
  const auto missing = write_wav_file(dir, "m.wav", no_fmt);
  CHECK_THROWS(decode_wav(missing.string()));

  CHECK_THROWS_WITH(decode_wav((dir / "absent.wav").string()),
                    Catch::Matchers::ContainsSubstring("cannot open"));
}

TEST_CASE("decimation divides the rate and floors the length", "[audio]") {
  PcmSignal in;
  in.sample_rate = 44100.0;
  in.samples.assign(44105, 0.0);
  const PcmSignal out = decimate(in, 5);
  CHECK(out.sample_rate == 8820.0);
  CHECK(out.samples.size() == 8821);  // floor(44105 / 5)
}

TEST_CASE("decimation by 1 is a bitwise pass-through", "[audio]") {
  PcmSignal in;
  in.sample_rate = 8820.0;
  for (int i = 0; i < 500; ++i) in.samples.push_back(std::sin(0.37 * i));
  const PcmSignal out = decimate(in, 1);
  CHECK(out.sample_rate == 8820.0);
  CHECK(out.samples == in.samples);
}

TEST_CASE("decimation rejects factors below 1", "[audio]") {
  PcmSignal in;
  in.sample_rate = 44100.0;
  in.samples.assign(100, 0.0);
  CHECK_THROWS_AS(decimate(in, 0), std::invalid_argument);
  CHECK_THROWS_AS(decimate(in, -3), std::invalid_argument);
}

TEST_CASE("decimation preserves DC away from the edges", "[audio]") {
  PcmSignal in;
  in.sample_rate = 44100.0;
  in.samples.assign(2000, 1.0);
  const PcmSignal out = decimate(in, 5);
  // filter half-width is 63 input samples; stay clear of both edges
  for (std::size_t m = 20; m + 20 < out.samples.size(); ++m)
    REQUIRE_THAT(out.samples[m], Catch::Matchers::WithinAbs(1.0, 1e-12));
}

TEST_CASE("decimation suppresses content above the new Nyquist", "[audio]") {
  PcmSignal in;
  in.sample_rate = 44100.0;
  in.samples.resize(4410);
  for (std::size_t i = 0; i < in.samples.size(); ++i)
    in.samples[i] = std::sin(2.0 * 3.14159265358979323846 * 10000.0 * static_cast<double>(i) / 44100.0);
  const PcmSignal out = decimate(in, 5);  // new Nyquist 4410 Hz < 10 kHz tone
  double peak = 0.0;
  for (std::size_t m = 20; m + 20 < out.samples.size(); ++m)
    peak = std::max(peak, std::abs(out.samples[m]));
  CHECK(peak < 0.01);
}

TEST_CASE("decimation length composes like a single larger factor", "[audio]") {
  for (std::size_t len : {600u, 601u, 605u, 640u, 659u}) {
    PcmSignal in;
    in.sample_rate = 52920.0;
    in.samples.assign(len, 0.25);
    const auto direct = decimate(in, 6);
    const auto staged = decimate(decimate(in, 2), 3);
    CHECK(direct.samples.size() == staged.samples.size());
    CHECK(direct.sample_rate == staged.sample_rate);
  }
}

TEST_CASE("segmentation cuts whole seconds and drops the tail", "[audio]") {
  PcmSignal in;
  in.sample_rate = kWorkRateHz;
  in.samples.assign(3 * kClipLen, 0.0);
  CHECK(segment_clips(in, "p", {}).size() == 3);

  in.samples.push_back(0.5);  // 3 s + 1 sample
  CHECK(segment_clips(in, "p", {}).size() == 3);

  in.samples.assign(kClipLen - 1, 0.0);
  CHECK(segment_clips(in, "p", {}).empty());
}

TEST_CASE("segmentation copies contiguous sample ranges", "[audio]") {
  PcmSignal in;
  in.sample_rate = kWorkRateHz;
  in.samples.resize(2 * kClipLen);
  for (std::size_t i = 0; i < in.samples.size(); ++i)
    in.samples[i] = static_cast<double>(i) * 1e-5;
  const auto clips = segment_clips(in, "p7", {});
  REQUIRE(clips.size() == 2);
  CHECK(clips[0].patient_id == "p7");
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < kClipLen; ++i)
      REQUIRE(clips[c].samples[i] == in.samples[static_cast<std::size_t>(c) * kClipLen + i]);
}

TEST_CASE("clip labels follow half-second overlap with cough precedence", "[audio]") {
  PcmSignal in;
  in.sample_rate = kWorkRateHz;
  in.samples.assign(5 * kClipLen, 0.0);

  const std::vector<LabelWindow> windows = {
      {0.0, 0.5, ClipLabel::kCough},        // exactly half of clip 0
      {1.0, 1.4, ClipLabel::kCough},        // 0.4 s cough ...
      {1.4, 2.0, ClipLabel::kNonCough},     // ... vs 0.6 s non-cough in clip 1
      {3.0, 3.5, ClipLabel::kCough},        // both labels reach 0.5 in clip 3:
      {3.5, 4.0, ClipLabel::kNonCough},     // cough wins
  };
  const auto clips = segment_clips(in, "p", windows);
  REQUIRE(clips.size() == 5);
  CHECK(clips[0].label == ClipLabel::kCough);
  CHECK(clips[1].label == ClipLabel::kNonCough);
  CHECK(clips[2].label == ClipLabel::kUnlabeled);
  CHECK(clips[3].label == ClipLabel::kCough);
  CHECK(clips[4].label == ClipLabel::kUnlabeled);
}

TEST_CASE("segmentation insists on the working rate", "[audio]") {
  PcmSignal in;
  in.sample_rate = 44100.0;
  in.samples.assign(44100, 0.0);
  CHECK_THROWS_AS(segment_clips(in, "p", {}), std::invalid_argument);
}

namespace {

// Minimal valid wav on disk so manifest entries can point at something real.
fs::path touch_wav(const fs::path& dir, const std::string& name) {
  return write_wav_file(dir, name, wav_bytes(1, 1, 44100, 16, pcm16({0, 0, 0, 0})));
}

fs::path write_manifest(const fs::path& dir, const nlohmann::json& j) {
  const fs::path p = dir / "manifest.json";
  testutil::spit(p, j.dump(2));
  return p;
}

}  // namespace

TEST_CASE("manifest loads patients, cohorts, and windows", "[audio]") {
  const auto dir = testutil::scratch_dir("man1");
  touch_wav(dir, "a.wav");
  touch_wav(dir, "b.wav");
  touch_wav(dir, "c.wav");
  const nlohmann::json j = nlohmann::json::array({
      {{"path", "a.wav"},
       {"patient_id", "p01"},
       {"groups", {{"G1", "C1"}, {"G2", "excluded"}}},
       {"labels", nlohmann::json::array({{{"start_s", 0.0}, {"end_s", 1.0}, {"label", "cough"}}})}},
      {{"path", "b.wav"}, {"patient_id", "p02"}, {"groups", {{"G1", "C2"}}}},
      {{"path", "c.wav"}, {"patient_id", "p03"}},
  });
  const auto m = load_manifest(write_manifest(dir, j).string());

  REQUIRE(m.entries.size() == 3);
  CHECK(m.patient_ids() == std::vector<std::string>{"p01", "p02", "p03"});
  CHECK(m.membership("p01", "G1") == Membership::kC1);
  CHECK(m.membership("p01", "G2") == Membership::kExcluded);
  CHECK(m.membership("p03", "G1") == Membership::kExcluded);  // no groups field
  CHECK(m.cohort("G1", Membership::kC1) == std::vector<std::string>{"p01"});
  CHECK(m.cohort("G1", Membership::kC2) == std::vector<std::string>{"p02"});
  CHECK(m.populated_groups() == std::vector<std::string>{"G1"});
  REQUIRE(m.entries[0].windows.size() == 1);
  CHECK(m.entries[0].windows[0].label == ClipLabel::kCough);
  CHECK(fs::path(m.entries[0].path).is_absolute());  // relative path resolved
  CHECK_THROWS(m.membership("nobody", "G1"));
}

TEST_CASE("manifest accepts repeat entries of one patient with identical groups", "[audio]") {
  const auto dir = testutil::scratch_dir("man2");
  touch_wav(dir, "a.wav");
  touch_wav(dir, "b.wav");
  const nlohmann::json j = nlohmann::json::array({
      {{"path", "a.wav"}, {"patient_id", "p01"}, {"groups", {{"G1", "C1"}}}},
      {{"path", "b.wav"}, {"patient_id", "p01"}, {"groups", {{"G1", "C1"}}}},
  });
  const auto m = load_manifest(write_manifest(dir, j).string());
  CHECK(m.entries.size() == 2);
  CHECK(m.patient_ids() == std::vector<std::string>{"p01"});
}

TEST_CASE("manifest rejects conflicting membership across entries", "[audio]") {
  const auto dir = testutil::scratch_dir("man3");
  touch_wav(dir, "a.wav");
  touch_wav(dir, "b.wav");
  const nlohmann::json j = nlohmann::json::array({
      {{"path", "a.wav"}, {"patient_id", "p01"}, {"groups", {{"G1", "C1"}}}},
      {{"path", "b.wav"}, {"patient_id", "p01"}, {"groups", {{"G1", "C2"}}}},
  });
  CHECK_THROWS_WITH(load_manifest(write_manifest(dir, j).string()),
                    Catch::Matchers::ContainsSubstring("conflicting"));
}

TEST_CASE("manifest rejects unknown group keys and cohort states", "[audio]") {
  const auto dir = testutil::scratch_dir("man4");
  touch_wav(dir, "a.wav");
  const nlohmann::json bad_key = nlohmann::json::array({
      {{"path", "a.wav"}, {"patient_id", "p01"}, {"groups", {{"G9", "C1"}}}},
  });
  CHECK_THROWS_WITH(load_manifest(write_manifest(dir, bad_key).string()),
                    Catch::Matchers::ContainsSubstring("G9"));

  const nlohmann::json bad_state = nlohmann::json::array({
      {{"path", "a.wav"}, {"patient_id", "p01"}, {"groups", {{"G1", "C3"}}}},
  });
  CHECK_THROWS_WITH(load_manifest(write_manifest(dir, bad_state).string()),
                    Catch::Matchers::ContainsSubstring("C3"));
}

TEST_CASE("manifest rejects structural problems", "[audio]") {
  const auto dir = testutil::scratch_dir("man5");
  touch_wav(dir, "a.wav");

  const nlohmann::json missing_file = nlohmann::json::array({
      {{"path", "ghost.wav"}, {"patient_id", "p01"}},
  });
  CHECK_THROWS_WITH(load_manifest(write_manifest(dir, missing_file).string()),
                    Catch::Matchers::ContainsSubstring("missing file"));

  const nlohmann::json no_pid = nlohmann::json::array({{{"path", "a.wav"}}});
  CHECK_THROWS(load_manifest(write_manifest(dir, no_pid).string()));

  const nlohmann::json empty_pid = nlohmann::json::array({
      {{"path", "a.wav"}, {"patient_id", ""}},
  });
  CHECK_THROWS_WITH(load_manifest(write_manifest(dir, empty_pid).string()),
                    Catch::Matchers::ContainsSubstring("patient_id"));

  const nlohmann::json bad_window = nlohmann::json::array({
      {{"path", "a.wav"},
       {"patient_id", "p01"},
       {"labels", nlohmann::json::array({{{"start_s", 2.0}, {"end_s", 2.0}, {"label", "cough"}}})}},
  });
  CHECK_THROWS_WITH(load_manifest(write_manifest(dir, bad_window).string()),
                    Catch::Matchers::ContainsSubstring("end <= start"));

  testutil::spit(dir / "obj.json", "{\"not\": \"a list\"}");
  CHECK_THROWS_WITH(load_manifest((dir / "obj.json").string()),
                    Catch::Matchers::ContainsSubstring("list"));

  testutil::spit(dir / "junk.json", "not json at all {{{");
  CHECK_THROWS_WITH(load_manifest((dir / "junk.json").string()),
                    Catch::Matchers::ContainsSubstring("JSON"));

  CHECK_THROWS_WITH(load_manifest((dir / "nope.json").string()),
                    Catch::Matchers::ContainsSubstring("cannot open"));
}

TEST_CASE("decode-decimate-segment chain is deterministic", "[audio]") {
  const auto dir = testutil::scratch_dir("chain");
  std::vector<double> samples(2 * 44100);
  for (std::size_t i = 0; i < samples.size(); ++i)
    samples[i] = 0.3 * std::sin(2.0 * 3.14159265358979323846 * 800.0 * static_cast<double>(i) / 44100.0);
  const auto p = dir / "tone.wav";
  write_wav(p.string(), samples, 44100);

  auto run = [&] {
    const PcmSignal sig = decimate(decode_wav(p.string()), 5);
    return segment_clips(sig, "p", {});
  };
  const auto a = run();
  const auto b = run();
  REQUIRE(a.size() == b.size());
  REQUIRE(a.size() == 2);
  for (std::size_t c = 0; c < a.size(); ++c) REQUIRE(a[c].samples == b[c].samples);
}
