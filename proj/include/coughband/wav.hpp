#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace coughband {

struct PcmSignal {
  std::vector<double> samples;  // mono, in [-1, 1]
  double sample_rate = 0.0;
};

namespace detail {

inline std::uint32_t read_u32le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
inline std::uint16_t read_u16le(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

}  // namespace detail

// RIFF/WAVE PCM decoder: 8/16/24-bit integer and 32-bit float, any channel
// count (channels are averaged to mono). Integer samples are scaled by the
// type's full-scale negative magnitude (e.g. 16-bit: x / 32768).
inline PcmSignal decode_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open wav file: " + path);
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 || std::memcmp(buf.data() + 8, "WAVE", 4) != 0)
    throw std::runtime_error("not a RIFF/WAVE file: " + path);

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;
  bool have_fmt = false;

  std::size_t pos = 12;
  while (pos + 8 <= buf.size()) {
    const char* id = reinterpret_cast<const char*>(buf.data() + pos);
    std::uint32_t len = detail::read_u32le(buf.data() + pos + 4);
    const std::size_t body = pos + 8;
    if (body + len > buf.size()) throw std::runtime_error("truncated chunk in wav file: " + path);
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (len < 16) throw std::runtime_error("malformed fmt chunk: " + path);
      const unsigned char* p = buf.data() + body;
      format = detail::read_u16le(p);
      channels = detail::read_u16le(p + 2);
      rate = detail::read_u32le(p + 4);
      bits = detail::read_u16le(p + 14);
      if (format == 0xFFFE && len >= 40) format = detail::read_u16le(p + 24);  // extensible: subformat GUID
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      data = buf.data() + body;
      data_len = len;
    }
    pos = body + len + (len & 1);  // chunks are word-aligned
  }

  if (!have_fmt || data == nullptr) throw std::runtime_error("wav file missing fmt/data chunk: " + path);
  if (channels == 0 || rate == 0) throw std::runtime_error("malformed wav header: " + path);
  if (format != 1 && format != 3) throw std::runtime_error("unsupported wav encoding (want PCM or float): " + path);
  if (format == 1 && bits != 8 && bits != 16 && bits != 24)
    throw std::runtime_error("unsupported PCM bit depth " + std::to_string(bits) + ": " + path);
  if (format == 3 && bits != 32) throw std::runtime_error("unsupported float bit depth: " + path);

  const std::size_t bytes_per_sample = bits / 8;
  const std::size_t frame_bytes = bytes_per_sample * channels;
  const std::size_t frames = frame_bytes == 0 ? 0 : data_len / frame_bytes;

  PcmSignal out;
  out.sample_rate = static_cast<double>(rate);
  out.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (std::uint16_t ch = 0; ch < channels; ++ch) {
      const unsigned char* p = data + i * frame_bytes + ch * bytes_per_sample;
      double s = 0.0;
      if (format == 3) {
        std::uint32_t u = detail::read_u32le(p);
        float fv;
        std::memcpy(&fv, &u, 4);
        s = fv;
      } else if (bits == 8) {
        s = (static_cast<int>(p[0]) - 128) / 128.0;
      } else if (bits == 16) {
        std::int16_t v = static_cast<std::int16_t>(p[0] | (p[1] << 8));
        s = v / 32768.0;
      } else {  // 24
        std::int32_t v = static_cast<std::int32_t>(p[0] | (p[1] << 8) | (p[2] << 16));
        if (v & 0x800000) v -= 0x1000000;
        s = v / 8388608.0;
      }
      acc += s;
    }
    out.samples[i] = acc / channels;
  }
  return out;
}

// 16-bit mono PCM writer. Samples are clamped to [-1, 1].
inline void write_wav(const std::string& path, const std::vector<double>& samples, std::uint32_t rate) {
  std::vector<unsigned char> out;
  const std::uint32_t data_len = static_cast<std::uint32_t>(samples.size() * 2);
  auto push_u32 = [&](std::uint32_t v) {
    out.push_back(v & 0xff); out.push_back((v >> 8) & 0xff);
    out.push_back((v >> 16) & 0xff); out.push_back((v >> 24) & 0xff);
  };
  auto push_u16 = [&](std::uint16_t v) {
    out.push_back(v & 0xff); out.push_back((v >> 8) & 0xff);
  };
  auto push_tag = [&](const char* t) { out.insert(out.end(), t, t + 4); };

  push_tag("RIFF"); push_u32(36 + data_len); push_tag("WAVE");
  push_tag("fmt "); push_u32(16);
  push_u16(1); push_u16(1); push_u32(rate);
  push_u32(rate * 2); push_u16(2); push_u16(16);
  push_tag("data"); push_u32(data_len);
  for (double s : samples) {
    double c = s < -1.0 ? -1.0 : (s > 1.0 ? 1.0 : s);
    std::int16_t v = static_cast<std::int16_t>(std::lrint(c * 32767.0));
    push_u16(static_cast<std::uint16_t>(v));
  }

  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write wav file: " + path);
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
}

}  // namespace coughband
