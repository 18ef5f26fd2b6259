#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "coughband/matrix.hpp"

namespace coughband {

namespace detail {

inline void maybe_swap_f32(std::vector<std::uint32_t>& words) {
  if constexpr (std::endian::native == std::endian::big) {
    for (auto& w : words)
      w = ((w & 0xff) << 24) | ((w & 0xff00) << 8) | ((w >> 8) & 0xff00) | (w >> 24);
  }
}

}  // namespace detail

// Matrices move between pipeline stages as little-endian float32 blobs,
// row-major, shape carried by the reader.
inline void write_f32_blob(const std::string& path, const Mat& m) {
  std::vector<std::uint32_t> words(m.v.size());
  for (std::size_t i = 0; i < m.v.size(); ++i) {
    const float f = static_cast<float>(m.v[i]);
    std::memcpy(&words[i], &f, 4);
  }
  detail::maybe_swap_f32(words);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write blob: " + path);
  f.write(reinterpret_cast<const char*>(words.data()), static_cast<std::streamsize>(words.size() * 4));
}

inline Mat read_f32_blob(const std::string& path, int rows, int cols) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open blob: " + path);
  std::vector<std::uint32_t> words(static_cast<std::size_t>(rows) * cols);
  f.read(reinterpret_cast<char*>(words.data()), static_cast<std::streamsize>(words.size() * 4));
  if (f.gcount() != static_cast<std::streamsize>(words.size() * 4))
    throw std::runtime_error("blob truncated: " + path);
  char extra;
  if (f.read(&extra, 1))
    throw std::runtime_error("blob larger than expected shape: " + path);
  detail::maybe_swap_f32(words);
  Mat m(rows, cols);
  for (std::size_t i = 0; i < m.v.size(); ++i) {
    float fv;
    std::memcpy(&fv, &words[i], 4);
    m.v[i] = fv;
  }
  return m;
}

inline void write_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write json: " + path);
  f << j.dump(2) << "\n";
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open json: " + path);
  nlohmann::json j;
  f >> j;
  return j;
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write file: " + path);
  f << text;
}

}  // namespace coughband
