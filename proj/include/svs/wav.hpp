#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "svs/common.hpp"

namespace svs {

struct Waveform {
  std::vector<float> samples;  // mono, nominally in [-1, 1]
  int sample_rate = 22050;
};

namespace detail {
inline void put_u32(std::string& s, uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u16(std::string& s, uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
}
inline uint32_t get_u32(const std::string& s, size_t off) {
  if (off + 4 > s.size()) throw ParseError("wav: truncated file");
  uint32_t v = 0;
  for (int i = 3; i >= 0; --i)
    v = (v << 8) | static_cast<uint8_t>(s[off + static_cast<size_t>(i)]);
  return v;
}
inline uint16_t get_u16(const std::string& s, size_t off) {
  if (off + 2 > s.size()) throw ParseError("wav: truncated file");
  return static_cast<uint16_t>(static_cast<uint8_t>(s[off]) |
                               (static_cast<uint8_t>(s[off + 1]) << 8));
}
}  // namespace detail

// RIFF/WAVE, PCM 16-bit little-endian mono. Floats are scaled by 32767 and
// clipped on write.
inline void write_wav(const std::filesystem::path& path, const Waveform& w) {
  std::string out;
  uint32_t n = static_cast<uint32_t>(w.samples.size());
  uint32_t data_bytes = n * 2;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  detail::put_u32(out, 36 + data_bytes);
  out += "WAVE";
  out += "fmt ";
  detail::put_u32(out, 16);
  detail::put_u16(out, 1);  // PCM
  detail::put_u16(out, 1);  // mono
  detail::put_u32(out, static_cast<uint32_t>(w.sample_rate));
  detail::put_u32(out, static_cast<uint32_t>(w.sample_rate) * 2);
  detail::put_u16(out, 2);   // block align
  detail::put_u16(out, 16);  // bits
  out += "data";
  detail::put_u32(out, data_bytes);
  for (float x : w.samples) {
    float c = std::min(1.0f, std::max(-1.0f, x));
    int16_t s = static_cast<int16_t>(std::lrint(c * 32767.0f));
    out.push_back(static_cast<char>(s & 0xff));
    out.push_back(static_cast<char>((s >> 8) & 0xff));
  }
  write_file_atomic(path, out);
}

inline Waveform read_wav(const std::filesystem::path& path) {
  std::string s = read_file(path);
  if (s.size() < 44 || s.compare(0, 4, "RIFF") != 0 || s.compare(8, 4, "WAVE") != 0)
    throw ParseError("wav: not a RIFF/WAVE file: " + path.string());
  size_t off = 12;
  int sample_rate = 0;
  bool fmt_ok = false;
  Waveform w;
  while (off + 8 <= s.size()) {
    std::string id = s.substr(off, 4);
    uint32_t len = detail::get_u32(s, off + 4);
    size_t body = off + 8;
    if (body + len > s.size()) throw ParseError("wav: truncated chunk in " + path.string());
    if (id == "fmt ") {
      uint16_t fmt = detail::get_u16(s, body);
      uint16_t channels = detail::get_u16(s, body + 2);
      sample_rate = static_cast<int>(detail::get_u32(s, body + 4));
      uint16_t bits = detail::get_u16(s, body + 14);
      if (fmt != 1 || channels != 1 || bits != 16)
        throw ParseError("wav: only PCM16 mono is supported: " + path.string());
      fmt_ok = true;
    } else if (id == "data") {
      if (!fmt_ok) throw ParseError("wav: data chunk before fmt: " + path.string());
      size_t count = len / 2;
      w.samples.resize(count);
      for (size_t i = 0; i < count; ++i) {
        int16_t v = static_cast<int16_t>(detail::get_u16(s, body + 2 * i));
        w.samples[i] = static_cast<float>(v) / 32767.0f;
      }
      w.sample_rate = sample_rate;
      return w;
    }
    off = body + len + (len & 1);
  }
  throw ParseError("wav: missing data chunk: " + path.string());
}

}  // namespace svs
