#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <zlib.h>

#include "svs/tensor.hpp"

namespace svs {

// Grayscale raster of a {bins, frames} matrix: frequency ascends upward, time
// runs rightward, values min-max scaled. A constant matrix maps to mid-gray.
inline std::vector<uint8_t> spectrogram_pixels(const Tensor<float>& spec,
                                               int* width, int* height) {
  if (spec.ndim() != 2) throw ShapeError("spectrogram_pixels: expected a matrix");
  for (size_t i = 0; i < spec.numel(); ++i)
    if (!std::isfinite(static_cast<double>(spec.data()[i])))
      throw NumericError("spectrogram_pixels: non-finite values");
  int bins = spec.dim(0), frames = spec.dim(1);
  float lo = spec.data()[0], hi = spec.data()[0];
  for (size_t i = 0; i < spec.numel(); ++i) {
    lo = std::min(lo, spec.data()[i]);
    hi = std::max(hi, spec.data()[i]);
  }
  std::vector<uint8_t> px(static_cast<size_t>(bins) * frames);
  for (int row = 0; row < bins; ++row) {
    int bin = bins - 1 - row;  // top row = highest frequency
    for (int t = 0; t < frames; ++t) {
      float v = spec.data()[static_cast<size_t>(bin) * frames + t];
      double g = hi > lo ? (v - lo) / static_cast<double>(hi - lo) : 0.5;
      px[static_cast<size_t>(row) * frames + t] =
          static_cast<uint8_t>(std::lround(g * 255.0));
    }
  }
  *width = frames;
  *height = bins;
  return px;
}

inline void write_pgm(const std::filesystem::path& path, const Tensor<float>& spec) {
  int w = 0, h = 0;
  std::vector<uint8_t> px = spectrogram_pixels(spec, &w, &h);
  std::string out = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  out.append(reinterpret_cast<const char*>(px.data()), px.size());
  write_file_atomic(path, out);
}

namespace detail {
inline void put_u32be(std::string& s, uint32_t v) {
  for (int i = 3; i >= 0; --i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void png_chunk(std::string& out, const char type[4], const std::string& body) {
  put_u32be(out, static_cast<uint32_t>(body.size()));
  std::string tag(type, 4);
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(tag.data()), 4);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(body.data()),
              static_cast<uInt>(body.size()));
  out += tag;
  out += body;
  put_u32be(out, static_cast<uint32_t>(crc));
}
}  // namespace detail

// Minimal 8-bit grayscale PNG (filter 0 rows, one zlib stream).
inline void write_png(const std::filesystem::path& path, const Tensor<float>& spec) {
  int w = 0, h = 0;
  std::vector<uint8_t> px = spectrogram_pixels(spec, &w, &h);
  std::string raw;
  raw.reserve(static_cast<size_t>(h) * (static_cast<size_t>(w) + 1));
  for (int row = 0; row < h; ++row) {
    raw.push_back('\0');  // filter type 0
    raw.append(reinterpret_cast<const char*>(px.data() + static_cast<size_t>(row) * w),
               static_cast<size_t>(w));
  }
  uLongf comp_len = compressBound(static_cast<uLong>(raw.size()));
  std::string compressed(comp_len, '\0');
  if (compress2(reinterpret_cast<Bytef*>(compressed.data()), &comp_len,
                reinterpret_cast<const Bytef*>(raw.data()),
                static_cast<uLong>(raw.size()), 9) != Z_OK)
    throw IoError("write_png: deflate failed");
  compressed.resize(comp_len);

  std::string out("\x89PNG\r\n\x1a\n", 8);
  std::string ihdr;
  detail::put_u32be(ihdr, static_cast<uint32_t>(w));
  detail::put_u32be(ihdr, static_cast<uint32_t>(h));
  ihdr.push_back(8);   // bit depth
  ihdr.push_back(0);   // grayscale
  ihdr.push_back(0);   // compression
  ihdr.push_back(0);   // filter
  ihdr.push_back(0);   // no interlace
  detail::png_chunk(out, "IHDR", ihdr);
  detail::png_chunk(out, "IDAT", compressed);
  detail::png_chunk(out, "IEND", "");
  write_file_atomic(path, out);
}

// PGM always; PNG alongside when the raster is within sane bounds.
inline std::vector<std::filesystem::path> render_spectrogram_image(
    const Tensor<float>& spec, const std::filesystem::path& stem) {
  std::vector<std::filesystem::path> written;
  std::filesystem::path pgm = stem;
  pgm += ".pgm";
  write_pgm(pgm, spec);
  written.push_back(pgm);
  if (spec.dim(0) <= 16384 && spec.dim(1) <= 16384) {
    std::filesystem::path png = stem;
    png += ".png";
    write_png(png, spec);
    written.push_back(png);
  }
  return written;
}

}  // namespace svs
