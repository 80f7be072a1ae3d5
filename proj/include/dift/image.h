#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dift/errors.h"

namespace dift {

// 8-bit raster, interleaved, row-major. channels is 1 (gray) or 3 (RGB).
struct ImageBuf {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> data;

  ImageBuf() = default;
  ImageBuf(int w, int h, int c, std::uint8_t fill = 0)
      : width(w), height(h), channels(c),
        data(static_cast<std::size_t>(w) * h * c, fill) {
    if (w < 1 || h < 1 || (c != 1 && c != 3)) throw DataError("image: bad dimensions");
  }

  std::uint8_t& at(int x, int y, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::uint8_t at(int x, int y, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
};

// Binary PPM (P6) / PGM (P5) only, max value 255.
ImageBuf load_pnm(const std::string& path);
void save_pnm(const ImageBuf& img, const std::string& path);

// Writes to a temp file in the same directory, renames on success.
void atomic_write_file(const std::string& path, const std::string& bytes);
std::string read_file(const std::string& path);

}  // namespace dift
