#include "dift/image.h"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace dift {

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open file: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  if (!f.good() && !f.eof()) throw DataError("read failed: " + path);
  return ss.str();
}

void atomic_write_file(const std::string& path, const std::string& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot open file for writing: " + tmp);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    f.flush();
    if (!f.good()) {
      f.close();
      std::remove(tmp.c_str());
      throw DataError("write failed: " + tmp);
    }
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw DataError("rename failed: " + path);
  }
}

namespace {

// Skips whitespace and '#' comments between header tokens.
int next_header_int(const std::string& s, std::size_t& pos, const std::string& path) {
  while (pos < s.size()) {
    const char c = s[pos];
    if (c == '#') {
      while (pos < s.size() && s[pos] != '\n') ++pos;
    } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      ++pos;
    } else {
      break;
    }
  }
  if (pos >= s.size() || s[pos] < '0' || s[pos] > '9')
    throw DataError("malformed pnm header: " + path);
  long v = 0;
  while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') {
    v = v * 10 + (s[pos] - '0');
    if (v > 1 << 20) throw DataError("pnm header value out of range: " + path);
    ++pos;
  }
  return static_cast<int>(v);
}

}  // namespace

ImageBuf load_pnm(const std::string& path) {
  const std::string s = read_file(path);
  if (s.size() < 2 || s[0] != 'P' || (s[1] != '5' && s[1] != '6'))
    throw DataError("not a binary PGM/PPM (P5/P6): " + path);
  const int channels = s[1] == '6' ? 3 : 1;
  std::size_t pos = 2;
  const int w = next_header_int(s, pos, path);
  const int h = next_header_int(s, pos, path);
  const int maxval = next_header_int(s, pos, path);
  if (w < 1 || h < 1) throw DataError("pnm: bad dimensions: " + path);
  if (maxval != 255) throw DataError("pnm: max value must be 255: " + path);
  if (pos >= s.size() || !(s[pos] == ' ' || s[pos] == '\t' || s[pos] == '\r' || s[pos] == '\n'))
    throw DataError("pnm: missing whitespace after header: " + path);
  ++pos;
  const std::size_t need = static_cast<std::size_t>(w) * h * channels;
  if (s.size() - pos != need) throw DataError("pnm: payload size mismatch: " + path);
  ImageBuf img(w, h, channels);
  std::copy(s.begin() + static_cast<std::ptrdiff_t>(pos), s.end(), img.data.begin());
  return img;
}

void save_pnm(const ImageBuf& img, const std::string& path) {
  if (img.channels != 1 && img.channels != 3) throw DataError("save_pnm: channels must be 1 or 3");
  std::string out;
  out.reserve(img.data.size() + 32);
  out += img.channels == 3 ? "P6\n" : "P5\n";
  out += std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(img.data.data()), img.data.size());
  atomic_write_file(path, out);
}

}  // namespace dift
