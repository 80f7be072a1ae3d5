#include "dift/sampler.h"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dift {

void PatchSpec::validate() const {
  if (size < 1 || size % 2 == 0) throw DataError("patch spec: size must be odd and positive");
  if (border < size / 2)
    throw DataError("patch spec: border " + std::to_string(border) + " smaller than size/2 = " +
                    std::to_string(size / 2));
}

Point rand_coords(int width, int height, const PatchSpec& spec, Rng& rng) {
  spec.validate();
  const int xs = width - 2 * spec.border;
  const int ys = height - 2 * spec.border;
  if (xs < 1 || ys < 1)
    throw DataError("image " + std::to_string(width) + "x" + std::to_string(height) +
                    " too small for border " + std::to_string(spec.border));
  Point p;
  p.x = spec.border + static_cast<int>(rng.uniform_u32(static_cast<std::uint32_t>(xs)));
  p.y = spec.border + static_cast<int>(rng.uniform_u32(static_cast<std::uint32_t>(ys)));
  return p;
}

Tensor extract_patch(const ImageBuf& img, Point center, int size) {
  if (size < 1 || size % 2 == 0) throw DataError("extract_patch: size must be odd and positive");
  const int h = size / 2;
  if (center.x - h < 0 || center.y - h < 0 || center.x + h >= img.width || center.y + h >= img.height)
    throw DataError("extract_patch: patch at (" + std::to_string(center.x) + "," +
                    std::to_string(center.y) + ") exceeds image bounds");
  Tensor t({3, size, size});
  for (int c = 0; c < 3; ++c) {
    const int sc = img.channels == 3 ? c : 0;
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x)
        t.at(c, y, x) = static_cast<float>(img.at(center.x - h + x, center.y - h + y, sc)) / 255.0f;
  }
  return t;
}

namespace {

const char* kHeaderCols[10] = {"lefteye_x",   "lefteye_y",   "righteye_x", "righteye_y",
                               "nose_x",      "nose_y",      "leftmouth_x", "leftmouth_y",
                               "rightmouth_x", "rightmouth_y"};

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

int parse_int(const std::string& tok, int line_no, const std::string& path) {
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(tok, &used);
  } catch (...) {
    throw DataError(path + " line " + std::to_string(line_no) + ": expected integer, got '" + tok + "'");
  }
  if (used != tok.size())
    throw DataError(path + " line " + std::to_string(line_no) + ": expected integer, got '" + tok + "'");
  return v;
}

std::vector<std::string> read_lines(const std::string& path) {
  const std::string s = read_file(path);
  std::vector<std::string> lines;
  std::string cur;
  for (char c : s) {
    if (c == '\n') {
      if (!cur.empty() && cur.back() == '\r') cur.pop_back();
      lines.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) lines.push_back(cur);
  return lines;
}

}  // namespace

LandmarkSet load_celeba_landmarks(const std::string& path, const ChannelGrouping& grouping) {
  if (grouping.groups.empty()) throw DataError("landmark grouping must have at least one channel");
  for (const auto& [name, idx] : grouping.groups) {
    if (idx.empty()) throw DataError("landmark grouping channel '" + name + "' is empty");
    for (int i : idx)
      if (i < 0 || i > 4) throw DataError("landmark grouping index out of range 0..4");
  }
  const auto lines = read_lines(path);
  if (lines.empty()) throw DataError(path + ": empty landmark file");
  const long count = parse_int(split_ws(lines[0]).size() == 1 ? split_ws(lines[0])[0] : "x", 1, path);
  if (count < 0) throw DataError(path + " line 1: negative count");
  if (lines.size() < 2) throw DataError(path + ": missing header line");
  const auto header = split_ws(lines[1]);
  if (header.size() != 10) throw DataError(path + " line 2: header must name ten columns");
  for (int i = 0; i < 10; ++i)
    if (header[static_cast<std::size_t>(i)] != kHeaderCols[i])
      throw DataError(path + " line 2: column " + std::to_string(i + 1) + " must be '" +
                      kHeaderCols[i] + "', got '" + header[static_cast<std::size_t>(i)] + "'");

  LandmarkSet set;
  std::size_t row = 2;
  for (; row < lines.size(); ++row) {
    const auto toks = split_ws(lines[row]);
    if (toks.empty()) break;  // tolerate trailing blank lines only
    const int line_no = static_cast<int>(row) + 1;
    if (toks.size() != 11)
      throw DataError(path + " line " + std::to_string(line_no) + ": expected id + 10 coordinates, got " +
                      std::to_string(toks.size() - 1) + " values");
    Point pts[5];
    for (int i = 0; i < 5; ++i) {
      pts[i].x = parse_int(toks[static_cast<std::size_t>(1 + 2 * i)], line_no, path);
      pts[i].y = parse_int(toks[static_cast<std::size_t>(2 + 2 * i)], line_no, path);
    }
    LandmarkChannels lm;
    for (const auto& [name, idx] : grouping.groups) {
      std::vector<Point> ch;
      for (int i : idx) ch.push_back(pts[i]);
      lm.channels.emplace_back(name, std::move(ch));
    }
    set.emplace_back(toks[0], std::move(lm));
  }
  for (; row < lines.size(); ++row)
    if (!split_ws(lines[row]).empty())
      throw DataError(path + " line " + std::to_string(row + 1) + ": data after blank line");
  if (static_cast<long>(set.size()) != count)
    throw DataError(path + ": count line says " + std::to_string(count) + " rows, found " +
                    std::to_string(set.size()));
  return set;
}

void save_celeba_landmarks(const LandmarkSet& set, const std::string& path) {
  std::string out = std::to_string(set.size()) + "\n";
  for (int i = 0; i < 10; ++i) {
    out += kHeaderCols[i];
    out += i + 1 < 10 ? ' ' : '\n';
  }
  for (const auto& [id, lm] : set) {
    std::vector<Point> pts;
    for (const auto& [name, ch] : lm.channels)
      for (Point p : ch) pts.push_back(p);
    if (pts.size() != 5)
      throw DataError("cannot serialize landmarks for '" + id + "': need exactly 5 points, have " +
                      std::to_string(pts.size()));
    out += id;
    for (Point p : pts) out += " " + std::to_string(p.x) + " " + std::to_string(p.y);
    out += "\n";
  }
  atomic_write_file(path, out);
}

namespace {

struct Canvas {
  int w, h;
  std::vector<double> rgb;  // interleaved

  Canvas(int w_, int h_, double fill) : w(w_), h(h_), rgb(static_cast<std::size_t>(w_) * h_ * 3, fill) {}
  double& at(int x, int y, int c) { return rgb[(static_cast<std::size_t>(y) * w + x) * 3 + c]; }
};

}  // namespace

LabeledImage synth_image(std::uint64_t seed, const SynthSpec& spec) {
  const int W = spec.width, H = spec.height;
  if (W < 4 * spec.slot_margin || H < 4 * spec.slot_margin)
    throw DataError("synth: image too small for feature slots");
  Rng rng(seed);
  Canvas img(W, H, spec.base);

  // smooth blotches: bilinear upsample of a coarse value grid
  const int cell = spec.blotch_cell;
  const int gw = W / cell + 2, gh = H / cell + 2;
  std::vector<double> grid(static_cast<std::size_t>(gw) * gh);
  for (auto& v : grid) v = rng.uniform_range64(-spec.blotch_amp, spec.blotch_amp);
  for (int y = 0; y < H; ++y) {
    const double fy = static_cast<double>(y) / cell;
    const int y0 = static_cast<int>(fy);
    const double ty = fy - y0;
    for (int x = 0; x < W; ++x) {
      const double fx = static_cast<double>(x) / cell;
      const int x0 = static_cast<int>(fx);
      const double tx = fx - x0;
      const double v = grid[static_cast<std::size_t>(y0) * gw + x0] * (1 - ty) * (1 - tx) +
                       grid[static_cast<std::size_t>(y0) * gw + x0 + 1] * (1 - ty) * tx +
                       grid[static_cast<std::size_t>(y0 + 1) * gw + x0] * ty * (1 - tx) +
                       grid[static_cast<std::size_t>(y0 + 1) * gw + x0 + 1] * ty * tx;
      for (int c = 0; c < 3; ++c) img.at(x, y, c) += v;
    }
  }

  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const double n = rng.uniform_range64(-spec.noise_amp, spec.noise_amp);
      for (int c = 0; c < 3; ++c) img.at(x, y, c) += n;
    }

  // feature classes in fixed order: ring, ring, disc, cross, cross
  const int kClass[5] = {0, 0, 1, 2, 2};
  const int m = spec.slot_margin;
  const Point slots[5] = {{m, m}, {W - 1 - m, m}, {m, H - 1 - m}, {W - 1 - m, H - 1 - m}, {W / 2, H / 2}};
  Point pos[5];
  bool placed = false;
  for (int attempt = 0; attempt < spec.max_place_attempts && !placed; ++attempt) {
    int perm[5] = {0, 1, 2, 3, 4};
    for (int i = 0; i < 4; ++i) {
      const int j = i + static_cast<int>(rng.uniform_u32(static_cast<std::uint32_t>(5 - i)));
      std::swap(perm[i], perm[j]);
    }
    for (int k = 0; k < 5; ++k) {
      pos[k].x = slots[perm[k]].x + rng.uniform_int(-spec.slot_jitter, spec.slot_jitter);
      pos[k].y = slots[perm[k]].y + rng.uniform_int(-spec.slot_jitter, spec.slot_jitter);
    }
    placed = true;
    for (int a = 0; a < 5 && placed; ++a)
      for (int b = a + 1; b < 5 && placed; ++b) {
        const double need = kClass[a] != kClass[b] ? spec.min_dist_cross_channel : spec.min_dist_same_channel;
        if (euclid_dist(pos[a], pos[b]) <= need) placed = false;
      }
  }
  if (!placed) throw DataError("synth: could not place features after " +
                               std::to_string(spec.max_place_attempts) + " attempts");

  // dipole hatching: a dark line with a parallel light line 1.5 px away gives
  // the boundary extractor an adjacent light/dark sign pair at low contrast.
  // Strokes keep their whole segment out of the feature surroundings so
  // interest points off the features land where the score is flat.
  const auto seg_dist = [](double px, double py, double ax, double ay, double bx, double by) {
    const double vx = bx - ax, vy = by - ay;
    const double l2 = vx * vx + vy * vy;
    const double t = l2 > 0.0 ? std::clamp(((px - ax) * vx + (py - ay) * vy) / l2, 0.0, 1.0) : 0.0;
    return std::hypot(px - (ax + t * vx), py - (ay + t * vy));
  };
  for (int s = 0; s < spec.strokes; ++s) {
    double sx = 0, sy = 0, ang = 0, len = 0, amp = 0;
    bool accepted = false;
    for (int attempt = 0; attempt < spec.stroke_attempts && !accepted; ++attempt) {
      sx = rng.uniform_range64(2.0, W - 2.0);
      sy = rng.uniform_range64(2.0, H - 2.0);
      ang = rng.uniform_range64(0.0, 3.14159265358979323846);
      len = rng.uniform_range64(spec.stroke_len_min, spec.stroke_len_max);
      amp = rng.uniform_range64(spec.stroke_amp_min, spec.stroke_amp_max);
      const double ex = sx + std::cos(ang) * len, ey = sy + std::sin(ang) * len;
      accepted = true;
      for (int k = 0; k < 5; ++k) {
        if (seg_dist(pos[k].x, pos[k].y, sx, sy, ex, ey) < spec.stroke_excl) {
          accepted = false;
          break;
        }
      }
    }
    if (!accepted) continue;
    const double dx = std::cos(ang), dy = std::sin(ang);
    const double nx = -dy, ny = dx;
    for (double t = 0.0; t < len; t += 0.5) {
      for (int side = 0; side < 2; ++side) {
        const double off = side == 0 ? 0.0 : 1.5;
        const double a = side == 0 ? -amp : amp;
        const int ix = static_cast<int>(sx + dx * t + nx * off);
        const int iy = static_cast<int>(sy + dy * t + ny * off);
        if (ix >= 0 && ix < W && iy >= 0 && iy < H)
          for (int c = 0; c < 3; ++c) img.at(ix, iy, c) = std::clamp(spec.base + a, 0.0, 255.0);
      }
    }
  }

  // soft color halos make the surroundings of each class distinguishable to a
  // patch that does not contain the feature itself
  const double tints[3][3] = {{1.0, -0.3, -0.7}, {-0.6, 1.0, -0.4}, {-0.5, -0.5, 1.0}};
  for (int k = 0; k < 5; ++k) {
    const int cls = kClass[k];
    const int r = static_cast<int>(spec.halo_radius) + 1;
    for (int y = std::max(0, pos[k].y - r); y <= std::min(H - 1, pos[k].y + r); ++y)
      for (int x = std::max(0, pos[k].x - r); x <= std::min(W - 1, pos[k].x + r); ++x) {
        const double d = std::hypot(static_cast<double>(x) - pos[k].x, static_cast<double>(y) - pos[k].y);
        if (d >= spec.halo_radius) continue;
        const double g = spec.halo_amp * (1.0 - d / spec.halo_radius);
        for (int c = 0; c < 3; ++c) img.at(x, y, c) += g * tints[cls][c];
      }
  }

  for (int k = 0; k < 5; ++k) {
    const double jit = rng.uniform_range64(-spec.feature_jitter, spec.feature_jitter);
    const int cls = kClass[k];
    const double val = cls == 0 ? 40.0 + jit : cls == 1 ? 235.0 + jit : 35.0 + jit;
    const double v = std::clamp(val, 0.0, 255.0);
    const int reach = std::max({spec.ring_radius, spec.disc_radius, spec.cross_arm}) + 1;
    for (int y = std::max(0, pos[k].y - reach); y <= std::min(H - 1, pos[k].y + reach); ++y)
      for (int x = std::max(0, pos[k].x - reach); x <= std::min(W - 1, pos[k].x + reach); ++x) {
        const double d = std::hypot(static_cast<double>(x) - pos[k].x, static_cast<double>(y) - pos[k].y);
        const int adx = std::abs(x - pos[k].x), ady = std::abs(y - pos[k].y);
        bool hit = false;
        if (cls == 0)
          hit = d <= spec.ring_radius && d >= spec.ring_radius - spec.ring_thickness;
        else if (cls == 1)
          hit = d <= spec.disc_radius;
        else
          hit = (adx <= 1 && ady <= spec.cross_arm) || (ady <= 1 && adx <= spec.cross_arm);
        if (hit)
          for (int c = 0; c < 3; ++c) img.at(x, y, c) = v;
      }
  }

  LabeledImage out;
  out.image = ImageBuf(W, H, 3);
  for (std::size_t i = 0; i < img.rgb.size(); ++i)
    out.image.data[i] = static_cast<std::uint8_t>(std::lround(std::clamp(img.rgb[i], 0.0, 255.0)));
  out.landmarks = LandmarkChannels{{{"eyes", {pos[0], pos[1]}}, {"nose", {pos[2]}}, {"mouth_corners", {pos[3], pos[4]}}}};
  out.id = std::to_string(seed);
  return out;
}

}  // namespace dift
