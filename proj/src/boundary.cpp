#include "dift/boundary.h"

#include <algorithm>
#include <cstdint>
#include <string>

#include "dift/errors.h"

namespace dift {

namespace {

// Walk order for both chain linking and hill climbing: N, NE, E, SE, S, SW, W, NW.
constexpr int kDx[8] = {0, 1, 1, 1, 0, -1, -1, -1};
constexpr int kDy[8] = {-1, -1, 0, 1, 1, 1, 0, -1};

}  // namespace

BoundaryChains boundary_chains(const ImageBuf& img, int window, int min_contrast) {
  if (window < 1 || window % 2 == 0) throw DataError("boundary_chains: window must be odd and >= 1");
  if (min_contrast < 0 || min_contrast > 255)
    throw DataError("boundary_chains: min_contrast must be in [0, 255]");
  const int w = img.width, h = img.height;
  if (window > w || window > h)
    throw DataError("boundary_chains: window " + std::to_string(window) +
                    " larger than image " + std::to_string(w) + "x" + std::to_string(h));

  // Luminance scaled by 1000 so the rounded 0.299/0.587/0.114 mix stays integral.
  std::vector<std::int64_t> lum(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      std::int64_t v;
      if (img.channels == 1) {
        v = 1000ll * img.at(x, y, 0);
      } else {
        v = 299ll * img.at(x, y, 0) + 587ll * img.at(x, y, 1) + 114ll * img.at(x, y, 2);
      }
      lum[static_cast<std::size_t>(y) * w + x] = v;
    }

  std::vector<std::int64_t> integral(static_cast<std::size_t>(w + 1) * (h + 1), 0);
  for (int y = 0; y < h; ++y) {
    std::int64_t row = 0;
    for (int x = 0; x < w; ++x) {
      row += lum[static_cast<std::size_t>(y) * w + x];
      integral[static_cast<std::size_t>(y + 1) * (w + 1) + (x + 1)] =
          integral[static_cast<std::size_t>(y) * (w + 1) + (x + 1)] + row;
    }
  }
  auto box_sum = [&](int x0, int y0, int x1, int y1) {
    return integral[static_cast<std::size_t>(y1) * (w + 1) + x1] -
           integral[static_cast<std::size_t>(y0) * (w + 1) + x1] -
           integral[static_cast<std::size_t>(y1) * (w + 1) + x0] +
           integral[static_cast<std::size_t>(y0) * (w + 1) + x0];
  };

  const int hw = window / 2;
  std::vector<signed char> sign(static_cast<std::size_t>(w) * h, 0);
  for (int y = 0; y < h; ++y) {
    const int y0 = std::max(0, y - hw), y1 = std::min(h, y + hw + 1);
    for (int x = 0; x < w; ++x) {
      const int x0 = std::max(0, x - hw), x1 = std::min(w, x + hw + 1);
      const std::int64_t area = static_cast<std::int64_t>(x1 - x0) * (y1 - y0);
      const std::int64_t s = box_sum(x0, y0, x1, y1);
      const std::int64_t lhs = lum[static_cast<std::size_t>(y) * w + x] * area;
      const std::int64_t dead = 1000ll * min_contrast * area;
      signed char& sg = sign[static_cast<std::size_t>(y) * w + x];
      if (lhs > s + dead)
        sg = 1;
      else if (lhs < s - dead)
        sg = -1;
    }
  }

  auto at_sign = [&](int x, int y) -> signed char { return sign[static_cast<std::size_t>(y) * w + x]; };
  std::vector<char> boundary(static_cast<std::size_t>(w) * h, 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (at_sign(x, y) != 1) continue;
      const bool dark_next = (x > 0 && at_sign(x - 1, y) == -1) ||
                             (x + 1 < w && at_sign(x + 1, y) == -1) ||
                             (y > 0 && at_sign(x, y - 1) == -1) ||
                             (y + 1 < h && at_sign(x, y + 1) == -1);
      if (dark_next) boundary[static_cast<std::size_t>(y) * w + x] = 1;
    }

  std::vector<char> visited(static_cast<std::size_t>(w) * h, 0);
  auto idx = [&](int x, int y) { return static_cast<std::size_t>(y) * w + x; };
  auto walk = [&](Point from, std::vector<Point>& out) {
    Point cur = from;
    for (;;) {
      bool moved = false;
      for (int k = 0; k < 8; ++k) {
        const int nx = cur.x + kDx[k], ny = cur.y + kDy[k];
        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
        if (!boundary[idx(nx, ny)] || visited[idx(nx, ny)]) continue;
        visited[idx(nx, ny)] = 1;
        cur = {nx, ny};
        out.push_back(cur);
        moved = true;
        break;
      }
      if (!moved) return;
    }
  };

  BoundaryChains result;
  result.width = w;
  result.height = h;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!boundary[idx(x, y)] || visited[idx(x, y)]) continue;
      visited[idx(x, y)] = 1;
      std::vector<Point> forward, back;
      walk({x, y}, forward);
      walk({x, y}, back);
      std::vector<Point> chain;
      chain.reserve(back.size() + 1 + forward.size());
      chain.insert(chain.end(), back.rbegin(), back.rend());
      chain.push_back({x, y});
      chain.insert(chain.end(), forward.begin(), forward.end());
      if (static_cast<int>(chain.size()) >= kMinChainLen) {
        result.total_boundary_px += static_cast<long long>(chain.size());
        result.chains.push_back(std::move(chain));
      }
    }
  return result;
}

std::vector<Point> saccade_points(const BoundaryChains& chains, int stride, int border) {
  if (stride < 1) throw DataError("saccade_points: stride must be >= 1");
  std::vector<Point> pts;
  for (const auto& chain : chains.chains) {
    for (std::size_t i = 0; i < chain.size(); i += static_cast<std::size_t>(stride)) {
      const Point p = chain[i];
      if (p.x < border || p.y < border || p.x >= chains.width - border ||
          p.y >= chains.height - border)
        continue;
      pts.push_back(p);
    }
  }
  return pts;
}

}  // namespace dift
