#pragma once

#include <vector>

#include "dift/image.h"
#include "dift/score.h"

namespace dift {

inline constexpr int kBoundaryWindow = 15;
inline constexpr int kMinContrast = 8;
inline constexpr int kSaccadeStride = 5;
inline constexpr int kMinChainLen = 4;

struct BoundaryChains {
  std::vector<std::vector<Point>> chains;
  long long total_boundary_px = 0;
  int width = 0;
  int height = 0;
};

// Dark/light sign per pixel (luminance vs box mean over `window`, dead zone
// +-min_contrast), all in exact integer arithmetic so a luminance shift moves
// both sides of the comparison identically. A boundary pixel is a light pixel
// with a dark 4-neighbor; boundary pixels are linked into 8-connected chains
// and chains shorter than kMinChainLen are dropped.
BoundaryChains boundary_chains(const ImageBuf& img, int window = kBoundaryWindow,
                               int min_contrast = kMinContrast);

// Every stride-th pixel along each chain, keeping only valid patch centers.
std::vector<Point> saccade_points(const BoundaryChains& chains, int stride = kSaccadeStride,
                                  int border = 17);

}  // namespace dift
