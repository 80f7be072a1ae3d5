#pragma once

#include <string>
#include <vector>

#include "dift/image.h"
#include "dift/model.h"

namespace dift {

// Per-channel score grid over all valid patch centers. Field cell (x, y) is
// the network output for the patch centered at image pixel (x+border, y+border).
struct ScoreField {
  int width = 0;
  int height = 0;
  int channels = 0;
  int border = 0;
  std::vector<float> data;

  float at(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  float& at(int c, int y, int x) {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  std::size_t cells() const { return static_cast<std::size_t>(width) * height; }
};

// Network output at every valid patch center, inference mode. Convolutions run
// once over the whole image and per-center windows feed the dense chain, which
// is arithmetic-identical to forwarding each patch separately. Centers are
// processed in fixed chunks; threads > 1 distributes chunks without changing
// any result bit.
ScoreField dense_heatmap(const Model& model, const ImageBuf& img, int threads = 1);

// Three-level posterization: below 0.5 -> 0, [0.5, 0.8) -> 0.5, else 0.8.
ScoreField quantize_heatmap(const ScoreField& field);

// One PGM per channel ({prefix}_{c}.pgm, values clamped to [0,1] and scaled
// x255) plus {prefix}_rgb.ppm mapping the first three channels to R,G,B.
// Returns the written paths.
std::vector<std::string> export_heatmap(const ScoreField& field, const std::string& prefix);

}  // namespace dift
