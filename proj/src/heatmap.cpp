#include "dift/heatmap.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <string>
#include <thread>

#include "dift/errors.h"
#include "dift/ops.h"

namespace dift {

ScoreField dense_heatmap(const Model& model, const ImageBuf& img, int threads) {
  const ArchConfig& arch = model.arch;
  const int S = arch.patch_size;
  const int border = S / 2;
  if (threads < 1) throw DataError("dense_heatmap: threads must be >= 1");
  if (img.width < S || img.height < S)
    throw DataError("dense_heatmap: image " + std::to_string(img.width) + "x" +
                    std::to_string(img.height) + " too small for patch size " + std::to_string(S));

  Tensor full({3, img.height, img.width});
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x)
        full.at(c, y, x) = static_cast<float>(img.at(x, y, img.channels == 1 ? 0 : c)) / 255.0f;

  const Tensor& w1 = model.param("conv1.w");
  const Tensor& b1 = model.param("conv1.b");
  const Tensor& w2 = model.param("conv2.w");
  const Tensor& b2 = model.param("conv2.b");

  Tensor m1 = mish(conv2d_valid(full, w1, b1));
  Tensor m2 = mish(conv2d_valid(m1, w2, b2));
  full = Tensor();
  m1 = Tensor();

  const int s2 = arch.side2();
  const int sp = arch.spatial();
  const int co = ArchConfig::kConv2Out;
  const int m2h = m2.dim(1), m2w = m2.dim(2);

  ScoreField field;
  field.width = img.width - 2 * border;
  field.height = img.height - 2 * border;
  field.channels = arch.out_channels;
  field.border = border;
  field.data.resize(field.cells() * arch.out_channels);

  const int total = field.width * field.height;
  const int chunk = 512;
  const int n_chunks = (total + chunk - 1) / chunk;

  auto run_chunk = [&](int ci) {
    const int base = ci * chunk;
    const int n = std::min(chunk, total - base);
    Tensor gather({n, co, sp});
    for (int k = 0; k < n; ++k) {
      const int fy = (base + k) / field.width;
      const int fx = (base + k) % field.width;
      for (int p = 0; p < co; ++p) {
        const float* src = m2.ptr() + (static_cast<std::size_t>(p) * m2h + fy) * m2w + fx;
        float* dst = gather.ptr() + (static_cast<std::size_t>(k) * co + p) * sp;
        for (int i = 0; i < s2; ++i)
          for (int j = 0; j < s2; ++j) dst[i * s2 + j] = src[static_cast<std::size_t>(i) * m2w + j];
      }
    }
    Tensor h = mish(linear(gather, model.param("linear1.w"), model.param("linear1.b")));
    h.set_dims({n, arch.flat2()});
    h = mish(linear(h, model.param("linear2.w"), model.param("linear2.b")));
    h = mish(linear(h, model.param("linear3.w"), model.param("linear3.b")));
    h = mish(linear(h, model.param("linear4.w"), model.param("linear4.b")));
    h = linear(h, model.param("linear5.w"), model.param("linear5.b"));
    for (int k = 0; k < n; ++k) {
      const int fy = (base + k) / field.width;
      const int fx = (base + k) % field.width;
      for (int c = 0; c < arch.out_channels; ++c) field.at(c, fy, fx) = h.at(k, c);
    }
  };

  if (threads == 1 || n_chunks == 1) {
    for (int ci = 0; ci < n_chunks; ++ci) run_chunk(ci);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    const int workers = std::min(threads, n_chunks);
    pool.reserve(workers);
    for (int t = 0; t < workers; ++t)
      pool.emplace_back([&] {
        for (int ci = next.fetch_add(1); ci < n_chunks; ci = next.fetch_add(1)) run_chunk(ci);
      });
    for (auto& th : pool) th.join();
  }
  return field;
}

ScoreField quantize_heatmap(const ScoreField& field) {
  ScoreField out = field;
  for (float& v : out.data) v = v < 0.5f ? 0.0f : (v < 0.8f ? 0.5f : 0.8f);
  return out;
}

std::vector<std::string> export_heatmap(const ScoreField& field, const std::string& prefix) {
  std::vector<std::string> paths;
  auto level = [](float v) {
    const float c = std::clamp(v, 0.0f, 1.0f);
    return static_cast<unsigned char>(std::lround(c * 255.0f));
  };
  for (int c = 0; c < field.channels; ++c) {
    ImageBuf gray(field.width, field.height, 1);
    for (int y = 0; y < field.height; ++y)
      for (int x = 0; x < field.width; ++x)
        gray.data[static_cast<std::size_t>(y) * field.width + x] = level(field.at(c, y, x));
    const std::string path = prefix + "_" + std::to_string(c) + ".pgm";
    save_pnm(gray, path);
    paths.push_back(path);
  }
  ImageBuf rgb(field.width, field.height, 3);
  for (int c = 0; c < std::min(field.channels, 3); ++c)
    for (int y = 0; y < field.height; ++y)
      for (int x = 0; x < field.width; ++x)
        rgb.data[(static_cast<std::size_t>(y) * field.width + x) * 3 + c] = level(field.at(c, y, x));
  const std::string path = prefix + "_rgb.ppm";
  save_pnm(rgb, path);
  paths.push_back(path);
  return paths;
}

}  // namespace dift
