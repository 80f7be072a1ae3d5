#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>

#include "dift/errors.h"
#include "dift/heatmap.h"
#include "dift/sampler.h"
#include "doctest.h"

using namespace dift;
namespace fs = std::filesystem;

namespace {

struct TmpDir {
  fs::path path;
  TmpDir() {
    path = fs::temp_directory_path() / ("dift_heatmap_" + std::to_string(std::rand()));
    fs::create_directories(path);
  }
  ~TmpDir() { fs::remove_all(path); }
};

Model make_model(std::uint64_t seed, int patch = 35) {
  ArchConfig arch;
  arch.patch_size = patch;
  arch.out_channels = 3;
  Rng rng(seed);
  return init_model(arch, rng, InitScheme::Glorot);
}

ImageBuf textured_image(int w, int h, std::uint64_t seed) {
  ImageBuf img(w, h, 3);
  Rng rng(seed);
  for (auto& v : img.data) v = static_cast<std::uint8_t>(rng.uniform_u32(256));
  return img;
}

ScoreField reference_field(const Model& model, const ImageBuf& img) {
  const int border = model.arch.patch_size / 2;
  ScoreField f;
  f.width = img.width - 2 * border;
  f.height = img.height - 2 * border;
  f.channels = model.arch.out_channels;
  f.border = border;
  f.data.assign(static_cast<std::size_t>(f.channels) * f.width * f.height, 0.0f);
  for (int y = 0; y < f.height; ++y)
    for (int x = 0; x < f.width; ++x) {
      Tensor patch = extract_patch(img, {x + border, y + border}, model.arch.patch_size);
      patch.set_dims({1, 3, model.arch.patch_size, model.arch.patch_size});
      Tensor out = forward(model, patch, Mode::Infer);
      for (int c = 0; c < f.channels; ++c) f.at(c, y, x) = out.at(0, c);
    }
  return f;
}

}  // namespace

TEST_CASE("dense heatmap dims for the default geometry") {
  Model m = make_model(1);
  LabeledImage scene = synth_image(5);
  ScoreField f = dense_heatmap(m, scene.image);
  CHECK(f.width == 144);
  CHECK(f.height == 184);
  CHECK(f.channels == 3);
  CHECK(f.border == 17);
  CHECK(f.cells() == 26496);
  CHECK(f.data.size() == 3u * 26496u);
}

TEST_CASE("zero model gives an all-zero field") {
  Model m = make_model(2);
  for (auto& [name, t] : m.params)
    for (auto& v : t.data) v = 0.0f;
  ImageBuf img = textured_image(50, 45, 3);
  ScoreField f = dense_heatmap(m, img);
  for (float v : f.data) CHECK(v == 0.0f);
}

TEST_CASE("dense heatmap equals per-patch forwards bit for bit") {
  Model m = make_model(4);
  ImageBuf img = textured_image(47, 53, 7);  // field is 13 x 19
  ScoreField fast = dense_heatmap(m, img);
  ScoreField slow = reference_field(m, img);
  REQUIRE(fast.width == slow.width);
  REQUIRE(fast.height == slow.height);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < fast.height; ++y)
      for (int x = 0; x < fast.width; ++x) CHECK(fast.at(c, y, x) == slow.at(c, y, x));
}

TEST_CASE("dense heatmap equals per-patch forwards on grayscale input") {
  Model m = make_model(5);
  ImageBuf img(41, 39, 1);
  Rng rng(8);
  for (auto& v : img.data) v = static_cast<std::uint8_t>(rng.uniform_u32(256));
  ScoreField fast = dense_heatmap(m, img);
  ScoreField slow = reference_field(m, img);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < fast.height; ++y)
      for (int x = 0; x < fast.width; ++x) CHECK(fast.at(c, y, x) == slow.at(c, y, x));
}

TEST_CASE("thread count does not change a single bit") {
  Model m = make_model(6);
  LabeledImage scene = synth_image(11);
  ScoreField one = dense_heatmap(m, scene.image, 1);
  ScoreField four = dense_heatmap(m, scene.image, 4);
  CHECK(one.data == four.data);
  CHECK_THROWS_AS(dense_heatmap(m, scene.image, 0), DataError);
}

TEST_CASE("heatmap rejects too-small images") {
  Model m = make_model(7);
  ImageBuf img(34, 60, 3, 100);
  CHECK_THROWS_AS(dense_heatmap(m, img), DataError);
}

TEST_CASE("quantize maps the three bands exactly") {
  ScoreField f;
  f.width = 7;
  f.height = 1;
  f.channels = 1;
  f.border = 17;
  f.data = {-0.1f, 0.0f, 0.49f, 0.5f, 0.79f, 0.8f, 1.7f};
  ScoreField q = quantize_heatmap(f);
  CHECK(q.data == std::vector<float>{0.0f, 0.0f, 0.0f, 0.5f, 0.5f, 0.8f, 0.8f});
  CHECK(q.width == 7);
  CHECK(q.border == 17);
}

TEST_CASE("export writes one pgm per channel and an rgb composite") {
  TmpDir dir;
  Model m = make_model(9);
  ImageBuf img = textured_image(40, 38, 10);
  ScoreField f = dense_heatmap(m, img);
  const std::string prefix = (dir.path / "hm").string();
  const auto files = export_heatmap(f, prefix);
  REQUIRE(files.size() == 4);
  CHECK(files[0] == prefix + "_0.pgm");
  CHECK(files[1] == prefix + "_1.pgm");
  CHECK(files[2] == prefix + "_2.pgm");
  CHECK(files[3] == prefix + "_rgb.ppm");
  for (int c = 0; c < 3; ++c) {
    ImageBuf ch = load_pnm(files[static_cast<std::size_t>(c)]);
    CHECK(ch.width == f.width);
    CHECK(ch.height == f.height);
    CHECK(ch.channels == 1);
  }
  ImageBuf rgb = load_pnm(files[3]);
  CHECK(rgb.channels == 3);
  CHECK(rgb.width == f.width);

  // the pgm bytes are the clamped field scaled to [0,255]
  ScoreField tiny;
  tiny.width = 3;
  tiny.height = 1;
  tiny.channels = 1;
  tiny.border = 0;
  tiny.data = {-0.5f, 0.5f, 2.0f};
  const auto tfiles = export_heatmap(tiny, (dir.path / "t").string());
  ImageBuf timg = load_pnm(tfiles[0]);
  CHECK(timg.data[0] == 0);
  CHECK(timg.data[1] == 128);
  CHECK(timg.data[2] == 255);
}
