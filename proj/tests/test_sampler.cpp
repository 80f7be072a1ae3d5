#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>
#include <string>

#include "dift/errors.h"
#include "dift/sampler.h"
#include "doctest.h"

using namespace dift;
namespace fs = std::filesystem;

namespace {

struct TmpDir {
  fs::path path;
  TmpDir() {
    path = fs::temp_directory_path() / ("dift_sampler_" + std::to_string(std::rand()));
    fs::create_directories(path);
  }
  ~TmpDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

const char* kFixedLandmarks =
    "1\n"
    "lefteye_x lefteye_y righteye_x righteye_y nose_x nose_y leftmouth_x leftmouth_y rightmouth_x rightmouth_y\n"
    "000001.jpg 69 109 106 113 77 142 73 152 108 154\n";

}  // namespace

TEST_CASE("patch spec validation") {
  PatchSpec def;
  CHECK(def.size == 35);
  CHECK(def.border == 17);
  def.validate();
  PatchSpec odd(27);
  CHECK(odd.border == 13);
  odd.validate();
  CHECK_THROWS_AS(PatchSpec(34).validate(), DataError);
  CHECK_THROWS_AS(PatchSpec(0).validate(), DataError);
  CHECK_THROWS_AS(PatchSpec(35, 10).validate(), DataError);
  PatchSpec wide(35, 40);
  wide.validate();
}

TEST_CASE("rand_coords stays inside the valid center rectangle") {
  PatchSpec spec;
  Rng rng(5);
  int min_x = 1 << 30, max_x = -1, min_y = 1 << 30, max_y = -1;
  for (int i = 0; i < 10000; ++i) {
    Point p = rand_coords(178, 218, spec, rng);
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }
  CHECK(min_x == 17);
  CHECK(max_x == 160);
  CHECK(min_y == 17);
  CHECK(max_y == 200);
}

TEST_CASE("rand_coords on a patch-sized image returns only the center") {
  PatchSpec spec;
  Rng rng(6);
  for (int i = 0; i < 50; ++i) {
    Point p = rand_coords(35, 35, spec, rng);
    CHECK(p.x == 17);
    CHECK(p.y == 17);
  }
  Rng r2(7);
  CHECK_THROWS_AS(rand_coords(34, 35, spec, r2), DataError);
}

TEST_CASE("rand_coords is deterministic per seed") {
  PatchSpec spec;
  Rng a(9), b(9), c(10);
  bool all_same = true, any_diff = false;
  for (int i = 0; i < 100; ++i) {
    Point pa = rand_coords(100, 100, spec, a);
    Point pb = rand_coords(100, 100, spec, b);
    Point pc = rand_coords(100, 100, spec, c);
    if (pa != pb) all_same = false;
    if (pa != pc) any_diff = true;
  }
  CHECK(all_same);
  CHECK(any_diff);
}

TEST_CASE("extract_patch values and layout") {
  ImageBuf white(40, 40, 3, 255);
  Tensor t = extract_patch(white, {20, 20}, 35);
  REQUIRE(t.dims == std::vector<int>{3, 35, 35});
  for (float v : t.data) CHECK(v == 1.0f);

  // single red pixel at the center shows up only at [0, 17, 17]
  ImageBuf img(40, 40, 3, 0);
  img.at(20, 20, 0) = 255;
  Tensor r = extract_patch(img, {20, 20}, 35);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 35; ++y)
      for (int x = 0; x < 35; ++x) {
        const float want = (c == 0 && y == 17 && x == 17) ? 1.0f : 0.0f;
        CHECK(r.at(c, y, x) == want);
      }
}

TEST_CASE("extract_patch promotes grayscale and rejects out-of-bounds") {
  ImageBuf gray(40, 40, 1, 100);
  gray.at(10, 12, 0) = 200;
  Tensor t = extract_patch(gray, {12, 12}, 5);
  for (int c = 0; c < 3; ++c) {
    CHECK(t.at(c, 0, 0) == doctest::Approx(100.0f / 255.0f));
    CHECK(t.at(c, 2, 0) == doctest::Approx(200.0f / 255.0f));  // (10,12) is left-middle of the patch
  }
  CHECK_THROWS_AS(extract_patch(gray, {2, 12}, 35), DataError);
  CHECK_THROWS_AS(extract_patch(gray, {12, 39}, 5), DataError);
  CHECK_THROWS_AS(extract_patch(gray, {12, 12}, 4), DataError);
}

TEST_CASE("celeba landmark parsing groups the five points") {
  TmpDir dir;
  atomic_write_file(dir.file("lm.txt"), kFixedLandmarks);
  LandmarkSet set = load_celeba_landmarks(dir.file("lm.txt"));
  REQUIRE(set.size() == 1);
  CHECK(set[0].first == "000001.jpg");
  const LandmarkChannels& lm = set[0].second;
  REQUIRE(lm.channel_count() == 3);
  CHECK(lm.name(0) == "eyes");
  CHECK(lm.name(1) == "nose");
  CHECK(lm.name(2) == "mouth_corners");
  REQUIRE(lm.points(0).size() == 2);
  CHECK(lm.points(0)[0] == Point{69, 109});
  CHECK(lm.points(0)[1] == Point{106, 113});
  REQUIRE(lm.points(1).size() == 1);
  CHECK(lm.points(1)[0] == Point{77, 142});
  REQUIRE(lm.points(2).size() == 2);
  CHECK(lm.points(2)[0] == Point{73, 152});
  CHECK(lm.points(2)[1] == Point{108, 154});
}

TEST_CASE("celeba landmark parsing rejects malformed rows") {
  TmpDir dir;
  auto put = [&](const std::string& body) {
    atomic_write_file(dir.file("bad.txt"), body);
    return dir.file("bad.txt");
  };
  const std::string header =
      "lefteye_x lefteye_y righteye_x righteye_y nose_x nose_y leftmouth_x leftmouth_y rightmouth_x rightmouth_y\n";

  // nine coordinates instead of ten: the error names the offending line
  CHECK_THROWS_WITH_AS(
      load_celeba_landmarks(put("1\n" + header + "a.jpg 1 2 3 4 5 6 7 8 9\n")),
      doctest::Contains("line 3"), DataError);
  CHECK_THROWS_AS(load_celeba_landmarks(put("2\n" + header + "a.jpg 1 2 3 4 5 6 7 8 9 10\n")),
                  DataError);  // count mismatch
  CHECK_THROWS_AS(load_celeba_landmarks(put("1\nwrong header\na.jpg 1 2 3 4 5 6 7 8 9 10\n")),
                  DataError);
  CHECK_THROWS_AS(load_celeba_landmarks(put("")), DataError);
  CHECK_THROWS_AS(load_celeba_landmarks(put("1\n" + header + "a.jpg 1 2 x 4 5 6 7 8 9 10\n")),
                  DataError);

  LandmarkSet empty = load_celeba_landmarks(put("0\n" + header));
  CHECK(empty.empty());
}

TEST_CASE("celeba landmarks load -> save -> load is a fixed point") {
  TmpDir dir;
  atomic_write_file(dir.file("lm.txt"), kFixedLandmarks);
  LandmarkSet a = load_celeba_landmarks(dir.file("lm.txt"));
  save_celeba_landmarks(a, dir.file("rt.txt"));
  CHECK(read_file(dir.file("rt.txt")) == kFixedLandmarks);
  LandmarkSet b = load_celeba_landmarks(dir.file("rt.txt"));
  REQUIRE(b.size() == a.size());
  CHECK(b[0].first == a[0].first);
  for (int c = 0; c < 3; ++c) CHECK(b[0].second.points(c) == a[0].second.points(c));
}

TEST_CASE("synthetic images are deterministic and labeled") {
  LabeledImage a = synth_image(42);
  LabeledImage b = synth_image(42);
  LabeledImage c = synth_image(43);
  CHECK(a.image.width == 178);
  CHECK(a.image.height == 218);
  CHECK(a.image.channels == 3);
  CHECK(a.image.data == b.image.data);
  CHECK(a.image.data != c.image.data);

  REQUIRE(a.landmarks.channel_count() == 3);
  CHECK(a.landmarks.points(0).size() == 2);
  CHECK(a.landmarks.points(1).size() == 1);
  CHECK(a.landmarks.points(2).size() == 2);
  for (int ch = 0; ch < 3; ++ch)
    for (Point p : a.landmarks.points(ch)) {
      CHECK(p.x >= 0);
      CHECK(p.x < 178);
      CHECK(p.y >= 0);
      CHECK(p.y < 218);
    }
}

TEST_CASE("synthetic landmarks respect the placement distances") {
  for (std::uint64_t seed : {1ull, 99ull, 4242ull}) {
    LabeledImage img = synth_image(seed);
    std::vector<std::pair<int, Point>> all;
    for (int c = 0; c < 3; ++c)
      for (Point p : img.landmarks.points(c)) all.emplace_back(c, p);
    REQUIRE(all.size() == 5);
    for (std::size_t i = 0; i < all.size(); ++i)
      for (std::size_t j = i + 1; j < all.size(); ++j) {
        const double d = euclid_dist(all[i].second, all[j].second);
        if (all[i].first != all[j].first) CHECK(d > 80.0);
        else CHECK(d > 50.0);
      }
  }
}

TEST_CASE("valid center count for the default geometry") {
  const int w = 178, h = 218, border = 17;
  const int cols = w - 2 * border;
  const int rows = h - 2 * border;
  CHECK(cols == 144);
  CHECK(rows == 184);
  CHECK(cols * rows == 26496);
}
