#include <cstdio>
#include <filesystem>
#include <string>

#include "dift/errors.h"
#include "dift/image.h"
#include "dift/rng.h"
#include "doctest.h"

using namespace dift;
namespace fs = std::filesystem;

namespace {

struct TmpDir {
  fs::path path;
  TmpDir() {
    path = fs::temp_directory_path() / ("dift_io_" + std::to_string(std::rand()));
    fs::create_directories(path);
  }
  ~TmpDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("ppm round-trip is byte exact") {
  TmpDir dir;
  ImageBuf img(7, 5, 3);
  Rng rng(4);
  for (auto& v : img.data) v = static_cast<std::uint8_t>(rng.uniform_u32(256));
  const std::string p = dir.file("a.ppm");
  save_pnm(img, p);

  const std::string bytes = read_file(p);
  CHECK(bytes.substr(0, 11) == "P6\n7 5\n255\n");
  CHECK(bytes.size() == 11 + 7 * 5 * 3);

  ImageBuf back = load_pnm(p);
  CHECK(back.width == 7);
  CHECK(back.height == 5);
  CHECK(back.channels == 3);
  CHECK(back.data == img.data);

  save_pnm(back, dir.file("b.ppm"));
  CHECK(read_file(dir.file("b.ppm")) == bytes);
}

TEST_CASE("pgm round-trip is byte exact") {
  TmpDir dir;
  ImageBuf img(4, 9, 1);
  for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = static_cast<std::uint8_t>(7 * i);
  const std::string p = dir.file("g.pgm");
  save_pnm(img, p);
  const std::string bytes = read_file(p);
  CHECK(bytes.substr(0, 11) == "P5\n4 9\n255\n");
  ImageBuf back = load_pnm(p);
  CHECK(back.channels == 1);
  CHECK(back.data == img.data);
}

TEST_CASE("pnm header comments and whitespace are tolerated") {
  TmpDir dir;
  std::string s = "P5\n# a comment line\n 3\t2 # trailing\n255\n";
  s += std::string(6, '\x41');
  atomic_write_file(dir.file("c.pgm"), s);
  ImageBuf img = load_pnm(dir.file("c.pgm"));
  CHECK(img.width == 3);
  CHECK(img.height == 2);
  for (auto v : img.data) CHECK(v == 0x41);
}

TEST_CASE("pnm rejects malformed input") {
  TmpDir dir;
  auto put = [&](const std::string& name, const std::string& bytes) {
    atomic_write_file(dir.file(name), bytes);
    return dir.file(name);
  };

  CHECK_THROWS_AS(load_pnm(dir.file("missing.ppm")), DataError);
  CHECK_THROWS_AS(load_pnm(put("p3.ppm", "P3\n1 1\n255\n0 0 0\n")), DataError);
  CHECK_THROWS_WITH_AS(load_pnm(put("max.pgm", "P5\n1 1\n127\n" + std::string(1, 'x'))),
                       doctest::Contains("max value"), DataError);
  // truncated and oversized payloads
  CHECK_THROWS_WITH_AS(load_pnm(put("short.ppm", "P6\n2 2\n255\n" + std::string(11, 'x'))),
                       doctest::Contains("payload"), DataError);
  CHECK_THROWS_WITH_AS(load_pnm(put("long.ppm", "P6\n2 2\n255\n" + std::string(13, 'x'))),
                       doctest::Contains("payload"), DataError);
  CHECK_THROWS_AS(load_pnm(put("zero.pgm", "P5\n0 3\n255\n")), DataError);
  CHECK_THROWS_AS(load_pnm(put("nohdr.pgm", "P5\nabc\n")), DataError);
  CHECK_THROWS_AS(load_pnm(put("empty.pgm", "")), DataError);
}

TEST_CASE("atomic write replaces content and leaves no temp file") {
  TmpDir dir;
  const std::string p = dir.file("f.txt");
  atomic_write_file(p, "first");
  CHECK(read_file(p) == "first");
  atomic_write_file(p, "second, longer payload");
  CHECK(read_file(p) == "second, longer payload");
  CHECK_FALSE(fs::exists(p + ".tmp"));
  int entries = 0;
  for (const auto& e : fs::directory_iterator(dir.path)) {
    (void)e;
    ++entries;
  }
  CHECK(entries == 1);
}

TEST_CASE("image buffer validation") {
  CHECK_THROWS_AS(ImageBuf(0, 4, 3), DataError);
  CHECK_THROWS_AS(ImageBuf(4, 4, 2), DataError);
  ImageBuf img(3, 3, 3, 200);
  CHECK(img.at(2, 2, 2) == 200);
  img.at(1, 2, 0) = 9;
  CHECK(img.data[(2 * 3 + 1) * 3 + 0] == 9);
}
