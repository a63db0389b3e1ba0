#include <doctest.h>

#include <zlib.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "memdiff/data.hpp"

using namespace memdiff;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "memdiff_test_data";
  fs::create_directories(dir);
  return dir / name;
}

void write_bytes(const fs::path& p, const std::vector<std::uint8_t>& bytes) {
  std::ofstream f(p, std::ios::binary);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void write_gz(const fs::path& p, const std::vector<std::uint8_t>& bytes) {
  gzFile f = gzopen(p.string().c_str(), "wb");
  REQUIRE(f != nullptr);
  gzwrite(f, bytes.data(), static_cast<unsigned>(bytes.size()));
  gzclose(f);
}

// One 2x3 image, big-endian header.
const std::vector<std::uint8_t> kFixture = {0x00, 0x00, 0x08, 0x03, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0, 3,
                                            0,    17,   34,   200,  255, 9};

}  // namespace

TEST_CASE("hand-built IDX fixture parses pixel-exact") {
  const fs::path p = scratch("one.idx3");
  write_bytes(p, kFixture);
  const IdxImages img = read_idx_images(p);
  CHECK(img.count == 1);
  CHECK(img.rows == 2);
  CHECK(img.cols == 3);
  CHECK(img.pixels == std::vector<std::uint8_t>{0, 17, 34, 200, 255, 9});

  const fs::path gz = scratch("one.idx3.gz");
  write_gz(gz, kFixture);
  CHECK(read_idx_images(gz).pixels == img.pixels);

  const fs::path lp = scratch("labels.idx1");
  write_bytes(lp, {0x00, 0x00, 0x08, 0x01, 0, 0, 0, 3, 8, 11, 21});
  CHECK(read_idx_labels(lp) == std::vector<std::uint8_t>{8, 11, 21});
}

TEST_CASE("corrupt IDX files are rejected") {
  auto truncated = kFixture;
  truncated.pop_back();
  const fs::path p = scratch("trunc.idx3");
  write_bytes(p, truncated);
  CHECK_THROWS_AS(read_idx_images(p), FormatError);

  auto magic = kFixture;
  magic[3] = 0x01;
  write_bytes(p, magic);
  CHECK_THROWS_AS(read_idx_images(p), FormatError);

  const fs::path lp = scratch("short.idx1");
  write_bytes(lp, {0x00, 0x00, 0x08, 0x01, 0, 0, 0, 5, 1, 2});
  CHECK_THROWS_AS(read_idx_labels(lp), FormatError);

  CHECK_THROWS(read_idx_images(scratch("does_not_exist")));
}

TEST_CASE("IDX round trip") {
  Rng rng(3);
  IdxImages img;
  img.count = 4;
  img.rows = 28;
  img.cols = 28;
  std::uniform_int_distribution<int> byte(0, 255);
  for (std::size_t i = 0; i < 4 * 28 * 28; ++i) img.pixels.push_back(static_cast<std::uint8_t>(byte(rng)));
  const std::vector<std::uint8_t> labels{8, 11, 21, 3};
  const fs::path ip = scratch("rt-images"), lp = scratch("rt-labels");
  write_idx_images(ip, img);
  write_idx_labels(lp, labels);
  const IdxImages back = read_idx_images(ip);
  CHECK(back.count == img.count);
  CHECK(back.pixels == img.pixels);
  CHECK(read_idx_labels(lp) == labels);
}

TEST_CASE("EMNIST loader: missing files, count mismatch, letter selection") {
  const fs::path dir = scratch("emnist");
  fs::remove_all(dir);
  fs::create_directories(dir);
  try {
    load_emnist(dir);
    FAIL("expected an error");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("emnist-letters-train-images-idx3-ubyte") != std::string::npos);
  }

  IdxImages img;
  img.count = 4;
  img.rows = 28;
  img.cols = 28;
  img.pixels.assign(4 * 28 * 28, 0);
  // Image 0 has a bright column-major stripe: EMNIST stores the transpose.
  for (std::size_t r = 0; r < 28; ++r) img.pixels[0 * 784 + 4 * 28 + r] = 255;
  write_idx_images(dir / "emnist-letters-train-images-idx3-ubyte", img);
  write_idx_labels(dir / "emnist-letters-train-labels-idx1-ubyte", std::vector<std::uint8_t>{8, 1, 21, 11});
  const RawDataset raw = load_emnist(dir);
  const ImageDataset ds = select_letters(raw);
  REQUIRE(ds.size() == 3);
  CHECK(ds.labels == std::vector<int>{0, 2, 1});
  // Stored row 4 becomes upright column 4 -> pooled column 2 -> cropped column 1.
  for (std::size_t y = 0; y < kImageSide; ++y) {
    CHECK(ds.images[0][y * kImageSide + 1] == 0.0);
    CHECK(ds.images[0][y * kImageSide + 3] == -1.0);
  }
  CHECK(select_letters(raw, 1).size() == 3);

  write_idx_labels(dir / "emnist-letters-train-labels-idx1-ubyte", std::vector<std::uint8_t>{8, 1, 21});
  CHECK_THROWS_AS(load_emnist(dir), FormatError);
}

TEST_CASE("preprocess examples") {
  std::vector<std::uint8_t> img(784, 0);
  for (double v : preprocess(img)) CHECK(v == -1.0);
  std::fill(img.begin(), img.end(), 255);
  for (double v : preprocess(img)) CHECK(v == 1.0);
  for (std::size_t y = 0; y < 28; ++y)
    for (std::size_t x = 0; x < 28; ++x) img[y * 28 + x] = (x + y) % 2 ? 255 : 0;
  const Vec checker = preprocess(img);
  REQUIRE(checker.size() == 144);
  for (double v : checker) CHECK(v == 0.0);

  // A single bright 2x2 block at (2..3, 2..3) lands at cropped pixel (0, 0).
  std::fill(img.begin(), img.end(), 0);
  for (std::size_t y = 2; y < 4; ++y)
    for (std::size_t x = 2; x < 4; ++x) img[y * 28 + x] = 255;
  const Vec block = preprocess(img);
  CHECK(block[0] == 1.0);
  CHECK(block[1] == -1.0);
  CHECK_THROWS(preprocess(std::vector<std::uint8_t>(100, 0)));
}

TEST_CASE("synthetic glyphs") {
  Rng rng(5);
  const ImageDataset ds = synthetic_glyphs(3, 10, rng);
  REQUIRE(ds.size() == 30);
  std::array<int, 3> counts{};
  for (int l : ds.labels) ++counts[static_cast<std::size_t>(l)];
  CHECK(counts == std::array<int, 3>{10, 10, 10});
  for (const Vec& img : ds.images) {
    REQUIRE(img.size() == kImagePixels);
    for (double v : img) {
      CHECK(v >= -1.0);
      CHECK(v <= 1.0);
    }
  }
  const auto means = ds.class_means(3);
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = a + 1; b < 3; ++b) {
      double d = 0;
      for (std::size_t i = 0; i < kImagePixels; ++i) d += (means[a][i] - means[b][i]) * (means[a][i] - means[b][i]);
      CHECK(d > 1.0);
    }
  Rng again(5);
  CHECK(synthetic_glyphs(3, 10, again).images == ds.images);
}

TEST_CASE("ring sampler") {
  Rng rng(1);
  const auto exact = ring_sampler(RingSpec{1.5, 0.0, 200}, rng);
  for (const Vec& p : exact) CHECK(std::hypot(p[0], p[1]) == doctest::Approx(1.5).epsilon(1e-12));

  const RingSpec spec{1.0, 0.05, 100000};
  const auto pts = ring_sampler(spec, rng);
  double mx = 0, my = 0, mr = 0;
  for (const Vec& p : pts) {
    mx += p[0];
    my += p[1];
    mr += std::hypot(p[0], p[1]);
  }
  const double n = static_cast<double>(pts.size());
  mx /= n, my /= n, mr /= n;
  // Each coordinate has variance about r^2 / 2.
  const double se = std::sqrt(0.5 / n);
  CHECK(std::abs(mx) < 4 * se);
  CHECK(std::abs(my) < 4 * se);
  CHECK(std::abs(mr - 1.0) < 4 * 0.05 / std::sqrt(n) + 1e-4);
}
