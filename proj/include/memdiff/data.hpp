#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "memdiff/matrix.hpp"
#include "memdiff/rng.hpp"

namespace memdiff {

struct RingSpec {
  double radius = 1.0;
  double radial_sigma = 0.05;
  std::size_t n = 1000;
};

std::vector<Vec> ring_sampler(const RingSpec& spec, Rng& rng);

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raw IDX contents. Images are stored row-major, one byte per pixel.
struct IdxImages {
  std::uint32_t count = 0;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<std::uint8_t> pixels;

  std::span<const std::uint8_t> image(std::size_t i) const {
    return {pixels.data() + i * rows * cols, static_cast<std::size_t>(rows) * cols};
  }
};

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

// Big-endian IDX parsing; gzip-compressed files are detected and inflated.
IdxImages read_idx_images(const std::filesystem::path& path);
std::vector<std::uint8_t> read_idx_labels(const std::filesystem::path& path);
void write_idx_images(const std::filesystem::path& path, const IdxImages& images);
void write_idx_labels(const std::filesystem::path& path, std::span<const std::uint8_t> labels);

struct RawDataset {
  IdxImages images;
  std::vector<std::uint8_t> labels;
};

// Loads <dir>/emnist-letters-train-{images-idx3,labels-idx1}-ubyte[.gz].
RawDataset load_emnist(const std::filesystem::path& dir);

inline constexpr std::size_t kImageSide = 12;
inline constexpr std::size_t kImagePixels = kImageSide * kImageSide;

// 28x28 bytes -> [-1, 1] -> 2x2 mean pool (14x14) -> drop 1-pixel border (12x12).
Vec preprocess(std::span<const std::uint8_t> image28);

// 12x12 images in [-1, 1] with labels H=0, K=1, U=2.
struct ImageDataset {
  std::vector<Vec> images;
  std::vector<int> labels;

  std::size_t size() const { return images.size(); }
  std::vector<Vec> class_means(std::size_t classes) const;
};

inline constexpr int kEmnistLetterH = 8;
inline constexpr int kEmnistLetterK = 11;
inline constexpr int kEmnistLetterU = 21;

// Keeps H/K/U from an EMNIST letters split, un-transposes the column-major
// EMNIST storage and preprocesses to 12x12.
ImageDataset select_letters(const RawDataset& raw, std::size_t max_per_class = 0);

// Procedurally rasterized H, K and U glyphs with random jitter.
ImageDataset synthetic_glyphs(std::size_t classes, std::size_t per_class, Rng& rng);

}  // namespace memdiff
