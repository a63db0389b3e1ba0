#include "memdiff/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>

namespace memdiff {

std::vector<Vec> ring_sampler(const RingSpec& spec, Rng& rng) {
  if (!(spec.radius > 0.0) || !(spec.radial_sigma >= 0.0))
    throw std::invalid_argument("ring_sampler: require radius > 0 and radial_sigma >= 0");
  if (spec.n == 0) throw std::invalid_argument("ring_sampler: n must be >= 1");
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::vector<Vec> pts(spec.n);
  for (Vec& p : pts) {
    const double th = angle(rng);
    const double r = spec.radius + spec.radial_sigma * standard_normal(rng);
    p = {r * std::cos(th), r * std::sin(th)};
  }
  return pts;
}

namespace {

std::vector<std::uint8_t> read_all(const std::filesystem::path& path) {
  gzFile f = gzopen(path.string().c_str(), "rb");
  if (!f) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::uint8_t> out;
  std::array<std::uint8_t, 1 << 16> buf{};
  for (;;) {
    const int n = gzread(f, buf.data(), static_cast<unsigned>(buf.size()));
    if (n < 0) {
      gzclose(f);
      throw FormatError("read error in " + path.string());
    }
    if (n == 0) break;
    out.insert(out.end(), buf.begin(), buf.begin() + n);
  }
  gzclose(f);
  return out;
}

std::uint32_t be32(const std::vector<std::uint8_t>& b, std::size_t off) {
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) | (std::uint32_t{b[off + 2]} << 8) |
         std::uint32_t{b[off + 3]};
}

void put_be32(std::ofstream& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                         static_cast<char>(v)};
  out.write(bytes, 4);
}

}  // namespace

IdxImages read_idx_images(const std::filesystem::path& path) {
  const auto b = read_all(path);
  if (b.size() < 16) throw FormatError(path.string() + ": truncated IDX header");
  if (be32(b, 0) != kIdxImageMagic) throw FormatError(path.string() + ": bad magic for an IDX image file");
  IdxImages img;
  img.count = be32(b, 4);
  img.rows = be32(b, 8);
  img.cols = be32(b, 12);
  const std::uint64_t need = std::uint64_t{img.count} * img.rows * img.cols;
  if (b.size() - 16 != need)
    throw FormatError(path.string() + ": expected " + std::to_string(need) + " pixel bytes, found " +
                      std::to_string(b.size() - 16));
  img.pixels.assign(b.begin() + 16, b.end());
  return img;
}

std::vector<std::uint8_t> read_idx_labels(const std::filesystem::path& path) {
  const auto b = read_all(path);
  if (b.size() < 8) throw FormatError(path.string() + ": truncated IDX header");
  if (be32(b, 0) != kIdxLabelMagic) throw FormatError(path.string() + ": bad magic for an IDX label file");
  const std::uint32_t n = be32(b, 4);
  if (b.size() - 8 != n)
    throw FormatError(path.string() + ": expected " + std::to_string(n) + " labels, found " +
                      std::to_string(b.size() - 8));
  return {b.begin() + 8, b.end()};
}

void write_idx_images(const std::filesystem::path& path, const IdxImages& images) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  put_be32(out, kIdxImageMagic);
  put_be32(out, images.count);
  put_be32(out, images.rows);
  put_be32(out, images.cols);
  out.write(reinterpret_cast<const char*>(images.pixels.data()), static_cast<std::streamsize>(images.pixels.size()));
}

void write_idx_labels(const std::filesystem::path& path, std::span<const std::uint8_t> labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  put_be32(out, kIdxLabelMagic);
  put_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.write(reinterpret_cast<const char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
}

RawDataset load_emnist(const std::filesystem::path& dir) {
  const std::string images_name = "emnist-letters-train-images-idx3-ubyte";
  const std::string labels_name = "emnist-letters-train-labels-idx1-ubyte";
  auto locate = [&](const std::string& base) -> std::filesystem::path {
    for (const auto& candidate : {dir / base, dir / (base + ".gz")})
      if (std::filesystem::exists(candidate)) return candidate;
    throw std::runtime_error("EMNIST letters not found: expected " + (dir / base).string() + "[.gz] and " +
                             (dir / labels_name).string() +
                             "[.gz] (set MEMDIFF_DATA_DIR, or use the synthetic glyph source)");
  };
  RawDataset raw;
  raw.images = read_idx_images(locate(images_name));
  raw.labels = read_idx_labels(locate(labels_name));
  if (raw.labels.size() != raw.images.count)
    throw FormatError("EMNIST: " + std::to_string(raw.images.count) + " images but " +
                      std::to_string(raw.labels.size()) + " labels");
  return raw;
}

Vec preprocess(std::span<const std::uint8_t> image28) {
  require_dim(image28.size(), 28 * 28, "preprocess");
  Vec out(kImagePixels);
  for (std::size_t y = 0; y < kImageSide; ++y)
    for (std::size_t x = 0; x < kImageSide; ++x) {
      // Pooled pixel (y + 1, x + 1) of the 14x14 map.
      const std::size_t py = 2 * (y + 1);
      const std::size_t px = 2 * (x + 1);
      double s = 0.0;
      for (std::size_t dy = 0; dy < 2; ++dy)
        for (std::size_t dx = 0; dx < 2; ++dx) s += image28[(py + dy) * 28 + px + dx] / 127.5 - 1.0;
      out[y * kImageSide + x] = s / 4.0;
    }
  return out;
}

std::vector<Vec> ImageDataset::class_means(std::size_t classes) const {
  std::vector<Vec> means(classes, Vec(kImagePixels, 0.0));
  std::vector<std::size_t> counts(classes, 0);
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto c = static_cast<std::size_t>(labels[i]);
    if (c >= classes) continue;
    for (std::size_t p = 0; p < kImagePixels; ++p) means[c][p] += images[i][p];
    ++counts[c];
  }
  for (std::size_t c = 0; c < classes; ++c)
    if (counts[c])
      for (double& v : means[c]) v /= static_cast<double>(counts[c]);
  return means;
}

ImageDataset select_letters(const RawDataset& raw, std::size_t max_per_class) {
  if (raw.images.rows != 28 || raw.images.cols != 28) throw FormatError("EMNIST: expected 28x28 images");
  ImageDataset ds;
  std::array<std::size_t, 3> counts{};
  std::vector<std::uint8_t> upright(28 * 28);
  for (std::size_t i = 0; i < raw.labels.size(); ++i) {
    int cls = -1;
    switch (raw.labels[i]) {
      case kEmnistLetterH: cls = 0; break;
      case kEmnistLetterK: cls = 1; break;
      case kEmnistLetterU: cls = 2; break;
      default: continue;
    }
    if (max_per_class && counts[static_cast<std::size_t>(cls)] >= max_per_class) continue;
    const auto src = raw.images.image(i);
    for (std::size_t y = 0; y < 28; ++y)
      for (std::size_t x = 0; x < 28; ++x) upright[y * 28 + x] = src[x * 28 + y];
    ds.images.push_back(preprocess(upright));
    ds.labels.push_back(cls);
    ++counts[static_cast<std::size_t>(cls)];
  }
  return ds;
}

namespace {

struct Point {
  double x, y;
};
using Stroke = std::vector<Point>;  // polyline

std::vector<Stroke> glyph_strokes(int cls) {
  switch (cls) {
    case 0:  // H
      return {{{3, 2}, {3, 10}}, {{9, 2}, {9, 10}}, {{3, 6}, {9, 6}}};
    case 1:  // K
      return {{{3.5, 2}, {3.5, 10}}, {{9, 2}, {3.5, 6.5}}, {{5, 5.5}, {9, 10}}};
    case 2:  // U
      return {{{3, 2}, {3, 7.5}, {3.8, 9.3}, {6, 10}, {8.2, 9.3}, {9, 7.5}, {9, 2}}};
    default:
      throw std::invalid_argument("synthetic_glyphs: only classes H, K, U are defined");
  }
}

double segment_distance(Point p, Point a, Point b) {
  const double vx = b.x - a.x, vy = b.y - a.y;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0 ? ((p.x - a.x) * vx + (p.y - a.y) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = p.x - (a.x + t * vx), dy = p.y - (a.y + t * vy);
  return std::sqrt(dx * dx + dy * dy);
}

}  // namespace

ImageDataset synthetic_glyphs(std::size_t classes, std::size_t per_class, Rng& rng) {
  if (classes == 0 || classes > 3) throw std::invalid_argument("synthetic_glyphs: classes must be 1..3");
  std::uniform_real_distribution<double> shift(-0.7, 0.7);
  std::uniform_real_distribution<double> scale(0.9, 1.08);
  std::uniform_real_distribution<double> wobble(-0.35, 0.35);
  std::uniform_real_distribution<double> width(0.8, 1.3);
  std::uniform_real_distribution<double> shear(-0.12, 0.12);
  ImageDataset ds;
  for (std::size_t i = 0; i < per_class; ++i) {
    for (std::size_t c = 0; c < classes; ++c) {
      const double sx = shift(rng), sy = shift(rng), sc = scale(rng), sh = shear(rng), half = 0.5 * width(rng);
      std::vector<Stroke> strokes = glyph_strokes(static_cast<int>(c));
      for (Stroke& s : strokes)
        for (Point& p : s) {
          const double cx = p.x - 6.0, cy = p.y - 6.0;
          p.x = 6.0 + sc * (cx + sh * cy) + sx + wobble(rng);
          p.y = 6.0 + sc * cy + sy + wobble(rng);
        }
      Vec img(kImagePixels);
      for (std::size_t y = 0; y < kImageSide; ++y)
        for (std::size_t x = 0; x < kImageSide; ++x) {
          const Point p{x + 0.5, y + 0.5};
          double d = 1e9;
          for (const Stroke& s : strokes)
            for (std::size_t k = 0; k + 1 < s.size(); ++k) d = std::min(d, segment_distance(p, s[k], s[k + 1]));
          // Ink 1 inside the stroke, linear falloff over one pixel.
          const double ink = std::clamp(1.0 - (d - half), 0.0, 1.0);
          img[y * kImageSide + x] = 2.0 * ink - 1.0;
        }
      ds.images.push_back(std::move(img));
      ds.labels.push_back(static_cast<int>(c));
    }
  }
  return ds;
}

}  // namespace memdiff
