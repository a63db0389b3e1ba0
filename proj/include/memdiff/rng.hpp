#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace memdiff {

// 64-bit Mersenne Twister that also keeps a normal distribution, so paired
// Gaussian draws are not discarded between calls. Satisfies
// UniformRandomBitGenerator.
class Rng {
 public:
  using result_type = std::mt19937_64::result_type;

  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

  double normal() { return normal_(engine_); }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

// SplitMix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix64(std::uint64_t x);

// Derives a child seed from a master seed and a path of stream ids, e.g.
// derive_seed(master, {kSampleStream, sample_index}).
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path);

inline Rng make_rng(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
  return Rng(derive_seed(master, path));
}

inline double standard_normal(Rng& rng) { return rng.normal(); }

inline double uniform01(Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return u(rng);
}

// Named stream ids so every random choice traces back to the master seed.
namespace stream {
inline constexpr std::uint64_t kTimeEmbedding = 0x7e01;
inline constexpr std::uint64_t kConditionEmbedding = 0x7e02;
inline constexpr std::uint64_t kTrainInit = 0x7e10;
inline constexpr std::uint64_t kTrainBatches = 0x7e11;
inline constexpr std::uint64_t kVaeInit = 0x7e12;
inline constexpr std::uint64_t kVaeBatches = 0x7e13;
inline constexpr std::uint64_t kCodeJitter = 0x7e14;
inline constexpr std::uint64_t kDataset = 0x7e20;
inline constexpr std::uint64_t kGroundTruth = 0x7e21;
inline constexpr std::uint64_t kDeploy = 0x7e30;
inline constexpr std::uint64_t kSample = 0x7e40;
inline constexpr std::uint64_t kSweep = 0x7e50;
}  // namespace stream

}  // namespace memdiff
