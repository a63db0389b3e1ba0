#pragma once

#include <cstdint>
#include <optional>

#include "memdiff/matrix.hpp"

namespace memdiff {

// Sinusoidal time embedding [sin(2 pi W t), cos(2 pi W t)] with fixed random
// frequencies W ~ N(0, 1).
class TimeEmbedding {
 public:
  TimeEmbedding() = default;
  TimeEmbedding(std::size_t dim, std::uint64_t seed);
  explicit TimeEmbedding(Vec frequencies);

  std::size_t dim() const { return 2 * w_.size(); }
  const Vec& frequencies() const { return w_; }

  Vec operator()(double t) const;
  // Writes into out (size dim()) without allocating.
  void embed(double t, std::span<double> out) const;

 private:
  Vec w_;
};

// One-hot class label times a fixed random projection P (K x d); the null
// label (unconditional) embeds to zero.
class ConditionEmbedding {
 public:
  ConditionEmbedding() = default;
  ConditionEmbedding(std::size_t classes, std::size_t dim, std::uint64_t seed);
  explicit ConditionEmbedding(Matrix projection);

  std::size_t classes() const { return p_.rows(); }
  std::size_t dim() const { return p_.cols(); }
  const Matrix& projection() const { return p_; }

  Vec operator()(std::optional<int> label) const;

 private:
  Matrix p_;
};

}  // namespace memdiff
