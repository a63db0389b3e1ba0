#include "memdiff/embedding.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>

#include "memdiff/rng.hpp"

namespace memdiff {

TimeEmbedding::TimeEmbedding(std::size_t dim, std::uint64_t seed) {
  if (dim == 0 || dim % 2 != 0) throw std::invalid_argument("TimeEmbedding: dim must be even and > 0");
  Rng rng(seed);
  w_.resize(dim / 2);
  for (double& w : w_) w = standard_normal(rng);
}

TimeEmbedding::TimeEmbedding(Vec frequencies) : w_(std::move(frequencies)) {}

void TimeEmbedding::embed(double t, std::span<double> out) const {
  require_dim(out.size(), dim(), "time_embed");
  const std::size_t h = w_.size();
  for (std::size_t k = 0; k < h; ++k) {
    const double a = 2.0 * std::numbers::pi * w_[k] * t;
    out[k] = std::sin(a);
    out[h + k] = std::cos(a);
  }
}

Vec TimeEmbedding::operator()(double t) const {
  Vec v(dim());
  embed(t, v);
  return v;
}

ConditionEmbedding::ConditionEmbedding(std::size_t classes, std::size_t dim, std::uint64_t seed)
    : p_(classes, dim) {
  Rng rng(seed);
  // Variance 1/sqrt(d).
  std::normal_distribution<double> n(0.0, std::pow(static_cast<double>(dim), -0.25));
  for (double& v : p_.data()) v = n(rng);
}

ConditionEmbedding::ConditionEmbedding(Matrix projection) : p_(std::move(projection)) {}

Vec ConditionEmbedding::operator()(std::optional<int> label) const {
  Vec v(dim(), 0.0);
  if (!label) return v;
  if (*label < 0 || static_cast<std::size_t>(*label) >= classes())
    throw std::out_of_range("condition_embed: label " + std::to_string(*label) + " out of range for " +
                            std::to_string(classes()) + " classes");
  const auto r = p_.row(static_cast<std::size_t>(*label));
  v.assign(r.begin(), r.end());
  return v;
}

}  // namespace memdiff
