#include <doctest.h>

#include <cmath>
#include <numbers>

#include "memdiff/embedding.hpp"

using namespace memdiff;

TEST_CASE("time embedding values") {
  const TimeEmbedding e(14, 3);
  const Vec z = e(0.0);
  REQUIRE(z.size() == 14);
  for (int i = 0; i < 7; ++i) {
    CHECK(z[i] == 0.0);
    CHECK(z[7 + i] == 1.0);
  }
  const TimeEmbedding one(Vec{1.0});
  const Vec q = one(0.25);
  CHECK(q[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::abs(q[1]) < 1e-15);
  for (double t = 0.0; t <= 1.0; t += 0.01)
    for (double v : e(t)) CHECK(std::abs(v) <= 1.0);
  CHECK_THROWS(TimeEmbedding(3, 1));
}

TEST_CASE("time embedding is Lipschitz with constant 2 pi max|W|") {
  const TimeEmbedding e(14, 9);
  double wmax = 0.0;
  for (double w : e.frequencies()) wmax = std::max(wmax, std::abs(w));
  const double h = 1e-3;
  for (double t = 0.0; t + h <= 1.0; t += 0.05) {
    const Vec a = e(t), b = e(t + h);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 2 * std::numbers::pi * wmax * h + 1e-12);
  }
  // Same seed, same frequencies.
  CHECK(TimeEmbedding(14, 9).frequencies() == e.frequencies());
}

TEST_CASE("condition embedding") {
  const ConditionEmbedding c(3, 14, 5);
  for (double v : c(std::nullopt)) CHECK(v == 0.0);
  const Vec r0 = c(0);
  for (std::size_t j = 0; j < 14; ++j) CHECK(r0[j] == c.projection()(0, j));
  for (int a = 0; a < 3; ++a)
    for (int b = a + 1; b < 3; ++b) {
      double d = 0.0;
      const Vec va = c(a), vb = c(b);
      for (std::size_t j = 0; j < 14; ++j) d += (va[j] - vb[j]) * (va[j] - vb[j]);
      CHECK(d > 0.0);
    }
  CHECK_THROWS_AS(c(3), std::out_of_range);
  CHECK_THROWS_AS(c(-1), std::out_of_range);
}

TEST_CASE("projection entries have variance 1/sqrt(d)") {
  const ConditionEmbedding c(400, 16, 8);
  double s2 = 0.0;
  for (double v : c.projection().data()) s2 += v * v;
  s2 /= static_cast<double>(c.projection().size());
  CHECK(s2 == doctest::Approx(0.25).epsilon(0.05));
}
