#include <doctest.h>

#include <cmath>
#include <numeric>

#include "memdiff/device.hpp"

using namespace memdiff;

namespace {

DeviceConfig noiseless() {
  DeviceConfig c;
  c.read_noise_a = 0.0;
  c.read_noise_b = 0.0;
  c.exact_write = true;
  return c;
}

}  // namespace

TEST_CASE("weight_to_conductance maps around the shared negative weight and clips") {
  DeviceConfig c;
  CHECK(weight_to_conductance(0.0, 1.0, c) == doctest::Approx(0.05).epsilon(1e-15));
  CHECK(weight_to_conductance(0.05, 1.0, c) == doctest::Approx(0.10).epsilon(1e-15));
  CHECK(weight_to_conductance(-0.08, 1.0, c) == 0.02);
  CHECK_THROWS_AS(weight_to_conductance(std::nan(""), 1.0, c), std::invalid_argument);
  CHECK_THROWS_AS(weight_to_conductance(1.0, 0.0, c), std::invalid_argument);
  for (double w = -10.0; w <= 10.0; w += 0.37) {
    const double g = weight_to_conductance(w, 0.01, c);
    CHECK(g >= c.g_min);
    CHECK(g <= c.g_max);
  }
  for (double w : {-2.9, -1.0, 0.0, 0.5, 4.9})
    CHECK(conductance_to_weight(weight_to_conductance(w, 0.01, c), 0.01, c) == doctest::Approx(w).epsilon(1e-12));
}

TEST_CASE("config validation") {
  DeviceConfig c;
  CHECK_NOTHROW(c.validate());
  c.g_fixed = 0.2;
  CHECK_THROWS(c.validate());
  c = DeviceConfig{};
  c.quant_levels = 32;
  CHECK_THROWS(c.validate());
  c.quant_levels = 64;
  CHECK_NOTHROW(c.validate());
  c = DeviceConfig{};
  c.read_noise_a = -1.0;
  CHECK_THROWS(c.validate());
}

TEST_CASE("program_cell lands in the tolerance band") {
  DeviceConfig c;
  Rng rng(1);
  for (int i = 0; i < 50; ++i) {
    const auto r = program_cell(0.06, rng, c);
    CHECK(r.g >= 0.059);
    CHECK(r.g <= 0.061);
    CHECK(r.cycles >= 1);
  }
}

TEST_CASE("program_cell from the target needs only the verify read") {
  DeviceConfig c;
  Rng rng(2);
  const auto r = program_cell_from(0.07, 0.07, rng, c);
  CHECK(r.cycles == 1);
  CHECK(r.g == 0.07);
}

TEST_CASE("program_cell replays with the same stream") {
  DeviceConfig c;
  Rng a(42), b(42);
  const auto ra = program_cell(0.08, a, c);
  const auto rb = program_cell(0.08, b, c);
  CHECK(ra.g == rb.g);
  CHECK(ra.cycles == rb.cycles);
}

TEST_CASE("program_cell fails explicitly when the band is unreachable") {
  DeviceConfig c;
  c.write_tol = 0.0;
  c.max_program_cycles = 200;
  Rng rng(3);
  try {
    program_cell(0.0612345, rng, c);
    FAIL("expected ProgrammingFailure");
  } catch (const ProgrammingFailure& e) {
    CHECK(std::abs(e.best_g() - 0.0612345) < 0.01);
  }
}

TEST_CASE("program_array programs uniform and patterned targets") {
  DeviceConfig c;
  Rng rng(4);
  const Crossbar x = program_array(Matrix(2, 2, 0.05), rng, c);
  for (double g : x.g_programmed.data()) CHECK(std::abs(g - 0.05) <= c.write_tol);

  // Moon-and-star style pattern on 32x32.
  Matrix t(32, 32, 0.03);
  for (std::size_t r = 0; r < 32; ++r)
    for (std::size_t col = 0; col < 32; ++col) {
      const double dx = col - 12.0, dy = r - 14.0;
      const double d2 = dx * dx + dy * dy, e2 = (dx - 4) * (dx - 4) + (dy - 3) * (dy - 3);
      if (d2 < 81 && e2 > 49) t(r, col) = 0.09;
      if (std::abs(static_cast<double>(col) - 25) + std::abs(static_cast<double>(r) - 8) < 4) t(r, col) = 0.08;
    }
  const Crossbar p = program_array(t, rng, c);
  double mean_rel = 0.0, mean_err = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double err = p.g_programmed.data()[i] - t.data()[i];
    CHECK(std::abs(err) <= c.write_tol);
    CHECK(p.g_programmed.data()[i] >= c.g_min);
    CHECK(p.g_programmed.data()[i] <= c.g_max);
    mean_rel += std::abs(err / t.data()[i]);
    mean_err += err;
  }
  mean_rel /= t.size();
  mean_err /= t.size();
  CHECK(mean_rel < c.write_tol / c.g_min);
  CHECK(std::abs(mean_err) < 0.2 * c.write_tol);
  CHECK(p.program_cycles.size() == t.size());
}

TEST_CASE("quantization snaps to uniform levels") {
  DeviceConfig c;
  c.quant_levels = 81;  // step 0.001 mS
  CHECK(quantize_conductance(0.05042, c) == doctest::Approx(0.050).epsilon(1e-12));
  CHECK(quantize_conductance(0.10, c) == doctest::Approx(0.10).epsilon(1e-12));
  CHECK(quantize_conductance(0.02, c) == doctest::Approx(0.02).epsilon(1e-12));
}

TEST_CASE("read_matrix noise statistics") {
  DeviceConfig c = noiseless();
  Rng rng(5);
  const Crossbar q = program_array(Matrix(1, 1, 0.07), rng, c);
  CHECK(read_matrix(q, rng)(0, 0) == doctest::Approx(0.02).epsilon(1e-15));

  c.read_noise_a = 0.0005;
  c.read_noise_b = 0.01;
  const Crossbar x = program_array(Matrix(1, 1, 0.05), rng, c);
  const int n = 10000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = read_matrix(x, rng)(0, 0);
    s += v;
    s2 += v * v;
  }
  const double mean = s / n, sd = std::sqrt(s2 / n - mean * mean);
  CHECK(sd == doctest::Approx(0.001).epsilon(0.05));
  CHECK(std::abs(mean - 0.0) < 3 * 0.001 / std::sqrt(n));
  CHECK(x.g_programmed(0, 0) == 0.05);

  const Matrix a = read_matrix(x, rng), b = read_matrix(x, rng);
  CHECK(a(0, 0) != b(0, 0));
}

TEST_CASE("matvec follows Ohm and Kirchhoff") {
  const DeviceConfig c = noiseless();
  Rng rng(6);
  const Crossbar one = program_array(Matrix(1, 1, 0.07), rng, c);
  CHECK(matvec(one, Vec{0.1}, rng)[0] == doctest::Approx(0.002).epsilon(1e-12));

  Matrix id(2, 2, 0.05);
  id(0, 0) = id(1, 1) = 0.10;
  const Crossbar x = program_array(id, rng, c);
  const Vec i = matvec(x, Vec{0.1, -0.1}, rng);
  CHECK(i[0] == doctest::Approx(0.005).epsilon(1e-12));
  CHECK(i[1] == doctest::Approx(-0.005).epsilon(1e-12));
  const Vec z = matvec(x, Vec{0.0, 0.0}, rng);
  CHECK(z[0] == 0.0);
  CHECK(z[1] == 0.0);
  CHECK_THROWS_AS(matvec(x, Vec{0.1}, rng), DimensionError);
}

TEST_CASE("noiseless matvec is linear") {
  const DeviceConfig c = noiseless();
  Rng rng(7);
  Matrix t(5, 3);
  std::uniform_real_distribution<double> u(0.02, 0.10);
  for (double& g : t.data()) g = u(rng);
  const Crossbar x = program_array(t, rng, c);
  const Vec v1{0.1, -0.2, 0.05, 0.3, 0.0}, v2{-0.1, 0.2, 0.15, -0.05, 0.4};
  const double a = 0.7, b = -1.3;
  Vec comb(5);
  for (int i = 0; i < 5; ++i) comb[i] = a * v1[i] + b * v2[i];
  const Vec l = matvec(x, comb, rng), r1 = matvec(x, v1, rng), r2 = matvec(x, v2, rng);
  for (int j = 0; j < 3; ++j) CHECK(l[j] == doctest::Approx(a * r1[j] + b * r2[j]).epsilon(1e-12));
}

TEST_CASE("read noise is unbiased") {
  DeviceConfig c = noiseless();
  c.read_noise_a = 0.0002;
  c.read_noise_b = 0.004;
  Rng rng(8);
  Matrix t(2, 2);
  t(0, 0) = 0.03;
  t(0, 1) = 0.05;
  t(1, 0) = 0.08;
  t(1, 1) = 0.10;
  const Crossbar x = program_array(t, rng, c);
  const int n = 100000;
  Matrix sum(2, 2);
  for (int k = 0; k < n; ++k) {
    const Matrix m = read_matrix(x, rng);
    for (std::size_t i = 0; i < 4; ++i) sum.data()[i] += m.data()[i];
  }
  for (std::size_t i = 0; i < 4; ++i) {
    const double g = t.data()[i];
    CHECK(std::abs(sum.data()[i] / n - (g - c.g_fixed)) < 3 * c.read_sigma(g) / std::sqrt(n) + 1e-15);
  }
}
