#include <doctest.h>

#include <cmath>

#include "memdiff/analog_net.hpp"
#include "memdiff/digital_mlp.hpp"

using namespace memdiff;

namespace {

DeviceConfig noiseless() {
  DeviceConfig c;
  c.read_noise_a = 0.0;
  c.read_noise_b = 0.0;
  c.exact_write = true;
  return c;
}

DigitalMLP trained_like_net(std::uint64_t seed, std::optional<std::size_t> classes = std::nullopt) {
  DigitalMLP net = make_score_net(seed, classes, ClampRange{}, OutputScaling::kInvSigma, VPSchedule{});
  Rng rng(seed + 100);
  net.init_random(rng);
  // Non-zero biases so the bias row is exercised.
  std::normal_distribution<double> n(0.0, 0.3);
  for (std::size_t l = 0; l < net.layers(); ++l) {
    Vec b = net.bias(l);
    for (double& v : b) v = n(rng);
    net.set_layer(l, net.weight_matrix(l), b);
  }
  return net;
}

}  // namespace

TEST_CASE("clamp and relu examples") {
  const ClampConfig c;
  const Vec v = clamp(Vec{0.0, 0.55, -0.31, 0.1}, c);
  CHECK(v[0] == 0.0);
  CHECK(v[1] == 0.4);
  CHECK(v[2] == -0.2);
  CHECK(v[3] == 0.1);
  const Vec r = relu(Vec{0.3, -0.2, 0.0});
  CHECK(r[0] == 0.3);
  CHECK(r[1] == 0.0);
  CHECK(r[2] == 0.0);
  CHECK(c.in_units(0.1).lo == doctest::Approx(-2.0));
  CHECK(c.in_units(0.1).hi == doctest::Approx(4.0));
}

TEST_CASE("layer_forward hand examples") {
  Rng rng(1);
  AnalogLayer layer;
  layer.xbar = program_array(Matrix(1, 1, 0.10), rng, noiseless());  // weight +0.05 mS
  layer.gain = 10.0;
  layer.activation = Activation::kRelu;
  CHECK(layer_forward(layer, Vec{0.1}, {}, ClampConfig{}, rng)[0] == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(layer_forward(layer, Vec{-0.1}, {}, ClampConfig{}, rng)[0] == 0.0);
  CHECK(layer_forward(layer, Vec{0.0}, Vec{0.0}, ClampConfig{}, rng)[0] == 0.0);
  // Input beyond the cap is clamped to 0.4 V before the crossbar.
  std::uint64_t sat = 0;
  CHECK(layer_forward(layer, Vec{0.9}, {}, ClampConfig{}, rng, &sat)[0] == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(sat == 1);
  CHECK_THROWS_AS(layer_forward(layer, Vec{0.1, 0.2}, {}, ClampConfig{}, rng), DimensionError);
}

TEST_CASE("zero network deploys to g_fixed everywhere and outputs zero") {
  DigitalMLP net = make_score_net(3, std::nullopt, ClampRange{}, OutputScaling::kNone, VPSchedule{});
  Rng rng(2);
  const AnalogMLP a = deploy(net, noiseless(), rng);
  for (const auto& l : a.layers)
    for (double g : l.xbar.g_programmed.data()) CHECK(g == 0.05);
  const Vec zero(14, 0.0);
  const Vec out = mlp_forward(a, Vec{0.3, -1.2}, zero, {}, rng);
  CHECK(out[0] == 0.0);
  CHECK(out[1] == 0.0);
}

TEST_CASE("noiseless deployment is a digital twin") {
  for (bool conditional : {false, true}) {
    const DigitalMLP net = conditional ? trained_like_net(5, 3) : trained_like_net(4);
    Rng rng(6);
    const AnalogMLP a = deploy(net, noiseless(), rng);
    std::normal_distribution<double> n(0.0, 1.5);
    std::uniform_real_distribution<double> ut(1e-3, 1.0);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      const Vec x{n(rng), n(rng)};
      const double t = ut(rng);
      Label label;
      if (conditional && i % 4 != 3) label = i % 3;
      const Vec d = net.forward(x, t, label);
      const Vec s = a.score(x, t, label, rng);
      for (int k = 0; k < 2; ++k) worst = std::max(worst, std::abs(s[k] - d[k]) / std::max(1.0, std::abs(d[k])));
    }
    CHECK(worst < 1e-6);
  }
}

TEST_CASE("programmed deployment stays within the write band of the targets") {
  const DigitalMLP net = trained_like_net(7);
  DeviceConfig c;
  Rng rng(8);
  const AnalogMLP a = deploy(net, c, rng);
  for (const auto& l : a.layers) {
    for (std::size_t k = 0; k < l.xbar.g_target.size(); ++k)
      CHECK(std::abs(l.xbar.g_programmed.data()[k] - l.xbar.g_target.data()[k]) <= c.write_tol);
    // Scale chosen so no weight clips: the extreme weight sits on a bound.
    double gmax = 0.0, gmin = 1.0;
    for (double g : l.xbar.g_target.data()) {
      gmax = std::max(gmax, g);
      gmin = std::min(gmin, g);
    }
    CHECK((std::abs(gmax - c.g_max) < 1e-12 || std::abs(gmin - c.g_min) < 1e-12));
    CHECK(l.gain == doctest::Approx(1.0 / l.scale));
  }
}

TEST_CASE("the clamp precedes every crossbar") {
  const DigitalMLP net = trained_like_net(9);
  Rng rng(10);
  const AnalogMLP a = deploy(net, DeviceConfig{}, rng);
  const ClampConfig c;
  std::size_t calls = 0, violations = 0;
  {
    ScopedVoltageObserver guard([&](std::span<const double> v) {
      ++calls;
      for (double x : v)
        if (x < c.v_lo || x > c.v_hi) ++violations;
    });
    std::normal_distribution<double> n(0.0, 3.0);
    for (int i = 0; i < 200; ++i) a.score(Vec{n(rng), n(rng)}, 0.5, std::nullopt, rng);
  }
  CHECK(calls == 600);
  CHECK(violations == 0);
}

TEST_CASE("hidden ReLUs produce exact zeros") {
  const DigitalMLP net = trained_like_net(11);
  Rng rng(12);
  const AnalogMLP a = deploy(net, DeviceConfig{}, rng);
  std::size_t zeros = 0;
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < 50; ++i) {
    const Vec te = a.time_embedding(0.3);
    Vec v{n(rng) * a.unit_volt, n(rng) * a.unit_volt};
    v = layer_forward(a.layers[0], v, Vec(14, 0.0), a.clamp, rng);
    for (double h : v) zeros += h == 0.0;
  }
  CHECK(zeros > 0);
}

TEST_CASE("read noise makes repeated evaluations differ") {
  const DigitalMLP net = trained_like_net(13);
  Rng rng(14);
  const AnalogMLP a = deploy(net, DeviceConfig{}, rng);
  const Vec x{0.4, -0.3};
  const Vec s1 = a.score(x, 0.5, std::nullopt, rng), s2 = a.score(x, 0.5, std::nullopt, rng);
  CHECK(s1 != s2);
  const AnalogMLP quiet = with_read_noise(a, 0.0, 0.0);
  CHECK(quiet.score(x, 0.5, std::nullopt, rng) == quiet.score(x, 0.5, std::nullopt, rng));
}

TEST_CASE("deploy rejects a clamp mismatch") {
  const DigitalMLP net = make_score_net(1, std::nullopt, ClampRange{-1.0, 1.0}, OutputScaling::kNone, VPSchedule{});
  Rng rng(1);
  CHECK_THROWS_AS(deploy(net, noiseless(), rng), std::invalid_argument);
}
