#include <doctest.h>

#include <cmath>
#include <functional>

#include "memdiff/data.hpp"
#include "memdiff/training.hpp"

using namespace memdiff;

namespace {

struct GradReport {
  double worst = 0.0;
  std::size_t checked = 0;
};

// Central differences on the parameters picked by the index list. Relative
// error uses max(|analytic|, |numeric|) with a small floor for zero gradients.
GradReport check_grad(const std::vector<double*>& params, const Vec& analytic, const std::function<double()>& loss,
                      const std::vector<std::size_t>& picks, double h = 1e-5) {
  GradReport r;
  for (std::size_t i : picks) {
    double* p = params[i];
    const double keep = *p;
    *p = keep + h;
    const double up = loss();
    *p = keep - h;
    const double down = loss();
    *p = keep;
    const double numeric = (up - down) / (2 * h);
    const double scale = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-6});
    r.worst = std::max(r.worst, std::abs(analytic[i] - numeric) / scale);
    ++r.checked;
  }
  return r;
}

std::vector<std::size_t> random_picks(std::size_t n, std::size_t count, Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(pick(rng));
  return out;
}

std::vector<double*> ptrs(Vec& v) {
  std::vector<double*> p;
  for (double& x : v) p.push_back(&x);
  return p;
}

Vec collect(const std::vector<double*>& p) {
  Vec v;
  for (const double* x : p) v.push_back(*x);
  return v;
}

std::vector<Vec> gaussian_points(std::size_t n, Vec mu, double s, Rng& rng) {
  std::vector<Vec> out(n, mu);
  for (auto& p : out)
    for (double& x : p) x += s * standard_normal(rng);
  return out;
}

DigitalMLP random_net(std::uint64_t seed, std::optional<std::size_t> classes) {
  DigitalMLP net = make_score_net(seed, classes, ClampRange{}, OutputScaling::kInvSigma, VPSchedule{});
  Rng rng(seed + 1);
  net.init_random(rng);
  std::normal_distribution<double> n(0.0, 0.2);
  for (std::size_t l = 0; l < net.layers(); ++l) {
    Vec b = net.bias(l);
    for (double& v : b) v = n(rng);
    net.set_layer(l, net.weight_matrix(l), b);
  }
  return net;
}

}  // namespace

TEST_CASE("score net gradient matches finite differences") {
  for (bool conditional : {false, true}) {
    DigitalMLP net = random_net(conditional ? 11 : 12, conditional ? std::optional<std::size_t>(3) : std::nullopt);
    Rng data_rng(3);
    const auto x0 = gaussian_points(32, {0.6, -0.4}, 0.5, data_rng);
    std::vector<int> labels;
    if (conditional)
      for (std::size_t i = 0; i < x0.size(); ++i) labels.push_back(static_cast<int>(i % 3));
    const DsmBatch batch{x0, labels};
    const VPSchedule sched;

    Vec grad(net.param_count(), 0.0);
    Rng r0(77);
    dsm_loss(net, batch, sched, 1e-3, 0.3, r0, grad);
    auto loss = [&] {
      Rng r(77);
      return dsm_loss(net, batch, sched, 1e-3, 0.3, r);
    };
    Rng pick_rng(5);
    const auto report = check_grad(ptrs(net.params()), grad, loss, random_picks(net.param_count(), 20, pick_rng));
    INFO("conditional=", conditional, " worst relative error ", report.worst);
    CHECK(report.worst <= 1e-4);

    // Every parameter, not just the sample.
    std::vector<std::size_t> all(net.param_count());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    CHECK(check_grad(ptrs(net.params()), grad, loss, all).worst <= 1e-4);
  }
}

TEST_CASE("zero network loss is the expected squared noise norm") {
  DigitalMLP net = make_score_net(1, std::nullopt, ClampRange{}, OutputScaling::kInvSigma, VPSchedule{});
  Rng rng(1);
  const auto x0 = gaussian_points(20000, {1.0, 0.0}, 0.1, rng);
  Rng r(2);
  const double loss = dsm_loss(net, {x0, {}}, VPSchedule{}, 1e-3, 0.0, r);
  // Mean of a chi-square with 2 degrees of freedom over 20000 draws.
  CHECK(loss == doctest::Approx(2.0).epsilon(4 * std::sqrt(4.0 / 20000) / 2.0));
}

TEST_CASE("training on a Gaussian approaches the analytic loss floor") {
  const VPSchedule sched;
  const Vec mu{0.5, -0.5};
  const double s0 = 0.3;
  Rng rng(9);
  const auto data = gaussian_points(5000, mu, s0, rng);

  TrainConfig cfg;
  cfg.steps = 4000;
  cfg.batch_size = 128;
  cfg.p_uncond = 0.0;
  cfg.seed = 4;
  DigitalMLP net = make_score_net(3, std::nullopt, ClampRange{}, OutputScaling::kInvSigma, sched);
  Rng init(8);
  net.init_random(init);
  const auto res = train_score(net, data, {}, sched, cfg);

  // With the exact score the residual per dimension is m^2 s0^2 / (m^2 s0^2 + sigma^2).
  const int n = 20000;
  double floor = 0.0;
  for (int i = 0; i < n; ++i) {
    const double t = 1e-3 + (sched.T - 1e-3) * (i + 0.5) / n;
    const Marginal m = marginal(sched, t);
    const double a = m.m * m.m * s0 * s0;
    floor += 2.0 * a / (a + m.sigma * m.sigma);
  }
  floor /= n;

  Rng eval_rng(10);
  const auto fresh = gaussian_points(40000, mu, s0, eval_rng);
  Rng r(11);
  const double trained = dsm_loss(res.net, {fresh, {}}, sched, 1e-3, 0.0, r);
  Rng r2(11);
  const double untrained = dsm_loss(net, {fresh, {}}, sched, 1e-3, 0.0, r2);
  INFO("floor ", floor, " trained ", trained, " untrained ", untrained);
  CHECK(trained < untrained);
  CHECK(trained > floor * 0.95);
  CHECK(trained < floor * 1.15);

  const auto sm = smooth(res.loss_curve, 100);
  CHECK(sm.back() < sm[199]);
  for (std::size_t i = 1000; i < sm.size(); i += 1000) CHECK(sm[i] <= sm[i - 1000] * 1.05);
}

TEST_CASE("seeded training is bit-reproducible") {
  Rng rng(1);
  const auto data = gaussian_points(500, {0.0, 1.0}, 0.2, rng);
  std::vector<int> labels(data.size());
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 3);
  TrainConfig cfg;
  cfg.steps = 200;
  cfg.batch_size = 32;
  const DigitalMLP net = random_net(21, 3);
  const auto a = train_score(net, data, labels, VPSchedule{}, cfg);
  const auto b = train_score(net, data, labels, VPSchedule{}, cfg);
  CHECK(a.net.params() == b.net.params());
  CHECK(a.loss_curve == b.loss_curve);
}

TEST_CASE("training divergence is reported") {
  Rng rng(1);
  const auto data = gaussian_points(100, {0.0, 1.0}, 0.2, rng);
  TrainConfig cfg;
  cfg.steps = 500;
  cfg.batch_size = 16;
  cfg.learning_rate = 1e6;
  cfg.cosine_decay = false;
  CHECK_THROWS_AS(train_score(random_net(2, std::nullopt), data, {}, VPSchedule{}, cfg), TrainingDivergence);

  TrainConfig bad;
  bad.p_uncond = 1.0;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("latent KL closed form") {
  const Vec c{1.0, -0.5};
  CHECK(latent_kl(c, Vec{1.0, 1.0}, c) == doctest::Approx(0.0).epsilon(1e-15));
  // 0.5 (s^2 + d^2 - 1 - ln s^2) per dimension
  const double s = 0.5, d = 0.7;
  const double one = 0.5 * (s * s + d * d - 1.0 - std::log(s * s));
  CHECK(latent_kl(Vec{1.7}, Vec{s}, Vec{1.0}) == doctest::Approx(one));
  CHECK(latent_kl(Vec{1.7, 0.0}, Vec{s, 1.0}, Vec{1.0, 0.0}) == doctest::Approx(one));
}

TEST_CASE("VAE gradients match finite differences") {
  const VaeShape shape;
  const LatentSpec latent = default_latent_spec();
  Rng rng(31);
  VaeEncoder enc(shape);
  VaeDecoder dec(shape, ClampRange{});
  enc.init_random(rng);
  dec.init_random(rng);
  for (double* p : enc.param_ptrs()) *p += 0.05 * standard_normal(rng);
  for (double* p : dec.param_ptrs()) *p += 0.05 * standard_normal(rng);

  Rng glyph_rng(6);
  const auto glyphs = synthetic_glyphs(3, 2, glyph_rng);
  const VaeBatch batch{glyphs.images, glyphs.labels};

  VaeEncoder eg(shape);
  VaeDecoder dg(shape, ClampRange{});
  eg.zero();
  dg.zero();
  Rng r0(5);
  vae_loss(enc, dec, batch, latent, 0.5, r0, &eg, &dg);
  auto loss = [&] {
    Rng r(5);
    return vae_loss(enc, dec, batch, latent, 0.5, r);
  };

  Rng pick_rng(6);
  const auto ep = enc.param_ptrs();
  const auto er = check_grad(ep, collect(eg.param_ptrs()), loss, random_picks(ep.size(), 40, pick_rng));
  INFO("encoder worst ", er.worst);
  CHECK(er.worst <= 1e-4);
  const auto dp = dec.param_ptrs();
  const auto dr = check_grad(dp, collect(dg.param_ptrs()), loss, random_picks(dp.size(), 40, pick_rng));
  INFO("decoder worst ", dr.worst);
  CHECK(dr.worst <= 1e-4);
}

TEST_CASE("deconvolution and convolution kernel gradients") {
  Rng rng(41);
  FeatureMap x(3, 5, 5);
  for (double& v : x.data) v = standard_normal(rng);
  for (auto [stride, pad, k] : {std::tuple{2, 0, 3}, std::tuple{2, 2, 4}, std::tuple{1, 1, 3}}) {
    Kernel kd(3, 2, k);
    for (double& v : kd.data) v = standard_normal(rng);
    FeatureMap dy = deconv2d(x, kd, stride, pad);
    for (double& v : dy.data) v = standard_normal(rng);
    Kernel g(3, 2, k);
    deconv2d_kernel_grad(x, dy, stride, pad, g);
    auto loss = [&] {
      const FeatureMap y = deconv2d(x, kd, stride, pad);
      double s = 0;
      for (std::size_t i = 0; i < y.data.size(); ++i) s += y.data[i] * dy.data[i];
      return s;
    };
    std::vector<std::size_t> all(kd.data.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    CHECK(check_grad(ptrs(kd.data), g.data, loss, all).worst <= 1e-4);

    Kernel kc(2, 3, k);
    for (double& v : kc.data) v = standard_normal(rng);
    FeatureMap dc = conv2d(x, kc, stride, pad);
    for (double& v : dc.data) v = standard_normal(rng);
    Kernel gc(2, 3, k);
    conv2d_kernel_grad(x, dc, stride, pad, gc);
    auto closs = [&] {
      const FeatureMap y = conv2d(x, kc, stride, pad);
      double s = 0;
      for (std::size_t i = 0; i < y.data.size(); ++i) s += y.data[i] * dc.data[i];
      return s;
    };
    std::vector<std::size_t> callidx(kc.data.size());
    for (std::size_t i = 0; i < callidx.size(); ++i) callidx[i] = i;
    CHECK(check_grad(ptrs(kc.data), gc.data, closs, callidx).worst <= 1e-4);
  }
}

TEST_CASE("gamma zero trains a plain autoencoder") {
  Rng glyph_rng(2);
  const auto glyphs = synthetic_glyphs(3, 30, glyph_rng);
  TrainConfig cfg;
  cfg.learning_rate = 1e-2;
  cfg.batch_size = 32;
  cfg.steps = 1500;
  cfg.p_uncond = 0.0;
  cfg.seed = 3;
  const LatentSpec latent = default_latent_spec();
  const auto res = train_vae(glyphs.images, glyphs.labels, 0.0, latent, cfg);

  Rng init = make_rng(cfg.seed, {stream::kVaeInit});
  VaeEncoder enc0(VaeShape{});
  VaeDecoder dec0(VaeShape{}, ClampRange{});
  enc0.init_random(init);
  dec0.init_random(init);
  auto mse = [&](const VaeEncoder& e, const VaeDecoder& d) {
    double s = 0;
    for (const auto& img : glyphs.images) {
      const Vec out = d.decode(e.encode(img).mu);
      for (std::size_t i = 0; i < img.size(); ++i) s += (out[i] - img[i]) * (out[i] - img[i]);
    }
    return s / (glyphs.images.size() * glyphs.images[0].size());
  };
  CHECK(mse(res.encoder, res.decoder) < mse(enc0, dec0));
}

TEST_CASE("smoothing is a clipped moving average") {
  const Vec v{1, 2, 3, 4};
  const auto s = smooth(v, 2);
  CHECK(s == Vec{1.0, 1.5, 2.5, 3.5});
}
