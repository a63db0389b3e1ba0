#include "memdiff/training.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace memdiff {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("train: learning_rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("train: momentum must be in [0, 1)");
  if (batch_size == 0 || steps == 0) throw std::invalid_argument("train: batch_size and steps must be >= 1");
  if (!(p_uncond >= 0.0 && p_uncond < 1.0)) throw std::invalid_argument("train: p_uncond must be in [0, 1)");
  if (!(t_min > 0.0)) throw std::invalid_argument("train: t_min must be > 0");
}

SgdMomentum::SgdMomentum(std::size_t n, double lr, double momentum, bool cosine, std::size_t total_steps)
    : velocity_(n, 0.0), lr_(lr), momentum_(momentum), cosine_(cosine), total_(std::max<std::size_t>(1, total_steps)) {}

double SgdMomentum::current_lr() const {
  if (!cosine_) return lr_;
  const double frac = std::min(1.0, static_cast<double>(t_) / static_cast<double>(total_));
  return lr_ * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

void SgdMomentum::step(std::span<double> params, std::span<const double> grad) {
  require_dim(params.size(), velocity_.size(), "SgdMomentum params");
  require_dim(grad.size(), velocity_.size(), "SgdMomentum grad");
  const double lr = current_lr();
  for (std::size_t i = 0; i < params.size(); ++i) {
    velocity_[i] = momentum_ * velocity_[i] + grad[i];
    params[i] -= lr * velocity_[i];
  }
  ++t_;
}

double dsm_loss(const DigitalMLP& net, const DsmBatch& batch, const VPSchedule& sched, double t_min, double p_uncond,
                Rng& rng, std::span<double> grad) {
  if (batch.x0.empty()) throw std::invalid_argument("dsm_loss: empty batch");
  const bool conditional = !batch.labels.empty();
  if (conditional) require_dim(batch.labels.size(), batch.x0.size(), "dsm_loss labels");
  const std::size_t n = net.in_dim();
  const double inv_b = 1.0 / static_cast<double>(batch.x0.size());
  std::uniform_real_distribution<double> t_dist(t_min, sched.T);

  DigitalMLP::Cache cache;
  Vec eps(n), xt(n), dscore(n);
  double loss = 0.0;
  for (std::size_t b = 0; b < batch.x0.size(); ++b) {
    const Vec& x0 = batch.x0[b];
    require_dim(x0.size(), n, "dsm_loss sample");
    const double t = t_dist(rng);
    for (double& e : eps) e = standard_normal(rng);
    Label label;
    if (conditional) {
      const bool drop = uniform01(rng) < p_uncond;
      if (!drop) label = batch.labels[b];
    }
    const Marginal mg = marginal(sched, t);
    for (std::size_t i = 0; i < n; ++i) xt[i] = mg.m * x0[i] + mg.sigma * eps[i];
    const Vec s = net.forward(xt, t, label, cache);
    double l = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = mg.sigma * s[i] + eps[i];
      l += r * r;
      dscore[i] = 2.0 * r * mg.sigma * inv_b;
    }
    loss += l * inv_b;
    if (!grad.empty()) net.backward(cache, dscore, grad);
  }
  return loss;
}

ScoreTrainResult train_score(DigitalMLP net, std::span<const Vec> data, std::span<const int> labels,
                             const VPSchedule& sched, const TrainConfig& cfg) {
  cfg.validate();
  if (data.empty()) throw std::invalid_argument("train_score: empty dataset");
  const bool conditional = !labels.empty();
  if (conditional) require_dim(labels.size(), data.size(), "train_score labels");

  Rng batch_rng = make_rng(cfg.seed, {stream::kTrainBatches});
  std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
  SgdMomentum opt(net.param_count(), cfg.learning_rate, cfg.momentum, cfg.cosine_decay, cfg.steps);

  std::vector<Vec> xb(cfg.batch_size);
  std::vector<int> lb(conditional ? cfg.batch_size : 0);
  Vec grad(net.param_count());
  ScoreTrainResult res;
  res.loss_curve.reserve(cfg.steps);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    for (std::size_t b = 0; b < cfg.batch_size; ++b) {
      const std::size_t k = pick(batch_rng);
      xb[b] = data[k];
      if (conditional) lb[b] = labels[k];
    }
    std::fill(grad.begin(), grad.end(), 0.0);
    const double loss = dsm_loss(net, {xb, lb}, sched, cfg.t_min, cfg.p_uncond, batch_rng, grad);
    if (!std::isfinite(loss))
      throw TrainingDivergence("train_score: loss became non-finite at step " + std::to_string(step) +
                               "; lower the learning rate");
    res.loss_curve.push_back(loss);
    opt.step(net.params(), grad);
  }
  res.net = std::move(net);
  return res;
}

std::vector<double> smooth(std::span<const double> v, std::size_t window) {
  std::vector<double> out(v.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    acc += v[i];
    if (i >= window) acc -= v[i - window];
    out[i] = acc / static_cast<double>(std::min(i + 1, window));
  }
  return out;
}

}  // namespace memdiff

namespace memdiff {

double vae_loss(const VaeEncoder& enc, const VaeDecoder& dec, const VaeBatch& batch, const LatentSpec& latent,
                double gamma, Rng& rng, VaeEncoder* enc_grad, VaeDecoder* dec_grad) {
  if (batch.images.empty()) throw std::invalid_argument("vae_loss: empty batch");
  require_dim(batch.labels.size(), batch.images.size(), "vae_loss labels");
  if ((enc_grad == nullptr) != (dec_grad == nullptr))
    throw std::invalid_argument("vae_loss: pass both gradient accumulators or neither");
  const std::size_t d = latent.dim;
  const double inv_b = 1.0 / static_cast<double>(batch.images.size());
  VaeEncoder::Cache ec;
  VaeDecoder::Cache dc;
  double loss = 0.0;
  for (std::size_t b = 0; b < batch.images.size(); ++b) {
    const Vec& x = batch.images[b];
    const int label = batch.labels[b];
    if (label < 0 || static_cast<std::size_t>(label) >= latent.classes())
      throw std::out_of_range("vae_loss: label out of range");
    const Vec& center = latent.centers[static_cast<std::size_t>(label)];
    const Vec out = enc.forward(x, ec);
    Vec mu(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(d));
    Vec sigma(d), eps(d), z(d);
    for (std::size_t i = 0; i < d; ++i) {
      sigma[i] = std::exp(0.5 * out[d + i]);
      eps[i] = standard_normal(rng);
      z[i] = mu[i] + sigma[i] * eps[i];
    }
    const Vec xr = dec.forward(z, dc);
    const double inv_p = 1.0 / static_cast<double>(xr.size());
    double mse = 0.0;
    Vec dimg(xr.size());
    for (std::size_t i = 0; i < xr.size(); ++i) {
      const double r = xr[i] - x[i];
      mse += r * r * inv_p;
      dimg[i] = 2.0 * r * inv_p * inv_b;
    }
    loss += (mse + gamma * latent_kl(mu, sigma, center)) * inv_b;
    if (!enc_grad) continue;
    const Vec dz = dec.backward(dc, dimg, *dec_grad);
    Vec dout(2 * d);
    for (std::size_t i = 0; i < d; ++i) {
      const double s2 = sigma[i] * sigma[i];
      // z = mu + exp(logvar / 2) eps; KL term 1/2 (exp(logvar) + (mu - c)^2 - 1 - logvar).
      dout[i] = dz[i] + gamma * inv_b * (mu[i] - center[i]);
      dout[d + i] = dz[i] * 0.5 * sigma[i] * eps[i] + gamma * inv_b * 0.5 * (s2 - 1.0);
    }
    enc.backward(ec, dout, *enc_grad);
  }
  return loss;
}

namespace {

Vec gather(const std::vector<double*>& ptrs) {
  Vec v(ptrs.size());
  for (std::size_t i = 0; i < ptrs.size(); ++i) v[i] = *ptrs[i];
  return v;
}

void scatter(const std::vector<double*>& ptrs, std::span<const double> v) {
  for (std::size_t i = 0; i < ptrs.size(); ++i) *ptrs[i] = v[i];
}

}  // namespace

VaeTrainResult train_vae(std::span<const Vec> images, std::span<const int> labels, double gamma,
                         const LatentSpec& latent, const TrainConfig& cfg, const VaeShape& shape, ClampRange clamp) {
  cfg.validate();
  latent.validate();
  if (!(gamma >= 0.0)) throw std::invalid_argument("train_vae: gamma must be >= 0");
  if (images.empty()) throw std::invalid_argument("train_vae: empty dataset");
  require_dim(labels.size(), images.size(), "train_vae labels");
  require_dim(shape.latent, latent.dim, "train_vae latent dim");

  VaeTrainResult res{VaeEncoder(shape), VaeDecoder(shape, clamp), {}};
  Rng init = make_rng(cfg.seed, {stream::kVaeInit});
  res.encoder.init_random(init);
  res.decoder.init_random(init);

  VaeEncoder eg = res.encoder;
  VaeDecoder dg = res.decoder;
  auto ep = res.encoder.param_ptrs();
  auto dp = res.decoder.param_ptrs();
  auto egp = eg.param_ptrs();
  auto dgp = dg.param_ptrs();
  SgdMomentum eopt(ep.size(), cfg.learning_rate, cfg.momentum, cfg.cosine_decay, cfg.steps);
  SgdMomentum dopt(dp.size(), cfg.learning_rate, cfg.momentum, cfg.cosine_decay, cfg.steps);

  Rng rng = make_rng(cfg.seed, {stream::kVaeBatches});
  std::uniform_int_distribution<std::size_t> pick(0, images.size() - 1);
  std::vector<Vec> xb(cfg.batch_size);
  std::vector<int> lb(cfg.batch_size);
  res.loss_curve.reserve(cfg.steps);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    for (std::size_t b = 0; b < cfg.batch_size; ++b) {
      const std::size_t k = pick(rng);
      xb[b] = images[k];
      lb[b] = labels[k];
    }
    eg.zero();
    dg.zero();
    const double loss = vae_loss(res.encoder, res.decoder, {xb, lb}, latent, gamma, rng, &eg, &dg);
    if (!std::isfinite(loss))
      throw TrainingDivergence("train_vae: loss became non-finite at step " + std::to_string(step) +
                               "; lower the learning rate");
    res.loss_curve.push_back(loss);
    Vec ev = gather(ep), dv = gather(dp);
    eopt.step(ev, gather(egp));
    dopt.step(dv, gather(dgp));
    scatter(ep, ev);
    scatter(dp, dv);
  }
  return res;
}

}  // namespace memdiff
