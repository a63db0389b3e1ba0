#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "memdiff/digital_mlp.hpp"
#include "memdiff/latent.hpp"
#include "memdiff/matrix.hpp"
#include "memdiff/rng.hpp"
#include "memdiff/sde.hpp"

namespace memdiff {

struct TrainConfig {
  double learning_rate = 1e-2;
  double momentum = 0.9;
  bool cosine_decay = true;
  std::size_t batch_size = 256;
  std::size_t steps = 40000;
  double p_uncond = 0.1;
  std::uint64_t seed = 1;
  double t_min = 1e-3;

  void validate() const;
};

class TrainingDivergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// SGD with momentum; the learning rate optionally follows a cosine decay to
// zero over total_steps.
class SgdMomentum {
 public:
  SgdMomentum(std::size_t n, double lr, double momentum, bool cosine, std::size_t total_steps);
  void step(std::span<double> params, std::span<const double> grad);
  double current_lr() const;

 private:
  Vec velocity_;
  double lr_;
  double momentum_;
  bool cosine_;
  std::size_t total_;
  std::size_t t_ = 0;
};

struct DsmBatch {
  std::span<const Vec> x0;
  // Empty for unconditional training; else one label per x0.
  std::span<const int> labels;
};

// Denoising score matching, mean over the batch of ||sigma(t) s(x_t, t, c) + eps||^2
// with t ~ U(t_min, T), x_t = m(t) x0 + sigma(t) eps, and each label replaced by
// null with probability p_uncond. Accumulates dloss/dtheta into grad when
// non-empty. Deterministic given rng state.
double dsm_loss(const DigitalMLP& net, const DsmBatch& batch, const VPSchedule& sched, double t_min, double p_uncond,
                Rng& rng, std::span<double> grad = {});

struct ScoreTrainResult {
  DigitalMLP net;
  std::vector<double> loss_curve;
};

// Trains net in place on minibatches drawn uniformly from data. labels is
// empty for unconditional training.
ScoreTrainResult train_score(DigitalMLP net, std::span<const Vec> data, std::span<const int> labels,
                             const VPSchedule& sched, const TrainConfig& cfg);

struct VaeBatch {
  std::span<const Vec> images;
  std::span<const int> labels;
};

// Mean over the batch of MSE(X, X') + gamma * KL(N(mu, sigma^2) || N(center_label, 1)),
// with X' decoded from z = mu + sigma * eps. Gradients are accumulated into
// enc_grad and dec_grad when both are given.
double vae_loss(const VaeEncoder& enc, const VaeDecoder& dec, const VaeBatch& batch, const LatentSpec& latent,
                double gamma, Rng& rng, VaeEncoder* enc_grad = nullptr, VaeDecoder* dec_grad = nullptr);

struct VaeTrainResult {
  VaeEncoder encoder;
  VaeDecoder decoder;
  std::vector<double> loss_curve;
};

VaeTrainResult train_vae(std::span<const Vec> images, std::span<const int> labels, double gamma,
                         const LatentSpec& latent, const TrainConfig& cfg, const VaeShape& shape = {},
                         ClampRange clamp = {});

// Moving average of a curve (window clipped at the start).
std::vector<double> smooth(std::span<const double> v, std::size_t window);

}  // namespace memdiff
