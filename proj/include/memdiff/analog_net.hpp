#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "memdiff/device.hpp"
#include "memdiff/digital_mlp.hpp"
#include "memdiff/embedding.hpp"
#include "memdiff/sde.hpp"

namespace memdiff {

// Input-voltage protection range applied before every crossbar.
struct ClampConfig {
  double v_lo = -0.2;
  double v_hi = 0.4;

  void validate() const;
  ClampRange in_units(double unit_volt) const { return {v_lo / unit_volt, v_hi / unit_volt}; }
};

enum class Activation { kIdentity, kRelu };

// One crossbar followed by a transimpedance stage. When has_bias_row is set,
// the last crossbar row is driven by the constant bias_volt and stores the
// layer bias.
struct AnalogLayer {
  Crossbar xbar;
  double gain = 1.0;   // V per mA
  double scale = 1.0;  // mS per unit weight
  Activation activation = Activation::kIdentity;
  bool has_bias_row = false;
  double bias_volt = 0.1;

  std::size_t in_dim() const { return xbar.rows - (has_bias_row ? 1 : 0); }
  std::size_t out_dim() const { return xbar.cols; }
};

Vec clamp(std::span<const double> v, const ClampConfig& c);
Vec relu(std::span<const double> v);

// y = activation(gain * (matvec(xbar, clamp(x)) + bias_current)). An empty
// bias_current means no injection. Increments *saturations once per clamped
// input element when given.
Vec layer_forward(const AnalogLayer& layer, std::span<const double> x, std::span<const double> bias_current,
                  const ClampConfig& clamp_cfg, Rng& rng, std::uint64_t* saturations = nullptr);

// Analog counterpart of DigitalMLP.
struct AnalogMLP {
  std::vector<AnalogLayer> layers;
  ClampConfig clamp;
  double unit_volt = 0.1;
  TimeEmbedding time_embedding;
  std::optional<ConditionEmbedding> condition_embedding;
  OutputScaling scaling = OutputScaling::kInvSigma;
  VPSchedule schedule;

  std::size_t in_dim() const { return layers.front().in_dim(); }
  std::size_t out_dim() const { return layers.back().out_dim(); }

  // Embedding sum injected at every hidden layer, in software units.
  Vec embedding(double t, Label label) const;
  // Full score: mlp_forward times the output scale at t.
  Vec score(std::span<const double> x, double t, Label label, Rng& rng, std::uint64_t* saturations = nullptr) const;
};

// Network output in software units. t_embed and c_embed are added (in
// software units, converted to bias currents per layer) to every hidden layer;
// c_embed may be empty.
Vec mlp_forward(const AnalogMLP& net, std::span<const double> x, std::span<const double> t_embed,
                std::span<const double> c_embed, Rng& rng, std::uint64_t* saturations = nullptr);

struct DeployOptions {
  ClampConfig clamp;
  double unit_volt = 0.1;
};

// Largest per-layer scale (mS per unit weight) that maps every weight and
// bias inside [g_min, g_max] without clipping.
double layer_scale(const Matrix& w, std::span<const double> b, const DeviceConfig& cfg);

// Programs one dense layer (in x out weights plus bias) onto a crossbar with
// a bias row.
AnalogLayer deploy_layer(const Matrix& w, std::span<const double> b, Activation act, const DeviceConfig& cfg,
                         double unit_volt, Rng& rng);

AnalogMLP deploy(const DigitalMLP& net, const DeviceConfig& cfg, Rng& rng, const DeployOptions& opts = {});

// Copy of net whose crossbars use a different read-noise configuration
// (write state unchanged).
AnalogMLP with_read_noise(const AnalogMLP& net, double read_noise_a, double read_noise_b);

// ScoreFn adapters. The analog adapter adds clamp engagements to *saturations
// when non-null (may be shared across threads).
ScoreFn digital_score_fn(const DigitalMLP& net);
ScoreFn analog_score_fn(const AnalogMLP& net, std::shared_ptr<std::atomic<std::uint64_t>> saturations = {});

}  // namespace memdiff
