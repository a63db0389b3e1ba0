#include "memdiff/analog_net.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

namespace memdiff {

void ClampConfig::validate() const {
  if (!(v_lo < 0.0 && 0.0 < v_hi)) throw std::invalid_argument("clamp: require v_lo < 0 < v_hi");
}

Vec clamp(std::span<const double> v, const ClampConfig& c) {
  Vec out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::min(std::max(v[i], c.v_lo), c.v_hi);
  return out;
}

Vec relu(std::span<const double> v) {
  Vec out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::max(0.0, v[i]);
  return out;
}

Vec layer_forward(const AnalogLayer& layer, std::span<const double> x, std::span<const double> bias_current,
                  const ClampConfig& clamp_cfg, Rng& rng, std::uint64_t* saturations) {
  const std::size_t in = layer.in_dim();
  require_dim(x.size(), in, "layer_forward input");
  if (!bias_current.empty()) require_dim(bias_current.size(), layer.out_dim(), "layer_forward bias current");

  Vec v(layer.xbar.rows);
  for (std::size_t i = 0; i < in; ++i) {
    const double c = std::min(std::max(x[i], clamp_cfg.v_lo), clamp_cfg.v_hi);
    if (saturations && c != x[i]) ++*saturations;
    v[i] = c;
  }
  if (layer.has_bias_row) v[in] = layer.bias_volt;

  Vec y = matvec(layer.xbar, v, rng);
  for (std::size_t j = 0; j < y.size(); ++j) {
    double cur = y[j];
    if (!bias_current.empty()) cur += bias_current[j];
    double out = layer.gain * cur;
    switch (layer.activation) {
      case Activation::kRelu:
        out = std::max(0.0, out);
        break;
      case Activation::kIdentity:
        break;
    }
    y[j] = out;
  }
  return y;
}

Vec AnalogMLP::embedding(double t, Label label) const {
  Vec e = time_embedding(t);
  if (condition_embedding) {
    const Vec c = (*condition_embedding)(label);
    for (std::size_t i = 0; i < e.size(); ++i) e[i] += c[i];
  } else if (label) {
    throw std::invalid_argument("AnalogMLP: label given to an unconditional network");
  }
  return e;
}

Vec mlp_forward(const AnalogMLP& net, std::span<const double> x, std::span<const double> t_embed,
                std::span<const double> c_embed, Rng& rng, std::uint64_t* saturations) {
  require_dim(x.size(), net.in_dim(), "mlp_forward");
  const double u = net.unit_volt;
  Vec v(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) v[i] = x[i] * u;

  const std::size_t L = net.layers.size();
  Vec current;
  for (std::size_t l = 0; l < L; ++l) {
    const AnalogLayer& layer = net.layers[l];
    const bool hidden = l + 1 < L;
    current.clear();
    if (hidden) {
      // Embedding in software units -> bias current scale * u * e (mA).
      require_dim(t_embed.size(), layer.out_dim(), "mlp_forward time embedding");
      current.resize(layer.out_dim());
      for (std::size_t j = 0; j < current.size(); ++j) {
        double e = t_embed[j];
        if (!c_embed.empty()) e += c_embed[j];
        current[j] = layer.scale * u * e;
      }
    }
    v = layer_forward(layer, v, current, net.clamp, rng, saturations);
  }
  for (double& o : v) o /= u;
  return v;
}

Vec AnalogMLP::score(std::span<const double> x, double t, Label label, Rng& rng, std::uint64_t* saturations) const {
  const Vec te = time_embedding(t);
  Vec ce;
  if (condition_embedding) {
    ce = (*condition_embedding)(label);
  } else if (label) {
    throw std::invalid_argument("AnalogMLP: label given to an unconditional network");
  }
  Vec out = mlp_forward(*this, x, te, ce, rng, saturations);
  if (scaling == OutputScaling::kInvSigma) {
    const double k = 1.0 / marginal(schedule, t).sigma;
    for (double& o : out) o *= k;
  }
  return out;
}

double layer_scale(const Matrix& w, std::span<const double> b, const DeviceConfig& cfg) {
  double max_pos = 0.0;
  double max_neg = 0.0;
  auto visit = [&](double v) {
    if (!std::isfinite(v)) throw std::invalid_argument("deploy: non-finite weight");
    max_pos = std::max(max_pos, v);
    max_neg = std::max(max_neg, -v);
  };
  for (double v : w.data()) visit(v);
  for (double v : b) visit(v);
  const double head_pos = cfg.g_max - cfg.g_fixed;
  const double head_neg = cfg.g_fixed - cfg.g_min;
  double scale = std::numeric_limits<double>::infinity();
  if (max_pos > 0.0) scale = std::min(scale, head_pos / max_pos);
  if (max_neg > 0.0) scale = std::min(scale, head_neg / max_neg);
  return std::isfinite(scale) ? scale : 1.0;
}

AnalogLayer deploy_layer(const Matrix& w, std::span<const double> b, Activation act, const DeviceConfig& cfg,
                         double unit_volt, Rng& rng) {
  require_dim(b.size(), w.cols(), "deploy_layer bias");
  AnalogLayer layer;
  layer.scale = layer_scale(w, b, cfg);
  layer.gain = 1.0 / layer.scale;
  layer.activation = act;
  layer.has_bias_row = true;
  layer.bias_volt = unit_volt;
  Matrix g(w.rows() + 1, w.cols());
  for (std::size_t i = 0; i < w.rows(); ++i)
    for (std::size_t j = 0; j < w.cols(); ++j) g(i, j) = weight_to_conductance(w(i, j), layer.scale, cfg);
  for (std::size_t j = 0; j < w.cols(); ++j) g(w.rows(), j) = weight_to_conductance(b[j], layer.scale, cfg);
  layer.xbar = program_array(g, rng, cfg);
  return layer;
}

AnalogMLP deploy(const DigitalMLP& net, const DeviceConfig& cfg, Rng& rng, const DeployOptions& opts) {
  opts.clamp.validate();
  const ClampRange expect = opts.clamp.in_units(opts.unit_volt);
  if (std::abs(expect.lo - net.clamp().lo) > 1e-12 || std::abs(expect.hi - net.clamp().hi) > 1e-12)
    throw std::invalid_argument("deploy: digital clamp range does not match the analog clamp / unit_volt");
  AnalogMLP a;
  a.clamp = opts.clamp;
  a.unit_volt = opts.unit_volt;
  a.time_embedding = net.time_embedding();
  a.condition_embedding = net.condition_embedding();
  a.scaling = net.scaling();
  a.schedule = net.schedule();
  for (std::size_t l = 0; l < net.layers(); ++l) {
    const Activation act = l + 1 < net.layers() ? Activation::kRelu : Activation::kIdentity;
    a.layers.push_back(deploy_layer(net.weight_matrix(l), net.bias(l), act, cfg, opts.unit_volt, rng));
  }
  return a;
}

AnalogMLP with_read_noise(const AnalogMLP& net, double read_noise_a, double read_noise_b) {
  AnalogMLP out = net;
  for (AnalogLayer& layer : out.layers) {
    layer.xbar.config.read_noise_a = read_noise_a;
    layer.xbar.config.read_noise_b = read_noise_b;
    for (std::size_t k = 0; k < layer.xbar.g_programmed.size(); ++k)
      layer.xbar.read_sigma.data()[k] = layer.xbar.config.read_sigma(layer.xbar.g_programmed.data()[k]);
  }
  return out;
}

ScoreFn digital_score_fn(const DigitalMLP& net) {
  return [&net](std::span<const double> x, double t, Label label, Rng&) { return net.forward(x, t, label); };
}

ScoreFn analog_score_fn(const AnalogMLP& net, std::shared_ptr<std::atomic<std::uint64_t>> saturations) {
  return [&net, saturations](std::span<const double> x, double t, Label label, Rng& rng) {
    std::uint64_t local = 0;
    Vec s = net.score(x, t, label, rng, saturations ? &local : nullptr);
    if (saturations && local) saturations->fetch_add(local, std::memory_order_relaxed);
    return s;
  };
}

}  // namespace memdiff
