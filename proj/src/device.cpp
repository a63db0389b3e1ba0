#include "memdiff/device.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace memdiff {

namespace {
thread_local VoltageObserver t_observer;
}

void DeviceConfig::validate() const {
  if (!(g_min > 0.0 && g_min < g_fixed && g_fixed < g_max))
    throw std::invalid_argument("device: require 0 < g_min < g_fixed < g_max");
  if (!exact_write && !(write_tol >= 0.0)) throw std::invalid_argument("device: write_tol must be >= 0");
  if (write_step_mean < 0.0 || write_step_sigma < 0.0)
    throw std::invalid_argument("device: write step parameters must be >= 0");
  if (max_program_cycles < 1) throw std::invalid_argument("device: max_program_cycles must be >= 1");
  if (read_sigma(g_min) < 0.0 || read_sigma(g_max) < 0.0)
    throw std::invalid_argument("device: read-noise std must be >= 0 on [g_min, g_max]");
  if (quant_levels && *quant_levels < 64) throw std::invalid_argument("device: quant_levels must be >= 64");
}

double weight_to_conductance(double w, double scale, const DeviceConfig& cfg) {
  if (!std::isfinite(w)) throw std::invalid_argument("weight_to_conductance: non-finite weight");
  if (!(scale > 0.0)) throw std::invalid_argument("weight_to_conductance: scale must be > 0");
  return std::clamp(w * scale + cfg.g_fixed, cfg.g_min, cfg.g_max);
}

double conductance_to_weight(double g, double scale, const DeviceConfig& cfg) {
  return (g - cfg.g_fixed) / scale;
}

double quantize_conductance(double g, const DeviceConfig& cfg) {
  if (!cfg.quant_levels) return g;
  const double step = (cfg.g_max - cfg.g_min) / (*cfg.quant_levels - 1);
  const double k = std::round((g - cfg.g_min) / step);
  return std::clamp(cfg.g_min + k * step, cfg.g_min, cfg.g_max);
}

ProgramResult program_cell_from(double g_start, double g_target, Rng& rng, const DeviceConfig& cfg) {
  if (!(g_target >= cfg.g_min && g_target <= cfg.g_max))
    throw std::invalid_argument("program_cell: target outside [g_min, g_max]");
  std::normal_distribution<double> step_dist(cfg.write_step_mean, cfg.write_step_sigma);
  double g = g_start;
  double best = g;
  for (int cycle = 1; cycle <= cfg.max_program_cycles; ++cycle) {
    // Verify read.
    const double err = g_target - g;
    if (std::abs(err) < std::abs(g_target - best)) best = g;
    if (std::abs(err) <= cfg.write_tol) return {g, cycle};
    // SET pulse when below target, RESET pulse when above.
    const double step = std::abs(step_dist(rng));
    g = std::clamp(g + std::copysign(step, err), cfg.g_min, cfg.g_max);
  }
  throw ProgrammingFailure("program_cell: target " + std::to_string(g_target) + " mS not reached within " +
                               std::to_string(cfg.max_program_cycles) + " cycles",
                           best);
}

ProgramResult program_cell(double g_target, Rng& rng, const DeviceConfig& cfg) {
  std::uniform_real_distribution<double> start(cfg.g_min, cfg.g_max);
  const double g0 = start(rng);
  return program_cell_from(g0, g_target, rng, cfg);
}

namespace {

Matrix compute_read_sigma(const Matrix& g, const DeviceConfig& cfg) {
  Matrix s(g.rows(), g.cols());
  for (std::size_t k = 0; k < g.size(); ++k) s.data()[k] = cfg.read_sigma(g.data()[k]);
  return s;
}

}  // namespace

Crossbar program_array(const Matrix& g_targets, Rng& rng, const DeviceConfig& cfg) {
  cfg.validate();
  Crossbar x;
  x.rows = g_targets.rows();
  x.cols = g_targets.cols();
  x.config = cfg;
  x.g_target = Matrix(x.rows, x.cols);
  x.g_programmed = Matrix(x.rows, x.cols);
  x.program_cycles.assign(x.rows * x.cols, 0);
  for (std::size_t r = 0; r < x.rows; ++r) {
    for (std::size_t c = 0; c < x.cols; ++c) {
      const double target = quantize_conductance(g_targets(r, c), cfg);
      x.g_target(r, c) = target;
      if (cfg.exact_write) {
        if (!(target >= cfg.g_min && target <= cfg.g_max))
          throw std::invalid_argument("program_array: target outside [g_min, g_max]");
        x.g_programmed(r, c) = target;
        continue;
      }
      try {
        const ProgramResult res = program_cell(target, rng, cfg);
        x.g_programmed(r, c) = res.g;
        x.program_cycles[r * x.cols + c] = res.cycles;
      } catch (const ProgrammingFailure& e) {
        throw ProgrammingFailure(std::string(e.what()) + " at cell (" + std::to_string(r) + ", " +
                                     std::to_string(c) + ")",
                                 e.best_g(), r, c);
      }
    }
  }
  x.read_sigma = compute_read_sigma(x.g_programmed, cfg);
  return x;
}

Crossbar crossbar_from_conductances(const Matrix& g, const DeviceConfig& cfg) {
  cfg.validate();
  Crossbar x;
  x.rows = g.rows();
  x.cols = g.cols();
  x.config = cfg;
  x.g_target = g;
  x.g_programmed = g;
  x.program_cycles.assign(g.size(), 0);
  for (double v : g.data())
    if (!(v >= cfg.g_min && v <= cfg.g_max))
      throw std::invalid_argument("crossbar_from_conductances: conductance outside [g_min, g_max]");
  x.read_sigma = compute_read_sigma(g, cfg);
  return x;
}

Matrix read_matrix(const Crossbar& xbar, Rng& rng) {
  Matrix w(xbar.rows, xbar.cols);
  const double gf = xbar.config.g_fixed;
  const bool noiseless = xbar.config.read_noiseless();
  for (std::size_t k = 0; k < w.size(); ++k) {
    double g = xbar.g_programmed.data()[k];
    if (!noiseless) g += xbar.read_sigma.data()[k] * standard_normal(rng);
    w.data()[k] = g - gf;
  }
  return w;
}

Vec matvec(const Crossbar& xbar, std::span<const double> v, Rng& rng) {
  require_dim(v.size(), xbar.rows, "matvec");
  if (t_observer) t_observer(v);
  Vec out(xbar.cols, 0.0);
  const double gf = xbar.config.g_fixed;
  const bool noiseless = xbar.config.read_noiseless();
  for (std::size_t r = 0; r < xbar.rows; ++r) {
    const double vr = v[r];
    const auto g = xbar.g_programmed.row(r);
    if (noiseless) {
      for (std::size_t c = 0; c < xbar.cols; ++c) out[c] += (g[c] - gf) * vr;
    } else {
      // Noise is drawn even for zero inputs so the stream position does not
      // depend on the applied voltages.
      const auto s = xbar.read_sigma.row(r);
      for (std::size_t c = 0; c < xbar.cols; ++c) out[c] += (g[c] + s[c] * standard_normal(rng) - gf) * vr;
    }
  }
  return out;
}

ScopedVoltageObserver::ScopedVoltageObserver(VoltageObserver obs) : previous_(std::move(t_observer)) {
  t_observer = std::move(obs);
}

ScopedVoltageObserver::~ScopedVoltageObserver() { t_observer = std::move(previous_); }

}  // namespace memdiff
