#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "memdiff/matrix.hpp"
#include "memdiff/rng.hpp"

namespace memdiff {

// Resistive-memory cell parameters. Conductances are in mS, voltages in V,
// currents in mA (mS * V = mA).
struct DeviceConfig {
  double g_min = 0.02;
  double g_max = 0.10;
  double g_fixed = 0.05;  // shared negative weight, 1 / 20 kOhm
  double write_tol = 0.001;
  double write_step_mean = 0.0015;
  double write_step_sigma = 0.0005;
  int max_program_cycles = 1000;
  double read_noise_a = 0.0002;
  double read_noise_b = 0.004;
  std::optional<int> quant_levels;
  // Bypass program-verify and store targets exactly (noiseless twin studies).
  bool exact_write = false;

  // Read-noise standard deviation at conductance g.
  double read_sigma(double g) const { return read_noise_a + read_noise_b * g; }
  bool read_noiseless() const { return read_noise_a == 0.0 && read_noise_b == 0.0; }

  // Throws std::invalid_argument when an invariant is violated.
  void validate() const;
};

class ProgrammingFailure : public std::runtime_error {
 public:
  ProgrammingFailure(const std::string& msg, double best_g, std::size_t row = 0, std::size_t col = 0)
      : std::runtime_error(msg), best_g_(best_g), row_(row), col_(col) {}
  double best_g() const { return best_g_; }
  std::size_t row() const { return row_; }
  std::size_t col() const { return col_; }

 private:
  double best_g_;
  std::size_t row_;
  std::size_t col_;
};

struct ProgramResult {
  double g = 0.0;
  int cycles = 0;
};

// Programmed array. Rows are bit lines (inputs), columns are source lines
// (summed outputs). Immutable after programming.
struct Crossbar {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Matrix g_target;
  Matrix g_programmed;
  DeviceConfig config;
  std::vector<int> program_cycles;
  // Cached per-cell read-noise std, sigma_r(g_programmed).
  Matrix read_sigma;
};

double weight_to_conductance(double w, double scale, const DeviceConfig& cfg);
double conductance_to_weight(double g, double scale, const DeviceConfig& cfg);

// Snap to the nearest of cfg.quant_levels uniformly spaced levels (no-op when unset).
double quantize_conductance(double g, const DeviceConfig& cfg);

// Iterative program-verify starting from a random conductance in [g_min, g_max].
ProgramResult program_cell(double g_target, Rng& rng, const DeviceConfig& cfg);
// Same loop from a known starting conductance.
ProgramResult program_cell_from(double g_start, double g_target, Rng& rng, const DeviceConfig& cfg);

Crossbar program_array(const Matrix& g_targets, Rng& rng, const DeviceConfig& cfg);

// Crossbar holding exactly the given conductances (e.g. imported from CSV).
Crossbar crossbar_from_conductances(const Matrix& g, const DeviceConfig& cfg);

// Effective weights (g + eps) - g_fixed, eps ~ N(0, sigma_r(g)^2) per call.
Matrix read_matrix(const Crossbar& xbar, Rng& rng);

// i = read_matrix(xbar)^T v, with a single read-noise draw for the call.
Vec matvec(const Crossbar& xbar, std::span<const double> v, Rng& rng);

// Test hook: every voltage vector applied to any crossbar in this thread is
// passed to the observer while the guard is alive.
using VoltageObserver = std::function<void(std::span<const double>)>;
class ScopedVoltageObserver {
 public:
  explicit ScopedVoltageObserver(VoltageObserver obs);
  ~ScopedVoltageObserver();
  ScopedVoltageObserver(const ScopedVoltageObserver&) = delete;
  ScopedVoltageObserver& operator=(const ScopedVoltageObserver&) = delete;

 private:
  VoltageObserver previous_;
};

}  // namespace memdiff
