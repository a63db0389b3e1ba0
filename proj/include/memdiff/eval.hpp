#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "memdiff/analog_net.hpp"
#include "memdiff/device.hpp"
#include "memdiff/digital_mlp.hpp"
#include "memdiff/matrix.hpp"
#include "memdiff/sde.hpp"
#include "memdiff/solver.hpp"

namespace memdiff {

struct KlConfig {
  std::size_t bins_per_axis = 50;
  Vec lo = {-2.0, -2.0};
  Vec hi = {2.0, 2.0};
  double pseudocount = 1e-6;

  void validate() const;
};

// Normalized histogram over the box with pseudocount smoothing: each bin
// probability is (count / n + pseudocount) / (1 + bins * pseudocount).
// Out-of-box samples land in the edge bins.
Vec histogram(std::span<const Vec> samples, const KlConfig& cfg);

// D_KL(P || Q) = sum P log(P / Q) between the smoothed histograms of the two
// sample sets, in nats.
double histogram_kl(std::span<const Vec> p_samples, std::span<const Vec> q_samples, const KlConfig& cfg);

// Fraction of samples whose nearest center index equals their label.
double nearest_center_accuracy(std::span<const Vec> samples, std::span<const int> labels,
                               std::span<const Vec> centers);

// Index of the nearest vector by squared Euclidean distance.
std::size_t nearest_index(std::span<const double> x, std::span<const Vec> candidates);

double spearman_rho(std::span<const double> a, std::span<const double> b);

struct NoiseSweepGrid {
  std::vector<double> write_sigmas;  // fraction of g_max - g_min
  std::vector<double> read_sigmas;   // fraction of g_fixed
  std::vector<SolverMode> modes;
  std::size_t repeats = 1;
  // kl[mode][write][read][repeat]; NaN marks a failed cell.
  std::vector<std::vector<std::vector<std::vector<double>>>> kl;
  std::vector<std::string> failures;

  double mean_kl(std::size_t mode, std::size_t w, std::size_t r) const;
};

struct NoiseSweepTask {
  const DigitalMLP* net = nullptr;
  std::vector<Vec> ground_truth;
  VPSchedule schedule;
  SolverConfig solver;  // mode/method overridden per cell
  std::size_t samples = 1000;
  KlConfig kl;
  DeviceConfig device;
  DeployOptions deploy;
  std::uint64_t seed = 0;
};

// Device configuration for one sweep cell.
DeviceConfig sweep_device(const DeviceConfig& base, double write_sigma, double read_sigma);

// Each cell redeploys the net with the cell's write noise, sets the read
// noise, samples and scores KL against the ground truth. Deployment and
// sampling seeds depend only on (repeat, write index) and (repeat), so modes
// and read levels share random numbers.
NoiseSweepGrid noise_sweep(const NoiseSweepTask& task, std::span<const double> write_sigmas,
                           std::span<const double> read_sigmas, std::span<const SolverMode> modes,
                           std::size_t repeats);

}  // namespace memdiff
