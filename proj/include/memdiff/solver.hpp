#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "memdiff/matrix.hpp"
#include "memdiff/rng.hpp"
#include "memdiff/sde.hpp"

namespace memdiff {

enum class SolverMode { kOde, kSde };
enum class SolverMethod { kEuler, kRk4, kEulerMaruyama };

struct SolverConfig {
  SolverMode mode = SolverMode::kOde;
  SolverMethod method = SolverMethod::kEuler;
  double dt_lab = 1e-3;        // s
  double lab_duration = 1.0;   // s
  std::size_t record_stride = 1;
  std::uint64_t seed = 0;
  double t_min = 1e-3;         // algorithm time at which reverse integration stops

  void validate() const;
  std::size_t steps() const;
  // Algorithm time at lab step k (0..steps()).
  double algorithm_time(std::size_t k, const VPSchedule& sched) const;
};

struct Trajectory {
  std::vector<double> times;    // lab time, s
  std::vector<double> t_alg;    // algorithm time at each record
  std::vector<Vec> states;      // software units
  Label label;
  Vec final;
};

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& msg, std::size_t step) : std::runtime_error(msg), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

class BatchFailure : public std::runtime_error {
 public:
  BatchFailure(const std::string& msg, std::vector<std::pair<std::size_t, std::string>> failures)
      : std::runtime_error(msg), failures_(std::move(failures)) {}
  const std::vector<std::pair<std::size_t, std::string>>& failures() const { return failures_; }

 private:
  std::vector<std::pair<std::size_t, std::string>> failures_;
};

Vec sample_initial(std::size_t n, Rng& rng);

// Reverse-time integration from algorithm time T (lab time 0) down to t_min
// (lab time lab_duration). rng supplies SDE increments and any read noise
// drawn by the score function.
Trajectory integrate(const ScoreFn& score, const VPSchedule& sched, const SolverConfig& cfg, std::span<const double> x_init,
                     Label label, const GuidanceConfig& guidance, Rng& rng);

struct BatchRequest {
  std::size_t count = 1;
  std::size_t dim = 2;
  Label label;
  GuidanceConfig guidance;
  // Overrides the N(0, I) draw for every sample when set.
  std::optional<Vec> x_init;
};

// Sample i uses the stream derive_seed(cfg.seed, {stream::kSample, i}) for its
// initial state and all subsequent noise, so results do not depend on
// scheduling. The parallel path uses OpenMP when available.
std::vector<Vec> batch_sample(const ScoreFn& score, const VPSchedule& sched, const SolverConfig& cfg,
                              const BatchRequest& req);
std::vector<Trajectory> batch_trajectories(const ScoreFn& score, const VPSchedule& sched, const SolverConfig& cfg,
                                           const BatchRequest& req);
// Serial reference for batch_sample.
std::vector<Vec> batch_sample_serial(const ScoreFn& score, const VPSchedule& sched, const SolverConfig& cfg,
                                     const BatchRequest& req);

Rng sample_stream(const SolverConfig& cfg, std::size_t index);

const char* to_string(SolverMode m);
const char* to_string(SolverMethod m);
SolverMode parse_solver_mode(const std::string& s);
SolverMethod parse_solver_method(const std::string& s);

}  // namespace memdiff
