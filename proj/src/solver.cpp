#include "memdiff/solver.hpp"

#include <algorithm>
#include <cmath>

#ifdef MEMDIFF_HAVE_OPENMP
#include <omp.h>
#endif

namespace memdiff {

void SolverConfig::validate() const {
  if (!(dt_lab > 0.0)) throw std::invalid_argument("solver: dt_lab must be > 0");
  if (!(lab_duration > 0.0)) throw std::invalid_argument("solver: lab_duration must be > 0");
  const double n = lab_duration / dt_lab;
  if (std::abs(n - std::round(n)) > 1e-9 * std::max(1.0, n))
    throw std::invalid_argument("solver: lab_duration / dt_lab must be integral");
  if (record_stride == 0) throw std::invalid_argument("solver: record_stride must be >= 1");
  if (mode == SolverMode::kSde && method != SolverMethod::kEulerMaruyama)
    throw std::invalid_argument("solver: sde mode requires euler_maruyama");
  if (mode == SolverMode::kOde && method == SolverMethod::kEulerMaruyama)
    throw std::invalid_argument("solver: ode mode requires euler or rk4");
  if (!(t_min > 0.0)) throw std::invalid_argument("solver: t_min must be > 0");
}

std::size_t SolverConfig::steps() const { return static_cast<std::size_t>(std::llround(lab_duration / dt_lab)); }

double SolverConfig::algorithm_time(std::size_t k, const VPSchedule& sched) const {
  const double tau = static_cast<double>(k) / static_cast<double>(steps());
  return std::max(sched.T * (1.0 - tau), t_min);
}

Vec sample_initial(std::size_t n, Rng& rng) {
  if (n == 0) throw std::invalid_argument("sample_initial: n must be >= 1");
  Vec x(n);
  for (double& v : x) v = standard_normal(rng);
  return x;
}

namespace {

void check_finite(const Vec& x, std::size_t step) {
  for (double v : x)
    if (!std::isfinite(v))
      throw DivergenceError("solver: non-finite state at step " + std::to_string(step), step);
}

void axpy(Vec& y, double a, const Vec& x) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

}  // namespace

Trajectory integrate(const ScoreFn& score, const VPSchedule& sched, const SolverConfig& cfg,
                     std::span<const double> x_init, Label label, const GuidanceConfig& guidance, Rng& rng) {
  cfg.validate();
  Vec x(x_init.begin(), x_init.end());
  check_finite(x, 0);
  const std::size_t n_steps = cfg.steps();

  Trajectory traj;
  traj.label = label;
  auto record = [&](std::size_t k, double t) {
    traj.times.push_back(cfg.lab_duration * static_cast<double>(k) / static_cast<double>(n_steps));
    traj.t_alg.push_back(t);
    traj.states.push_back(x);
  };
  record(0, cfg.algorithm_time(0, sched));

  Vec tmp(x.size());
  for (std::size_t k = 0; k < n_steps; ++k) {
    const double t0 = cfg.algorithm_time(k, sched);
    const double t1 = cfg.algorithm_time(k + 1, sched);
    const double h = t1 - t0;  // <= 0: reverse time
    if (h != 0.0) {
      switch (cfg.method) {
        case SolverMethod::kEuler: {
          axpy(x, h, f_ode(score, sched, x, t0, label, guidance, rng));
          break;
        }
        case SolverMethod::kRk4: {
          const double tm = t0 + 0.5 * h;
          const Vec k1 = f_ode(score, sched, x, t0, label, guidance, rng);
          tmp = x;
          axpy(tmp, 0.5 * h, k1);
          const Vec k2 = f_ode(score, sched, tmp, tm, label, guidance, rng);
          tmp = x;
          axpy(tmp, 0.5 * h, k2);
          const Vec k3 = f_ode(score, sched, tmp, tm, label, guidance, rng);
          tmp = x;
          axpy(tmp, h, k3);
          const Vec k4 = f_ode(score, sched, tmp, t1, label, guidance, rng);
          for (std::size_t i = 0; i < x.size(); ++i) x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
          break;
        }
        case SolverMethod::kEulerMaruyama: {
          const Vec f = f_sde_det(score, sched, x, t0, label, guidance, rng);
          const double noise = diffusion(sched, t0) * std::sqrt(-h);
          for (std::size_t i = 0; i < x.size(); ++i) x[i] += f[i] * h + noise * standard_normal(rng);
          break;
        }
      }
      check_finite(x, k + 1);
    }
    if ((k + 1) % cfg.record_stride == 0 || k + 1 == n_steps) record(k + 1, t1);
  }
  traj.final = x;
  return traj;
}

Rng sample_stream(const SolverConfig& cfg, std::size_t index) {
  return make_rng(cfg.seed, {stream::kSample, static_cast<std::uint64_t>(index)});
}

namespace {

Trajectory run_one(const ScoreFn& score, const VPSchedule& sched, const SolverConfig& cfg, const BatchRequest& req,
                   std::size_t i) {
  Rng rng = sample_stream(cfg, i);
  const Vec x0 = req.x_init ? *req.x_init : sample_initial(req.dim, rng);
  return integrate(score, sched, cfg, x0, req.label, req.guidance, rng);
}

template <typename Out, typename Fn>
std::vector<Out> run_batch(const BatchRequest& req, bool parallel, Fn&& fn) {
  if (req.count == 0) throw std::invalid_argument("batch_sample: count must be >= 1");
  std::vector<Out> out(req.count);
  std::vector<std::string> errors(req.count);
  const auto n = static_cast<std::ptrdiff_t>(req.count);
#ifdef MEMDIFF_HAVE_OPENMP
#pragma omp parallel for schedule(dynamic, 4) if (parallel)
#endif
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      out[static_cast<std::size_t>(i)] = fn(static_cast<std::size_t>(i));
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(i)] = e.what();
    }
  }
  (void)parallel;
  std::vector<std::pair<std::size_t, std::string>> failures;
  for (std::size_t i = 0; i < req.count; ++i)
    if (!errors[i].empty()) failures.emplace_back(i, errors[i]);
  if (!failures.empty()) {
    const std::string msg = "batch_sample: " + std::to_string(failures.size()) + " of " +
                            std::to_string(req.count) + " samples failed; first (sample " +
                            std::to_string(failures.front().first) + "): " + failures.front().second;
    throw BatchFailure(msg, std::move(failures));
  }
  return out;
}

}  // namespace

std::vector<Vec> batch_sample(const ScoreFn& score, const VPSchedule& sched, const SolverConfig& cfg,
                              const BatchRequest& req) {
  cfg.validate();
  return run_batch<Vec>(req, true, [&](std::size_t i) { return run_one(score, sched, cfg, req, i).final; });
}

std::vector<Vec> batch_sample_serial(const ScoreFn& score, const VPSchedule& sched, const SolverConfig& cfg,
                                     const BatchRequest& req) {
  cfg.validate();
  return run_batch<Vec>(req, false, [&](std::size_t i) { return run_one(score, sched, cfg, req, i).final; });
}

std::vector<Trajectory> batch_trajectories(const ScoreFn& score, const VPSchedule& sched, const SolverConfig& cfg,
                                           const BatchRequest& req) {
  cfg.validate();
  return run_batch<Trajectory>(req, true, [&](std::size_t i) { return run_one(score, sched, cfg, req, i); });
}

const char* to_string(SolverMode m) { return m == SolverMode::kOde ? "ode" : "sde"; }

const char* to_string(SolverMethod m) {
  switch (m) {
    case SolverMethod::kEuler:
      return "euler";
    case SolverMethod::kRk4:
      return "rk4";
    case SolverMethod::kEulerMaruyama:
      return "euler_maruyama";
  }
  return "?";
}

SolverMode parse_solver_mode(const std::string& s) {
  if (s == "ode") return SolverMode::kOde;
  if (s == "sde") return SolverMode::kSde;
  throw std::invalid_argument("unknown solver mode '" + s + "' (expected ode|sde)");
}

SolverMethod parse_solver_method(const std::string& s) {
  if (s == "euler") return SolverMethod::kEuler;
  if (s == "rk4") return SolverMethod::kRk4;
  if (s == "euler_maruyama") return SolverMethod::kEulerMaruyama;
  throw std::invalid_argument("unknown solver method '" + s + "' (expected euler|rk4|euler_maruyama)");
}

}  // namespace memdiff
