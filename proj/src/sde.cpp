#include "memdiff/sde.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace memdiff {

namespace {

void check_time(const VPSchedule& s, double t) {
  // Allow rounding slack from lab-time to algorithm-time conversion.
  const double slack = 1e-12 * s.T;
  if (!(t >= -slack && t <= s.T + slack))
    throw std::domain_error("VP schedule: t=" + std::to_string(t) + " outside [0, T]");
}

Vec score_for(const ScoreFn& fn, std::span<const double> x, double t, Label label, const GuidanceConfig& g,
              Rng& rng) {
  if (label) return cfg_score(fn, x, t, *label, g, rng);
  return fn(x, t, std::nullopt, rng);
}

}  // namespace

void VPSchedule::validate() const {
  if (!(beta0 > 0.0 && beta0 < beta1)) throw std::invalid_argument("VP schedule: require 0 < beta0 < beta1");
  if (!(T > 0.0)) throw std::invalid_argument("VP schedule: require T > 0");
}

double beta(const VPSchedule& s, double t) {
  check_time(s, t);
  return s.beta0 + (s.beta1 - s.beta0) * t / s.T;
}

double integrated_beta(const VPSchedule& s, double t) {
  check_time(s, t);
  return s.beta0 * t + (s.beta1 - s.beta0) * t * t / (2.0 * s.T);
}

Vec drift(const VPSchedule& s, std::span<const double> x, double t) {
  const double b = beta(s, t);
  Vec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = -0.5 * b * x[i];
  return out;
}

double diffusion(const VPSchedule& s, double t) { return std::sqrt(beta(s, t)); }

Marginal marginal(const VPSchedule& s, double t) {
  const double b = integrated_beta(s, t);
  return {std::exp(-0.5 * b), std::sqrt(-std::expm1(-b))};
}

Vec cfg_score(const ScoreFn& fn, std::span<const double> x, double t, int label, const GuidanceConfig& g, Rng& rng) {
  Vec cond = fn(x, t, label, rng);
  if (g.lambda == 0.0) return cond;
  const Vec uncond = fn(x, t, std::nullopt, rng);
  require_dim(uncond.size(), cond.size(), "cfg_score");
  for (std::size_t i = 0; i < cond.size(); ++i) cond[i] = (1.0 + g.lambda) * cond[i] - g.lambda * uncond[i];
  return cond;
}

Vec f_ode(const ScoreFn& fn, const VPSchedule& s, std::span<const double> x, double t, Label label,
          const GuidanceConfig& g, Rng& rng) {
  const double b = beta(s, t);
  const Vec sc = score_for(fn, x, t, label, g, rng);
  require_dim(sc.size(), x.size(), "f_ode");
  Vec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = -0.5 * b * x[i] - 0.5 * b * sc[i];
  return out;
}

Vec f_sde_det(const ScoreFn& fn, const VPSchedule& s, std::span<const double> x, double t, Label label,
              const GuidanceConfig& g, Rng& rng) {
  const double b = beta(s, t);
  const Vec sc = score_for(fn, x, t, label, g, rng);
  require_dim(sc.size(), x.size(), "f_sde_det");
  Vec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = -0.5 * b * x[i] - b * sc[i];
  return out;
}

}  // namespace memdiff
