#pragma once

#include <functional>
#include <optional>
#include <span>

#include "memdiff/matrix.hpp"
#include "memdiff/rng.hpp"

namespace memdiff {

// Variance-preserving schedule with linear beta(t) on [0, T].
struct VPSchedule {
  double beta0 = 0.001;
  double beta1 = 0.5;
  double T = 1.0;

  void validate() const;
};

struct GuidanceConfig {
  double lambda = 0.5;
};

struct Marginal {
  double m = 1.0;      // mean coefficient, x_t = m x0 + sigma eps
  double sigma = 0.0;  // standard deviation
};

// Score evaluator s(x, t, label). Analog back ends draw read noise from rng.
using Label = std::optional<int>;
using ScoreFn = std::function<Vec(std::span<const double> x, double t, Label label, Rng& rng)>;

double beta(const VPSchedule& s, double t);
// Integral of beta from 0 to t.
double integrated_beta(const VPSchedule& s, double t);
Vec drift(const VPSchedule& s, std::span<const double> x, double t);
double diffusion(const VPSchedule& s, double t);
Marginal marginal(const VPSchedule& s, double t);

// (1 + lambda) s(x, t, label) - lambda s(x, t, null)
Vec cfg_score(const ScoreFn& fn, std::span<const double> x, double t, int label, const GuidanceConfig& g, Rng& rng);

// Probability-flow right-hand side f(x, t) - 1/2 g^2(t) s.
Vec f_ode(const ScoreFn& fn, const VPSchedule& s, std::span<const double> x, double t, Label label,
          const GuidanceConfig& g, Rng& rng);
// Deterministic part of the reverse SDE, f(x, t) - g^2(t) s.
Vec f_sde_det(const ScoreFn& fn, const VPSchedule& s, std::span<const double> x, double t, Label label,
              const GuidanceConfig& g, Rng& rng);

}  // namespace memdiff
