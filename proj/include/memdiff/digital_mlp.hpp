#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "memdiff/embedding.hpp"
#include "memdiff/matrix.hpp"
#include "memdiff/sde.hpp"

namespace memdiff {

// Closed interval applied to every layer input, in software units.
struct ClampRange {
  double lo = -2.0;
  double hi = 4.0;
};

enum class OutputScaling {
  kNone,      // score = network output
  kInvSigma,  // score = network output / sigma(t)
};

// Fully connected score network: ReLU hidden layers with the time (and
// optional condition) embedding added to every hidden pre-activation.
// Parameters are stored flat; layer l has an in x out weight block (row =
// input, matching crossbar orientation) followed by an out-length bias.
class DigitalMLP {
 public:
  struct Cache {
    std::vector<Vec> inputs;  // clamped layer inputs a_l
    std::vector<Vec> raw;     // unclamped layer inputs (for clamp masks)
    std::vector<Vec> pre;     // pre-activations z_l
    Vec out;                  // network output before output scaling
    double out_scale = 1.0;
  };

  DigitalMLP() = default;
  DigitalMLP(std::vector<std::size_t> widths, TimeEmbedding time_embedding,
             std::optional<ConditionEmbedding> condition_embedding, ClampRange clamp, OutputScaling scaling,
             VPSchedule schedule);

  const std::vector<std::size_t>& widths() const { return widths_; }
  std::size_t layers() const { return widths_.size() - 1; }
  std::size_t in_dim() const { return widths_.front(); }
  std::size_t out_dim() const { return widths_.back(); }
  const TimeEmbedding& time_embedding() const { return time_; }
  const std::optional<ConditionEmbedding>& condition_embedding() const { return cond_; }
  const ClampRange& clamp() const { return clamp_; }
  OutputScaling scaling() const { return scaling_; }
  const VPSchedule& schedule() const { return schedule_; }

  std::size_t param_count() const { return theta_.size(); }
  Vec& params() { return theta_; }
  const Vec& params() const { return theta_; }

  // Weight block of layer l as an (in x out) matrix copy, and its bias.
  Matrix weight_matrix(std::size_t l) const;
  Vec bias(std::size_t l) const;
  void set_layer(std::size_t l, const Matrix& w, std::span<const double> b);

  // Per-hidden-layer injected bias (embedding sum) at time t.
  Vec hidden_injection(double t, Label label) const;
  double output_scale(double t) const;

  // He-style random initialization.
  void init_random(Rng& rng);

  Vec forward(std::span<const double> x, double t, Label label) const;
  Vec forward(std::span<const double> x, double t, Label label, Cache& cache) const;
  // Accumulates dL/dtheta into grad given dL/dscore.
  void backward(const Cache& cache, std::span<const double> dscore, std::span<double> grad) const;

 private:
  std::size_t weight_offset(std::size_t l) const { return offsets_[l]; }
  std::size_t bias_offset(std::size_t l) const { return offsets_[l] + widths_[l] * widths_[l + 1]; }

  std::vector<std::size_t> widths_;
  std::vector<std::size_t> offsets_;
  Vec theta_;
  TimeEmbedding time_;
  std::optional<ConditionEmbedding> cond_;
  ClampRange clamp_;
  OutputScaling scaling_ = OutputScaling::kInvSigma;
  VPSchedule schedule_;
};

// Standard 2 -> 14 -> 14 -> 2 score net.
DigitalMLP make_score_net(std::uint64_t embed_seed, std::optional<std::size_t> classes, ClampRange clamp,
                          OutputScaling scaling, const VPSchedule& schedule);

}  // namespace memdiff
