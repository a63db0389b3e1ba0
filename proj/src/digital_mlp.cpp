#include "memdiff/digital_mlp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace memdiff {

DigitalMLP::DigitalMLP(std::vector<std::size_t> widths, TimeEmbedding time_embedding,
                       std::optional<ConditionEmbedding> condition_embedding, ClampRange clamp, OutputScaling scaling,
                       VPSchedule schedule)
    : widths_(std::move(widths)),
      time_(std::move(time_embedding)),
      cond_(std::move(condition_embedding)),
      clamp_(clamp),
      scaling_(scaling),
      schedule_(schedule) {
  if (widths_.size() < 2) throw std::invalid_argument("DigitalMLP: need at least one layer");
  for (std::size_t l = 1; l + 1 < widths_.size(); ++l) {
    if (widths_[l] != time_.dim())
      throw std::invalid_argument("DigitalMLP: hidden width must equal the time-embedding dimension");
    if (cond_ && widths_[l] != cond_->dim())
      throw std::invalid_argument("DigitalMLP: hidden width must equal the condition-embedding dimension");
  }
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    offsets_.push_back(off);
    off += widths_[l] * widths_[l + 1] + widths_[l + 1];
  }
  theta_.assign(off, 0.0);
}

Matrix DigitalMLP::weight_matrix(std::size_t l) const {
  Matrix w(widths_[l], widths_[l + 1]);
  std::copy_n(theta_.begin() + static_cast<std::ptrdiff_t>(weight_offset(l)), w.size(), w.data().begin());
  return w;
}

Vec DigitalMLP::bias(std::size_t l) const {
  const auto b = theta_.begin() + static_cast<std::ptrdiff_t>(bias_offset(l));
  return Vec(b, b + static_cast<std::ptrdiff_t>(widths_[l + 1]));
}

void DigitalMLP::set_layer(std::size_t l, const Matrix& w, std::span<const double> b) {
  require_dim(w.rows(), widths_[l], "set_layer rows");
  require_dim(w.cols(), widths_[l + 1], "set_layer cols");
  require_dim(b.size(), widths_[l + 1], "set_layer bias");
  std::copy(w.data().begin(), w.data().end(), theta_.begin() + static_cast<std::ptrdiff_t>(weight_offset(l)));
  std::copy(b.begin(), b.end(), theta_.begin() + static_cast<std::ptrdiff_t>(bias_offset(l)));
}

Vec DigitalMLP::hidden_injection(double t, Label label) const {
  Vec e = time_(t);
  if (cond_) {
    const Vec c = (*cond_)(label);
    for (std::size_t i = 0; i < e.size(); ++i) e[i] += c[i];
  } else if (label) {
    throw std::invalid_argument("DigitalMLP: label given to an unconditional network");
  }
  return e;
}

double DigitalMLP::output_scale(double t) const {
  if (scaling_ == OutputScaling::kNone) return 1.0;
  return 1.0 / marginal(schedule_, t).sigma;
}

void DigitalMLP::init_random(Rng& rng) {
  for (std::size_t l = 0; l < layers(); ++l) {
    const double sd = std::sqrt(2.0 / static_cast<double>(widths_[l]));
    const std::size_t n = widths_[l] * widths_[l + 1];
    for (std::size_t k = 0; k < n; ++k) theta_[weight_offset(l) + k] = sd * standard_normal(rng);
    for (std::size_t k = 0; k < widths_[l + 1]; ++k) theta_[bias_offset(l) + k] = 0.0;
  }
}

Vec DigitalMLP::forward(std::span<const double> x, double t, Label label) const {
  Cache cache;
  return forward(x, t, label, cache);
}

Vec DigitalMLP::forward(std::span<const double> x, double t, Label label, Cache& cache) const {
  require_dim(x.size(), in_dim(), "DigitalMLP::forward");
  const std::size_t L = layers();
  cache.inputs.resize(L);
  cache.raw.resize(L);
  cache.pre.resize(L);
  const Vec inject = L > 1 ? hidden_injection(t, label) : Vec{};

  Vec cur(x.begin(), x.end());
  for (std::size_t l = 0; l < L; ++l) {
    const std::size_t in = widths_[l];
    const std::size_t out = widths_[l + 1];
    cache.raw[l] = cur;
    Vec a(in);
    for (std::size_t i = 0; i < in; ++i) a[i] = std::clamp(cur[i], clamp_.lo, clamp_.hi);
    Vec z(theta_.begin() + static_cast<std::ptrdiff_t>(bias_offset(l)),
          theta_.begin() + static_cast<std::ptrdiff_t>(bias_offset(l) + out));
    const double* w = theta_.data() + weight_offset(l);
    for (std::size_t i = 0; i < in; ++i) {
      const double ai = a[i];
      for (std::size_t j = 0; j < out; ++j) z[j] += w[i * out + j] * ai;
    }
    const bool hidden = l + 1 < L;
    if (hidden)
      for (std::size_t j = 0; j < out; ++j) z[j] += inject[j];
    cache.inputs[l] = std::move(a);
    cache.pre[l] = z;
    if (hidden)
      for (double& v : z) v = std::max(0.0, v);
    cur = std::move(z);
  }
  cache.out = cur;
  cache.out_scale = output_scale(t);
  for (double& v : cur) v *= cache.out_scale;
  return cur;
}

void DigitalMLP::backward(const Cache& cache, std::span<const double> dscore, std::span<double> grad) const {
  require_dim(dscore.size(), out_dim(), "DigitalMLP::backward");
  require_dim(grad.size(), theta_.size(), "DigitalMLP::backward grad");
  const std::size_t L = layers();
  Vec dz(dscore.begin(), dscore.end());
  for (double& v : dz) v *= cache.out_scale;
  for (std::size_t l = L; l-- > 0;) {
    const std::size_t in = widths_[l];
    const std::size_t out = widths_[l + 1];
    const bool hidden = l + 1 < L;
    if (hidden)
      for (std::size_t j = 0; j < out; ++j)
        if (cache.pre[l][j] <= 0.0) dz[j] = 0.0;
    const Vec& a = cache.inputs[l];
    double* gw = grad.data() + weight_offset(l);
    double* gb = grad.data() + bias_offset(l);
    for (std::size_t j = 0; j < out; ++j) gb[j] += dz[j];
    for (std::size_t i = 0; i < in; ++i)
      for (std::size_t j = 0; j < out; ++j) gw[i * out + j] += a[i] * dz[j];
    if (l == 0) break;
    const double* w = theta_.data() + weight_offset(l);
    Vec da(in, 0.0);
    for (std::size_t i = 0; i < in; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < out; ++j) s += w[i * out + j] * dz[j];
      const double r = cache.raw[l][i];
      da[i] = (r > clamp_.lo && r < clamp_.hi) ? s : 0.0;
    }
    dz = std::move(da);
  }
}

DigitalMLP make_score_net(std::uint64_t embed_seed, std::optional<std::size_t> classes, ClampRange clamp,
                          OutputScaling scaling, const VPSchedule& schedule) {
  constexpr std::size_t kHidden = 14;
  TimeEmbedding te(kHidden, derive_seed(embed_seed, {stream::kTimeEmbedding}));
  std::optional<ConditionEmbedding> ce;
  if (classes) ce = ConditionEmbedding(*classes, kHidden, derive_seed(embed_seed, {stream::kConditionEmbedding}));
  return DigitalMLP({2, kHidden, kHidden, 2}, std::move(te), std::move(ce), clamp, scaling, schedule);
}

}  // namespace memdiff
