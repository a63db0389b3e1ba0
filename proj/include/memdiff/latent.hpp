#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "memdiff/analog_net.hpp"
#include "memdiff/digital_mlp.hpp"
#include "memdiff/matrix.hpp"
#include "memdiff/rng.hpp"

namespace memdiff {

// Channel-major feature map (C x H x W).
struct FeatureMap {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  Vec data;

  FeatureMap() = default;
  FeatureMap(std::size_t c, std::size_t h, std::size_t w) : channels(c), height(h), width(w), data(c * h * w, 0.0) {}
  double& at(std::size_t c, std::size_t y, std::size_t x) { return data[(c * height + y) * width + x]; }
  double at(std::size_t c, std::size_t y, std::size_t x) const { return data[(c * height + y) * width + x]; }
};

// Kernel tensor K[a][b][ky][kx]. For conv2d a = output channel, b = input
// channel; deconv2d with the same tensor maps a -> b, so it is exactly the
// adjoint of conv2d.
struct Kernel {
  std::size_t a = 0;
  std::size_t b = 0;
  std::size_t size = 0;
  Vec data;

  Kernel() = default;
  Kernel(std::size_t a_, std::size_t b_, std::size_t k) : a(a_), b(b_), size(k), data(a_ * b_ * k * k, 0.0) {}
  double& at(std::size_t i, std::size_t j, std::size_t y, std::size_t x) { return data[((i * b + j) * size + y) * size + x]; }
  double at(std::size_t i, std::size_t j, std::size_t y, std::size_t x) const {
    return data[((i * b + j) * size + y) * size + x];
  }
};

std::size_t conv_out_size(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad);
std::size_t deconv_out_size(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad);

FeatureMap conv2d(const FeatureMap& x, const Kernel& k, std::size_t stride, std::size_t pad);
// Transposed convolution; output spatial size (in - 1) * stride - 2 * pad + kernel.
FeatureMap deconv2d(const FeatureMap& x, const Kernel& k, std::size_t stride, std::size_t pad);
// Kernel gradients: conv2d output = sum over K, so dK for conv2d(x) with
// upstream dy, and for deconv2d(x) with upstream dy.
void conv2d_kernel_grad(const FeatureMap& x, const FeatureMap& dy, std::size_t stride, std::size_t pad, Kernel& dk);
void deconv2d_kernel_grad(const FeatureMap& x, const FeatureMap& dy, std::size_t stride, std::size_t pad, Kernel& dk);

// Unrolled (in_size x out_size) matrix M with deconv2d(x) = M^T x, for
// execution on a crossbar.
Matrix deconv_matrix(const Kernel& k, std::size_t in_h, std::size_t in_w, std::size_t stride, std::size_t pad);

struct LatentSpec {
  std::size_t dim = 2;
  std::vector<Vec> centers;

  std::size_t classes() const { return centers.size(); }
  void validate() const;
};

// Centers at the given radius and angles 90, 210, 330 degrees.
LatentSpec default_latent_spec(double radius = 1.0);

// Layer shapes shared by encoder and decoder.
struct VaeShape {
  std::size_t image = 12;
  std::size_t latent = 2;
  std::size_t seed_channels = 8;
  std::size_t seed_size = 3;
  std::size_t mid_channels = 4;
  std::size_t k1 = 3, s1 = 2, p1 = 0;  // seed (3x3) <-> mid (7x7)
  std::size_t k2 = 4, s2 = 2, p2 = 2;  // mid (7x7) <-> image (12x12)

  std::size_t mid_size() const { return deconv_out_size(seed_size, k1, s1, p1); }
  std::size_t seed_len() const { return seed_channels * seed_size * seed_size; }
  void validate() const;
};

struct Gaussian2 {
  Vec mu;
  Vec sigma;
};

// conv(1->mid, k2/s2/p2) -> ReLU -> conv(mid->seed, k1/s1/p1) -> ReLU -> linear -> (mu, log sigma^2).
class VaeEncoder {
 public:
  struct Cache {
    FeatureMap input, h1, a1, h2, a2;
    Vec out;
  };

  VaeEncoder() = default;
  explicit VaeEncoder(VaeShape shape);

  const VaeShape& shape() const { return shape_; }
  Kernel conv1, conv2;
  Vec b1, b2;
  Matrix lin_w;  // seed_len x (2 * latent)
  Vec lin_b;

  void init_random(Rng& rng);
  Gaussian2 encode(std::span<const double> image) const;
  // Returns (mu, log sigma^2) concatenated.
  Vec forward(std::span<const double> image, Cache& cache) const;
  void backward(const Cache& cache, std::span<const double> dout, VaeEncoder& grad) const;

  // Flat parameter access for optimizers and gradient checks.
  std::vector<double*> param_ptrs();
  void zero();

 private:
  VaeShape shape_;
};

// linear -> reshape -> deconv1 -> ReLU -> deconv2 -> tanh. Every layer input
// is clamped to the analog input range.
class VaeDecoder {
 public:
  struct Cache {
    Vec z_raw, z;
    Vec lin_out;              // pre-clamp seed map
    FeatureMap seed;          // clamped seed map
    FeatureMap mid_pre;       // deconv1 output + bias
    FeatureMap mid;           // clamped ReLU
    FeatureMap out_pre;       // deconv2 output + bias
  };

  VaeDecoder() = default;
  VaeDecoder(VaeShape shape, ClampRange clamp);

  const VaeShape& shape() const { return shape_; }
  const ClampRange& clamp() const { return clamp_; }
  Matrix lin_w;  // latent x seed_len
  Vec lin_b;
  Kernel dc1, dc2;
  Vec b1, b2;

  void init_random(Rng& rng);
  Vec decode(std::span<const double> z) const;
  Vec forward(std::span<const double> z, Cache& cache) const;
  // Accumulates parameter gradients into grad; returns dL/dz.
  Vec backward(const Cache& cache, std::span<const double> dimage, VaeDecoder& grad) const;

  // Dense (in x out) weight blocks and per-output biases of the three stages.
  Matrix stage_matrix(std::size_t stage) const;
  Vec stage_bias(std::size_t stage) const;

  std::vector<double*> param_ptrs();
  void zero();

 private:
  VaeShape shape_;
  ClampRange clamp_;
};

Vec reparameterize(std::span<const double> mu, std::span<const double> sigma, Rng& rng);

// Per-dimension KL(N(mu, sigma^2) || N(center, 1)) summed over dimensions.
double latent_kl(std::span<const double> mu, std::span<const double> sigma, std::span<const double> center);

// Decoder deployed on its own crossbars.
struct AnalogDecoder {
  std::vector<AnalogLayer> stages;
  ClampConfig clamp;
  double unit_volt = 0.1;
};

AnalogDecoder deploy_decoder(const VaeDecoder& dec, const DeviceConfig& cfg, Rng& rng, const DeployOptions& opts = {});
Vec decode_analog(const AnalogDecoder& dec, std::span<const double> z, Rng& rng);

}  // namespace memdiff
