#include "memdiff/latent.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace memdiff {

std::size_t conv_out_size(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad) {
  if (stride == 0 || in + 2 * pad < kernel) throw std::invalid_argument("conv2d: invalid shape arithmetic");
  return (in + 2 * pad - kernel) / stride + 1;
}

std::size_t deconv_out_size(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad) {
  if (stride == 0 || in == 0) throw std::invalid_argument("deconv2d: invalid shape arithmetic");
  const std::size_t full = (in - 1) * stride + kernel;
  if (full <= 2 * pad) throw std::invalid_argument("deconv2d: padding consumes the whole output");
  return full - 2 * pad;
}

namespace {

// Index of the input pixel touched by output o and kernel tap k, or -1.
inline std::ptrdiff_t tap(std::size_t o, std::size_t k, std::size_t stride, std::size_t pad, std::size_t extent) {
  const auto i = static_cast<std::ptrdiff_t>(o * stride + k) - static_cast<std::ptrdiff_t>(pad);
  return (i >= 0 && i < static_cast<std::ptrdiff_t>(extent)) ? i : -1;
}

FeatureMap deconv2d_sized(const FeatureMap& x, const Kernel& k, std::size_t stride, std::size_t pad, std::size_t out_h,
                          std::size_t out_w) {
  require_dim(x.channels, k.a, "deconv2d channels");
  FeatureMap y(k.b, out_h, out_w);
  for (std::size_t a = 0; a < k.a; ++a)
    for (std::size_t oy = 0; oy < x.height; ++oy)
      for (std::size_t ox = 0; ox < x.width; ++ox) {
        const double v = x.at(a, oy, ox);
        if (v == 0.0) continue;
        for (std::size_t b = 0; b < k.b; ++b)
          for (std::size_t ky = 0; ky < k.size; ++ky) {
            const auto iy = tap(oy, ky, stride, pad, out_h);
            if (iy < 0) continue;
            for (std::size_t kx = 0; kx < k.size; ++kx) {
              const auto ix = tap(ox, kx, stride, pad, out_w);
              if (ix < 0) continue;
              y.at(b, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix)) += v * k.at(a, b, ky, kx);
            }
          }
      }
  return y;
}

}  // namespace

FeatureMap conv2d(const FeatureMap& x, const Kernel& k, std::size_t stride, std::size_t pad) {
  require_dim(x.channels, k.b, "conv2d channels");
  const std::size_t oh = conv_out_size(x.height, k.size, stride, pad);
  const std::size_t ow = conv_out_size(x.width, k.size, stride, pad);
  FeatureMap y(k.a, oh, ow);
  for (std::size_t a = 0; a < k.a; ++a)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox) {
        double s = 0.0;
        for (std::size_t b = 0; b < k.b; ++b)
          for (std::size_t ky = 0; ky < k.size; ++ky) {
            const auto iy = tap(oy, ky, stride, pad, x.height);
            if (iy < 0) continue;
            for (std::size_t kx = 0; kx < k.size; ++kx) {
              const auto ix = tap(ox, kx, stride, pad, x.width);
              if (ix < 0) continue;
              s += k.at(a, b, ky, kx) * x.at(b, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
            }
          }
        y.at(a, oy, ox) = s;
      }
  return y;
}

FeatureMap deconv2d(const FeatureMap& x, const Kernel& k, std::size_t stride, std::size_t pad) {
  return deconv2d_sized(x, k, stride, pad, deconv_out_size(x.height, k.size, stride, pad),
                        deconv_out_size(x.width, k.size, stride, pad));
}

void conv2d_kernel_grad(const FeatureMap& x, const FeatureMap& dy, std::size_t stride, std::size_t pad, Kernel& dk) {
  for (std::size_t a = 0; a < dk.a; ++a)
    for (std::size_t oy = 0; oy < dy.height; ++oy)
      for (std::size_t ox = 0; ox < dy.width; ++ox) {
        const double g = dy.at(a, oy, ox);
        if (g == 0.0) continue;
        for (std::size_t b = 0; b < dk.b; ++b)
          for (std::size_t ky = 0; ky < dk.size; ++ky) {
            const auto iy = tap(oy, ky, stride, pad, x.height);
            if (iy < 0) continue;
            for (std::size_t kx = 0; kx < dk.size; ++kx) {
              const auto ix = tap(ox, kx, stride, pad, x.width);
              if (ix < 0) continue;
              dk.at(a, b, ky, kx) += g * x.at(b, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
            }
          }
      }
}

void deconv2d_kernel_grad(const FeatureMap& x, const FeatureMap& dy, std::size_t stride, std::size_t pad, Kernel& dk) {
  // deconv2d(x) is conv2d's adjoint, so the roles of input and output swap.
  conv2d_kernel_grad(dy, x, stride, pad, dk);
}

Matrix deconv_matrix(const Kernel& k, std::size_t in_h, std::size_t in_w, std::size_t stride, std::size_t pad) {
  const std::size_t oh = deconv_out_size(in_h, k.size, stride, pad);
  const std::size_t ow = deconv_out_size(in_w, k.size, stride, pad);
  Matrix m(k.a * in_h * in_w, k.b * oh * ow);
  for (std::size_t a = 0; a < k.a; ++a)
    for (std::size_t oy = 0; oy < in_h; ++oy)
      for (std::size_t ox = 0; ox < in_w; ++ox) {
        const std::size_t row = (a * in_h + oy) * in_w + ox;
        for (std::size_t b = 0; b < k.b; ++b)
          for (std::size_t ky = 0; ky < k.size; ++ky) {
            const auto iy = tap(oy, ky, stride, pad, oh);
            if (iy < 0) continue;
            for (std::size_t kx = 0; kx < k.size; ++kx) {
              const auto ix = tap(ox, kx, stride, pad, ow);
              if (ix < 0) continue;
              const std::size_t col = (b * oh + static_cast<std::size_t>(iy)) * ow + static_cast<std::size_t>(ix);
              m(row, col) += k.at(a, b, ky, kx);
            }
          }
      }
  return m;
}

void LatentSpec::validate() const {
  if (centers.empty()) throw std::invalid_argument("latent: no class centers");
  for (const Vec& c : centers) require_dim(c.size(), dim, "latent center");
  for (std::size_t i = 0; i < centers.size(); ++i)
    for (std::size_t j = i + 1; j < centers.size(); ++j) {
      double d2 = 0.0;
      for (std::size_t k = 0; k < dim; ++k) d2 += (centers[i][k] - centers[j][k]) * (centers[i][k] - centers[j][k]);
      if (!(std::sqrt(d2) > 1.0)) throw std::invalid_argument("latent: centers must be pairwise more than 1.0 apart");
    }
}

LatentSpec default_latent_spec(double radius) {
  LatentSpec s;
  for (double deg : {90.0, 210.0, 330.0}) {
    const double a = deg * std::numbers::pi / 180.0;
    s.centers.push_back({radius * std::cos(a), radius * std::sin(a)});
  }
  return s;
}

void VaeShape::validate() const {
  if (mid_size() == 0 || deconv_out_size(mid_size(), k2, s2, p2) != image)
    throw std::invalid_argument("vae: decoder shapes do not produce a " + std::to_string(image) + "x" +
                                std::to_string(image) + " image");
  if (conv_out_size(image, k2, s2, p2) != mid_size() || conv_out_size(mid_size(), k1, s1, p1) != seed_size)
    throw std::invalid_argument("vae: encoder shapes do not mirror the decoder");
}

namespace {

void fill_normal(std::span<double> v, double sd, Rng& rng) {
  for (double& x : v) x = sd * standard_normal(rng);
}

}  // namespace

// ---- encoder ----

VaeEncoder::VaeEncoder(VaeShape shape) : shape_(shape) {
  shape_.validate();
  conv1 = Kernel(shape_.mid_channels, 1, shape_.k2);
  conv2 = Kernel(shape_.seed_channels, shape_.mid_channels, shape_.k1);
  b1.assign(shape_.mid_channels, 0.0);
  b2.assign(shape_.seed_channels, 0.0);
  lin_w = Matrix(shape_.seed_len(), 2 * shape_.latent);
  lin_b.assign(2 * shape_.latent, 0.0);
}

void VaeEncoder::init_random(Rng& rng) {
  fill_normal(conv1.data, std::sqrt(2.0 / static_cast<double>(shape_.k2 * shape_.k2)), rng);
  fill_normal(conv2.data, std::sqrt(2.0 / static_cast<double>(shape_.mid_channels * shape_.k1 * shape_.k1)), rng);
  fill_normal(lin_w.data(), std::sqrt(1.0 / static_cast<double>(shape_.seed_len())), rng);
  std::fill(b1.begin(), b1.end(), 0.0);
  std::fill(b2.begin(), b2.end(), 0.0);
  std::fill(lin_b.begin(), lin_b.end(), 0.0);
}

Vec VaeEncoder::forward(std::span<const double> image, Cache& c) const {
  require_dim(image.size(), shape_.image * shape_.image, "encode");
  c.input = FeatureMap(1, shape_.image, shape_.image);
  std::copy(image.begin(), image.end(), c.input.data.begin());
  c.h1 = conv2d(c.input, conv1, shape_.s2, shape_.p2);
  const std::size_t hw1 = c.h1.height * c.h1.width;
  for (std::size_t ch = 0; ch < c.h1.channels; ++ch)
    for (std::size_t i = 0; i < hw1; ++i) c.h1.data[ch * hw1 + i] += b1[ch];
  c.a1 = c.h1;
  for (double& v : c.a1.data) v = std::max(0.0, v);
  c.h2 = conv2d(c.a1, conv2, shape_.s1, shape_.p1);
  const std::size_t hw2 = c.h2.height * c.h2.width;
  for (std::size_t ch = 0; ch < c.h2.channels; ++ch)
    for (std::size_t i = 0; i < hw2; ++i) c.h2.data[ch * hw2 + i] += b2[ch];
  c.a2 = c.h2;
  for (double& v : c.a2.data) v = std::max(0.0, v);
  c.out = lin_b;
  for (std::size_t i = 0; i < lin_w.rows(); ++i) {
    const double a = c.a2.data[i];
    if (a == 0.0) continue;
    for (std::size_t j = 0; j < lin_w.cols(); ++j) c.out[j] += lin_w(i, j) * a;
  }
  return c.out;
}

Gaussian2 VaeEncoder::encode(std::span<const double> image) const {
  Cache c;
  const Vec out = forward(image, c);
  Gaussian2 g;
  g.mu.assign(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(shape_.latent));
  g.sigma.resize(shape_.latent);
  for (std::size_t i = 0; i < shape_.latent; ++i) g.sigma[i] = std::exp(0.5 * out[shape_.latent + i]);
  return g;
}

void VaeEncoder::backward(const Cache& c, std::span<const double> dout, VaeEncoder& g) const {
  require_dim(dout.size(), lin_w.cols(), "encoder backward");
  for (std::size_t j = 0; j < dout.size(); ++j) g.lin_b[j] += dout[j];
  FeatureMap da2(c.a2.channels, c.a2.height, c.a2.width);
  for (std::size_t i = 0; i < lin_w.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < lin_w.cols(); ++j) {
      g.lin_w(i, j) += c.a2.data[i] * dout[j];
      s += lin_w(i, j) * dout[j];
    }
    da2.data[i] = c.h2.data[i] > 0.0 ? s : 0.0;
  }
  const std::size_t hw2 = da2.height * da2.width;
  for (std::size_t ch = 0; ch < da2.channels; ++ch)
    for (std::size_t i = 0; i < hw2; ++i) g.b2[ch] += da2.data[ch * hw2 + i];
  conv2d_kernel_grad(c.a1, da2, shape_.s1, shape_.p1, g.conv2);
  FeatureMap da1 = deconv2d_sized(da2, conv2, shape_.s1, shape_.p1, c.a1.height, c.a1.width);
  for (std::size_t i = 0; i < da1.data.size(); ++i)
    if (c.h1.data[i] <= 0.0) da1.data[i] = 0.0;
  const std::size_t hw1 = da1.height * da1.width;
  for (std::size_t ch = 0; ch < da1.channels; ++ch)
    for (std::size_t i = 0; i < hw1; ++i) g.b1[ch] += da1.data[ch * hw1 + i];
  conv2d_kernel_grad(c.input, da1, shape_.s2, shape_.p2, g.conv1);
}

std::vector<double*> VaeEncoder::param_ptrs() {
  std::vector<double*> p;
  for (Vec* v : {&conv1.data, &conv2.data, &b1, &b2, &lin_w.data(), &lin_b})
    for (double& x : *v) p.push_back(&x);
  return p;
}

void VaeEncoder::zero() {
  for (double* p : param_ptrs()) *p = 0.0;
}

// ---- decoder ----

VaeDecoder::VaeDecoder(VaeShape shape, ClampRange clamp) : shape_(shape), clamp_(clamp) {
  shape_.validate();
  lin_w = Matrix(shape_.latent, shape_.seed_len());
  lin_b.assign(shape_.seed_len(), 0.0);
  dc1 = Kernel(shape_.seed_channels, shape_.mid_channels, shape_.k1);
  dc2 = Kernel(shape_.mid_channels, 1, shape_.k2);
  b1.assign(shape_.mid_channels, 0.0);
  b2.assign(1, 0.0);
}

void VaeDecoder::init_random(Rng& rng) {
  fill_normal(lin_w.data(), std::sqrt(1.0 / static_cast<double>(shape_.latent)), rng);
  fill_normal(dc1.data, std::sqrt(2.0 / static_cast<double>(shape_.seed_channels * shape_.k1 * shape_.k1)), rng);
  fill_normal(dc2.data, std::sqrt(2.0 / static_cast<double>(shape_.mid_channels * shape_.k2 * shape_.k2)), rng);
  std::fill(lin_b.begin(), lin_b.end(), 0.0);
  std::fill(b1.begin(), b1.end(), 0.0);
  std::fill(b2.begin(), b2.end(), 0.0);
}

Vec VaeDecoder::forward(std::span<const double> z, Cache& c) const {
  require_dim(z.size(), shape_.latent, "decode");
  auto cl = [this](double v) { return std::min(std::max(v, clamp_.lo), clamp_.hi); };
  c.z_raw.assign(z.begin(), z.end());
  c.z = c.z_raw;
  for (double& v : c.z) v = cl(v);
  c.lin_out = lin_b;
  for (std::size_t i = 0; i < shape_.latent; ++i)
    for (std::size_t j = 0; j < c.lin_out.size(); ++j) c.lin_out[j] += lin_w(i, j) * c.z[i];
  c.seed = FeatureMap(shape_.seed_channels, shape_.seed_size, shape_.seed_size);
  for (std::size_t j = 0; j < c.lin_out.size(); ++j) c.seed.data[j] = cl(c.lin_out[j]);
  c.mid_pre = deconv2d(c.seed, dc1, shape_.s1, shape_.p1);
  const std::size_t hw1 = c.mid_pre.height * c.mid_pre.width;
  for (std::size_t ch = 0; ch < c.mid_pre.channels; ++ch)
    for (std::size_t i = 0; i < hw1; ++i) c.mid_pre.data[ch * hw1 + i] += b1[ch];
  c.mid = c.mid_pre;
  for (double& v : c.mid.data) v = cl(std::max(0.0, v));
  c.out_pre = deconv2d(c.mid, dc2, shape_.s2, shape_.p2);
  for (double& v : c.out_pre.data) v += b2[0];
  Vec img(c.out_pre.data.size());
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = std::tanh(c.out_pre.data[i]);
  return img;
}

Vec VaeDecoder::decode(std::span<const double> z) const {
  Cache c;
  return forward(z, c);
}

Vec VaeDecoder::backward(const Cache& c, std::span<const double> dimage, VaeDecoder& g) const {
  require_dim(dimage.size(), c.out_pre.data.size(), "decoder backward");
  auto inside = [this](double v) { return v > clamp_.lo && v < clamp_.hi; };
  FeatureMap dout(c.out_pre.channels, c.out_pre.height, c.out_pre.width);
  for (std::size_t i = 0; i < dimage.size(); ++i) {
    const double th = std::tanh(c.out_pre.data[i]);
    dout.data[i] = dimage[i] * (1.0 - th * th);
    g.b2[0] += dout.data[i];
  }
  deconv2d_kernel_grad(c.mid, dout, shape_.s2, shape_.p2, g.dc2);
  FeatureMap dmid = conv2d(dout, dc2, shape_.s2, shape_.p2);
  for (std::size_t i = 0; i < dmid.data.size(); ++i) {
    const double pre = c.mid_pre.data[i];
    if (!(pre > 0.0 && pre < clamp_.hi)) dmid.data[i] = 0.0;
  }
  const std::size_t hw1 = dmid.height * dmid.width;
  for (std::size_t ch = 0; ch < dmid.channels; ++ch)
    for (std::size_t i = 0; i < hw1; ++i) g.b1[ch] += dmid.data[ch * hw1 + i];
  deconv2d_kernel_grad(c.seed, dmid, shape_.s1, shape_.p1, g.dc1);
  FeatureMap dseed = conv2d(dmid, dc1, shape_.s1, shape_.p1);
  Vec dz(shape_.latent, 0.0);
  for (std::size_t j = 0; j < dseed.data.size(); ++j) {
    const double d = inside(c.lin_out[j]) ? dseed.data[j] : 0.0;
    if (d == 0.0) continue;
    g.lin_b[j] += d;
    for (std::size_t i = 0; i < shape_.latent; ++i) {
      g.lin_w(i, j) += c.z[i] * d;
      dz[i] += lin_w(i, j) * d;
    }
  }
  for (std::size_t i = 0; i < dz.size(); ++i)
    if (!inside(c.z_raw[i])) dz[i] = 0.0;
  return dz;
}

Matrix VaeDecoder::stage_matrix(std::size_t stage) const {
  switch (stage) {
    case 0:
      return lin_w;
    case 1:
      return deconv_matrix(dc1, shape_.seed_size, shape_.seed_size, shape_.s1, shape_.p1);
    case 2:
      return deconv_matrix(dc2, shape_.mid_size(), shape_.mid_size(), shape_.s2, shape_.p2);
    default:
      throw std::out_of_range("decoder has three stages");
  }
}

Vec VaeDecoder::stage_bias(std::size_t stage) const {
  switch (stage) {
    case 0:
      return lin_b;
    case 1: {
      const std::size_t hw = shape_.mid_size() * shape_.mid_size();
      Vec b(shape_.mid_channels * hw);
      for (std::size_t ch = 0; ch < shape_.mid_channels; ++ch)
        std::fill_n(b.begin() + static_cast<std::ptrdiff_t>(ch * hw), hw, b1[ch]);
      return b;
    }
    case 2:
      return Vec(shape_.image * shape_.image, b2[0]);
    default:
      throw std::out_of_range("decoder has three stages");
  }
}

std::vector<double*> VaeDecoder::param_ptrs() {
  std::vector<double*> p;
  for (Vec* v : {&lin_w.data(), &lin_b, &dc1.data, &dc2.data, &b1, &b2})
    for (double& x : *v) p.push_back(&x);
  return p;
}

void VaeDecoder::zero() {
  for (double* p : param_ptrs()) *p = 0.0;
}

Vec reparameterize(std::span<const double> mu, std::span<const double> sigma, Rng& rng) {
  require_dim(sigma.size(), mu.size(), "reparameterize");
  Vec z(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) z[i] = mu[i] + sigma[i] * standard_normal(rng);
  return z;
}

double latent_kl(std::span<const double> mu, std::span<const double> sigma, std::span<const double> center) {
  double kl = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double s2 = sigma[i] * sigma[i];
    const double d = mu[i] - center[i];
    kl += 0.5 * (s2 + d * d - 1.0 - std::log(s2));
  }
  return kl;
}

AnalogDecoder deploy_decoder(const VaeDecoder& dec, const DeviceConfig& cfg, Rng& rng, const DeployOptions& opts) {
  opts.clamp.validate();
  AnalogDecoder a;
  a.clamp = opts.clamp;
  a.unit_volt = opts.unit_volt;
  for (std::size_t s = 0; s < 3; ++s) {
    const Activation act = s == 1 ? Activation::kRelu : Activation::kIdentity;
    a.stages.push_back(deploy_layer(dec.stage_matrix(s), dec.stage_bias(s), act, cfg, opts.unit_volt, rng));
  }
  return a;
}

Vec decode_analog(const AnalogDecoder& dec, std::span<const double> z, Rng& rng) {
  require_dim(z.size(), dec.stages.front().in_dim(), "decode_analog");
  Vec v(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) v[i] = z[i] * dec.unit_volt;
  for (const AnalogLayer& stage : dec.stages) v = layer_forward(stage, v, {}, dec.clamp, rng);
  // Saturating output stage.
  for (double& o : v) o = std::tanh(o / dec.unit_volt);
  return v;
}

}  // namespace memdiff
