// Copyright 2026 The CCM Authors
// SPDX-License-Identifier: Apache-2.0
//
// Independent reference computations shared by the unit and acceptance
// tests. Nothing here calls into the library code it is used to check.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ccm/grad_check.hpp"
#include "ccm/image.hpp"
#include "ccm/network.hpp"
#include "ccm/ops.hpp"

namespace ccm::testing {

inline std::vector<double> normal_values(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

inline Tensor<double> random_tensor(const Shape& shape, std::mt19937_64& rng, double scale = 1.0) {
  return Tensor<double>(shape, normal_values(shape_numel(shape), rng, scale));
}

inline Tensor<double> uniform_tensor(const Shape& shape, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = dist(rng);
  return Tensor<double>(shape, std::move(v));
}

inline Image random_image(std::size_t c, std::size_t h, std::size_t w, std::mt19937_64& rng, float lo = -1.0f,
                          float hi = 1.0f) {
  std::uniform_real_distribution<float> dist(lo, hi);
  Image img(c, h, w);
  for (auto& x : img.data) x = dist(rng);
  return img;
}

// ---- Gradient checks -------------------------------------------------------

struct OpCase {
  std::string label;
  OpKind op;
  OpAttrs attrs;
  std::vector<Tensor<double>> inputs;
  std::vector<bool> differentiable;
};

/// One or more randomized cases per operator in kAllOps.
inline std::vector<OpCase> op_cases(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto rt = [&](Shape s) { return random_tensor(s, rng); };
  std::vector<OpCase> cases;
  OpAttrs none;
  OpAttrs valid;
  valid.padding = Padding::valid;
  cases.push_back({"conv2d/same", OpKind::conv2d, none, {rt({2, 3, 5, 5}), rt({4, 3, 3, 3}), rt({4})},
                   {true, true, true}});
  cases.push_back({"conv2d/valid", OpKind::conv2d, valid, {rt({2, 3, 5, 4}), rt({2, 3, 3, 3}), rt({2})},
                   {true, true, true}});
  cases.push_back({"conv2d/1x1-nobias", OpKind::conv2d, none, {rt({3, 4, 4}), rt({2, 3, 1, 1})}, {true, true}});
  cases.push_back({"linear", OpKind::linear, none, {rt({3, 5}), rt({4, 5}), rt({4})}, {true, true, true}});
  cases.push_back({"concat_channels", OpKind::concat_channels, none, {rt({2, 2, 3, 3}), rt({2, 3, 3, 3})},
                   {true, true}});
  cases.push_back({"add", OpKind::add, none, {rt({2, 3, 4}), rt({2, 3, 4})}, {true, true}});
  cases.push_back({"sub", OpKind::sub, none, {rt({2, 3, 4}), rt({2, 3, 4})}, {true, true}});
  cases.push_back({"mul", OpKind::mul, none, {rt({2, 3, 4}), rt({2, 3, 4})}, {true, true}});
  cases.push_back({"silu", OpKind::silu, none, {rt({2, 3, 4})}, {true}});
  OpAttrs gn;
  gn.groups = 2;
  cases.push_back({"group_norm", OpKind::group_norm, gn, {rt({2, 4, 3, 3}), rt({4}), rt({4})}, {true, true, true}});
  cases.push_back({"upsample_nearest2x", OpKind::upsample_nearest2x, none, {rt({2, 2, 3, 3})}, {true}});
  cases.push_back({"avgpool2x", OpKind::avgpool2x, none, {rt({2, 2, 4, 6})}, {true}});
  OpAttrs sc;
  sc.scalar = -1.7;
  cases.push_back({"scale", OpKind::scale, sc, {rt({3, 4})}, {true}});
  cases.push_back({"add_scalar", OpKind::add_scalar, sc, {rt({3, 4})}, {true}});
  cases.push_back({"scale_rows", OpKind::scale_rows, none, {rt({3, 2, 2, 2}), rt({3})}, {true, true}});
  cases.push_back({"add_channel_bias", OpKind::add_channel_bias, none, {rt({2, 3, 2, 2}), rt({2, 3})},
                   {true, true}});
  cases.push_back({"sum", OpKind::sum, none, {rt({2, 3, 4})}, {true}});
  cases.push_back({"mean", OpKind::mean, none, {rt({2, 3, 4})}, {true}});
  cases.push_back({"sum_rows", OpKind::sum_rows, none, {rt({3, 2, 4})}, {true}});
  cases.push_back({"sqrt", OpKind::sqrt, none, {uniform_tensor({2, 5}, rng, 0.5, 3.0)}, {true}});
  OpAttrs emb;
  emb.dim = 8;
  cases.push_back({"sinusoidal_embedding", OpKind::sinusoidal_embedding, emb,
                   {uniform_tensor({3}, rng, 0.01, 80.0)}, {true}});
  return cases;
}

/// sum(op(inputs) * W) for fixed random weights W.
inline Tensor<double> weighted_output(const OpCase& c, const std::vector<Tensor<double>>& inputs,
                                      const Tensor<double>& weights) {
  auto out = apply<double>(c.op, inputs, c.attrs);
  return sum(mul(out, weights));
}

/// Max relative error over every differentiable input of the case.
inline double check_op_case(const OpCase& c, std::uint64_t seed, double step = 1e-6) {
  std::mt19937_64 rng(seed ^ 0x5eedull);
  Shape out_shape;
  {
    NoGradGuard<double> no_grad;
    out_shape = apply<double>(c.op, c.inputs, c.attrs).shape();
  }
  const auto weights = random_tensor(out_shape, rng);
  double worst = 0.0;
  for (std::size_t j = 0; j < c.inputs.size(); ++j) {
    if (!c.differentiable[j]) continue;
    auto fn = [&](const Tensor<double>& x) {
      auto inputs = c.inputs;
      inputs[j] = x;
      return weighted_output(c, inputs, weights);
    };
    worst = std::max(worst, grad_check(fn, c.inputs[j], step));
  }
  return worst;
}

struct UNetCheck {
  std::string group;
  double error;
};

/// Base width 16 so every norm group spans several channels; with one channel
/// per group the preceding conv bias has an identically zero gradient.
inline UNetConfig grad_check_net() {
  UNetConfig cfg = UNetConfig::for_channels(2);
  cfg.base_width = 16;
  cfg.channel_mults = {1, 2};
  cfg.depth = 1;
  cfg.time_embed_dim = 8;
  return cfg;
}

/// Finite-difference check of a small U-Net on 8x8 inputs. The zero-initialized
/// output layer is replaced by random weights so every parameter group
/// receives a nonzero gradient. Checks sampled coordinates of each group in
/// groups plus the noisy input.
/// The default step of 1e-4 keeps cancellation noise below the smallest
/// gradient entries reached through the time embedding.
inline std::vector<UNetCheck> unet_grad_checks(std::uint64_t seed, const std::vector<std::string>& groups,
                                               std::size_t coords = 12, double step = 1e-4) {
  UNet net(grad_check_net());
  auto params = cast_parameters<double>(net.init(seed));
  std::mt19937_64 rng(seed + 17);
  for (const auto& name : {"out_conv.weight", "out_conv.bias"}) {
    auto& p = params.at(name);
    p = random_tensor(p.shape(), rng, 0.2);
  }
  const auto r = random_tensor({2, 2, 8, 8}, rng);
  const auto v = random_tensor({2, 2, 8, 8}, rng);
  const Tensor<double> t(Shape{2}, std::vector<double>{0.3, 7.0});
  const auto weights = random_tensor({2, 2, 8, 8}, rng);

  std::vector<UNetCheck> out;
  GradCheckOptions opts;
  opts.step = step;
  opts.max_coords = coords;
  opts.seed = seed;
  for (const auto& group : groups) {
    auto fn = [&](const Tensor<double>& x) {
      auto p = params;
      p[group] = x;
      return sum(mul(net.forward(p, r, v, t), weights));
    };
    out.push_back({group, grad_check(fn, params.at(group), opts)});
  }
  auto input_fn = [&](const Tensor<double>& x) { return sum(mul(net.forward(params, x, v, t), weights)); };
  out.push_back({"<input r>", grad_check(input_fn, r, opts)});
  auto cond_fn = [&](const Tensor<double>& x) { return sum(mul(net.forward(params, r, x, t), weights)); };
  out.push_back({"<condition v>", grad_check(cond_fn, v, opts)});
  return out;
}

// ---- Schedule and loss closed forms ----------------------------------------

inline double ref_skip(double t, double eps, double sd) { return sd * sd / ((t - eps) * (t - eps) + sd * sd); }

/// lambda(t_n) * d(a_skip(t_hi) (r + t_hi z), a_skip(t_lo) (r + t_lo z)) for one sample.
inline double closed_form_loss(const std::vector<double>& r, const std::vector<double>& z, double t_lo, double t_hi,
                               double eps, double sd, double c) {
  const double s_hi = ref_skip(t_hi, eps, sd), s_lo = ref_skip(t_lo, eps, sd);
  long double sq = 0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const long double a = s_hi * (r[i] + t_hi * z[i]);
    const long double b = s_lo * (r[i] + t_lo * z[i]);
    sq += (a - b) * (a - b);
  }
  const long double d = std::sqrt(sq + static_cast<long double>(c) * c) - c;
  return static_cast<double>(d / (t_hi - t_lo));
}

// ---- Metric references ------------------------------------------------------

inline double ref_psnr(const Image& a, const Image& b, double max_val) {
  long double acc = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const long double d = static_cast<long double>(a.data[i]) - b.data[i];
    acc += d * d;
  }
  const long double mse = acc / a.data.size();
  if (mse == 0) return INFINITY;
  return static_cast<double>(10.0L * std::log10(static_cast<long double>(max_val) * max_val / mse));
}

/// Gaussian SSIM computed by explicit valid-mode filtering of the five
/// moment maps, then averaging the SSIM map.
inline double ref_ssim_plane(const std::vector<long double>& x, const std::vector<long double>& y, std::size_t h,
                             std::size_t w, double range) {
  constexpr int n = 11;
  std::array<long double, n> g{};
  long double total = 0;
  for (int i = 0; i < n; ++i) {
    g[i] = std::exp(-static_cast<long double>((i - 5) * (i - 5)) / (2 * 1.5L * 1.5L));
    total += g[i];
  }
  for (auto& e : g) e /= total;
  auto filter = [&](const std::vector<long double>& img) {
    const std::size_t oh = h - n + 1, ow = w - n + 1;
    std::vector<long double> rows(h * ow, 0.0L), out(oh * ow, 0.0L);
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < ow; ++j)
        for (int k = 0; k < n; ++k) rows[i * ow + j] += g[k] * img[i * w + j + k];
    for (std::size_t i = 0; i < oh; ++i)
      for (std::size_t j = 0; j < ow; ++j)
        for (int k = 0; k < n; ++k) out[i * ow + j] += g[k] * rows[(i + k) * ow + j];
    return out;
  };
  std::vector<long double> xx(x.size()), yy(x.size()), xy(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto mx = filter(x), my = filter(y), fxx = filter(xx), fyy = filter(yy), fxy = filter(xy);
  const long double c1 = std::pow(0.01L * range, 2), c2 = std::pow(0.03L * range, 2);
  long double acc = 0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const long double vx = fxx[i] - mx[i] * mx[i], vy = fyy[i] - my[i] * my[i], cxy = fxy[i] - mx[i] * my[i];
    acc += (2 * mx[i] * my[i] + c1) * (2 * cxy + c2) / ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
  }
  return static_cast<double>(acc / mx.size());
}

/// Luma (BT.601) for three channels, otherwise the single channel.
inline double ref_ssim(const Image& a, const Image& b, double range) {
  const std::size_t plane = a.height * a.width;
  std::vector<long double> x(plane), y(plane);
  for (std::size_t i = 0; i < plane; ++i) {
    if (a.channels == 3) {
      x[i] = 0.299L * a.data[i] + 0.587L * a.data[plane + i] + 0.114L * a.data[2 * plane + i];
      y[i] = 0.299L * b.data[i] + 0.587L * b.data[plane + i] + 0.114L * b.data[2 * plane + i];
    } else {
      x[i] = a.data[i];
      y[i] = b.data[i];
    }
  }
  return ref_ssim_plane(x, y, a.height, a.width, range);
}

}  // namespace ccm::testing
