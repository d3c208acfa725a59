// Copyright 2026 The CCM Authors
// SPDX-License-Identifier: Apache-2.0

#include "ccm/network.hpp"

#include <cmath>
#include <random>

#include "ccm/ops.hpp"

namespace ccm {

void UNetConfig::validate() const {
  if (out_channels == 0 || base_width == 0 || depth == 0 || channel_mults.empty()) {
    throw std::invalid_argument("unet: widths, depth and stage list must be positive");
  }
  if (in_channels != 2 * out_channels) {
    throw std::invalid_argument("unet: in_channels (" + std::to_string(in_channels) + ") must be twice out_channels (" +
                                std::to_string(out_channels) + ")");
  }
  for (auto m : channel_mults) {
    if (m == 0) throw std::invalid_argument("unet: channel multipliers must be positive");
  }
  if (time_embed_dim == 0 || time_embed_dim % 2) throw std::invalid_argument("unet: time_embed_dim must be even");
}

void UNetConfig::check_extent(std::size_t h, std::size_t w) const {
  const std::size_t f = std::size_t{1} << (stages() - 1);
  if (h == 0 || w == 0 || h % f || w % f) {
    throw ShapeError("unet: image extent " + std::to_string(h) + "x" + std::to_string(w) +
                     " is not divisible by " + std::to_string(f) + " (" + std::to_string(stages()) + " stages)");
  }
}

template <typename T>
Parameters<T> clone_parameters(const Parameters<T>& params) {
  Parameters<T> out;
  for (const auto& [name, t] : params) {
    auto copy = t.detach();
    copy.set_requires_grad(t.requires_grad());
    out.emplace(name, std::move(copy));
  }
  return out;
}

std::vector<float> time_embed(double t, std::size_t dim) {
  auto e = sinusoidal_embedding(Tensor<double>(Shape{1}, std::vector<double>{t}), dim);
  return {e.values().begin(), e.values().end()};
}

UNet::UNet(UNetConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  const auto e = cfg_.time_embed_dim;
  auto conv = [&](const std::string& name, std::size_t cout, std::size_t cin, std::size_t k, bool zero = false) {
    const auto init = zero ? ParamSpec::Init::zeros : ParamSpec::Init::fan_in_normal;
    specs_.push_back({name + ".weight", {cout, cin, k, k}, init, cin * k * k});
    specs_.push_back({name + ".bias", {cout}, ParamSpec::Init::zeros, 0});
  };
  auto fc = [&](const std::string& name, std::size_t out, std::size_t in) {
    specs_.push_back({name + ".weight", {out, in}, ParamSpec::Init::fan_in_normal, in});
    specs_.push_back({name + ".bias", {out}, ParamSpec::Init::zeros, 0});
  };
  auto norm = [&](const std::string& name, std::size_t c) {
    specs_.push_back({name + ".gamma", {c}, ParamSpec::Init::ones, 0});
    specs_.push_back({name + ".beta", {c}, ParamSpec::Init::zeros, 0});
  };

  conv("in_conv", cfg_.base_width, cfg_.in_channels, 3);
  fc("time.fc1", e, e);
  fc("time.fc2", e, e);

  std::size_t ch = cfg_.base_width;
  std::vector<std::size_t> skips;
  down_.resize(cfg_.stages());
  for (std::size_t s = 0; s < cfg_.stages(); ++s) {
    const auto width = cfg_.base_width * cfg_.channel_mults[s];
    for (std::size_t i = 0; i < cfg_.depth; ++i) {
      down_[s].push_back({"down." + std::to_string(s) + "." + std::to_string(i), ch, width});
      ch = width;
      skips.push_back(ch);
    }
  }
  mid_ = {"mid", ch, ch};
  up_.resize(cfg_.stages());
  for (std::size_t s = cfg_.stages(); s-- > 0;) {
    const auto width = cfg_.base_width * cfg_.channel_mults[s];
    for (std::size_t i = 0; i < cfg_.depth; ++i) {
      const auto skip = skips.back();
      skips.pop_back();
      up_[s].push_back({"up." + std::to_string(s) + "." + std::to_string(i), ch + skip, width});
      ch = width;
    }
  }

  for (const auto& stage : down_)
    for (const auto& b : stage) add_block_specs(b);
  add_block_specs(mid_);
  for (std::size_t s = cfg_.stages(); s-- > 0;)
    for (const auto& b : up_[s]) add_block_specs(b);

  norm("out_norm", ch);
  conv("out_conv", cfg_.out_channels, ch, 3, true);
}

void UNet::add_block_specs(const Block& b) {
  const auto e = cfg_.time_embed_dim;
  auto push = [&](std::string suffix, Shape shape, ParamSpec::Init init, std::size_t fan_in) {
    specs_.push_back({b.name + "." + suffix, std::move(shape), init, fan_in});
  };
  using I = ParamSpec::Init;
  push("conv1.weight", {b.out, b.in, 3, 3}, I::fan_in_normal, b.in * 9);
  push("conv1.bias", {b.out}, I::zeros, 0);
  push("norm1.gamma", {b.out}, I::ones, 0);
  push("norm1.beta", {b.out}, I::zeros, 0);
  push("emb.weight", {b.out, e}, I::fan_in_normal, e);
  push("emb.bias", {b.out}, I::zeros, 0);
  push("conv2.weight", {b.out, b.out, 3, 3}, I::fan_in_normal, b.out * 9);
  push("conv2.bias", {b.out}, I::zeros, 0);
  push("norm2.gamma", {b.out}, I::ones, 0);
  push("norm2.beta", {b.out}, I::zeros, 0);
  if (b.in != b.out) {
    push("skip.weight", {b.out, b.in, 1, 1}, I::fan_in_normal, b.in);
    push("skip.bias", {b.out}, I::zeros, 0);
  }
}

Parameters<float> UNet::init(std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Parameters<float> params;
  for (const auto& spec : specs_) {
    Tensor<float> t(spec.shape);
    auto v = t.mutable_values();
    switch (spec.init) {
      case ParamSpec::Init::zeros: break;
      case ParamSpec::Init::ones: std::fill(v.begin(), v.end(), 1.0f); break;
      case ParamSpec::Init::fan_in_normal: {
        const double sd = 1.0 / std::sqrt(static_cast<double>(spec.fan_in));
        for (auto& x : v) x = static_cast<float>(normal(rng) * sd);
        break;
      }
    }
    params.emplace(spec.name, std::move(t));
  }
  return params;
}

template <typename T>
void UNet::check_parameters(const Parameters<T>& params) const {
  if (params.size() != specs_.size()) {
    throw ShapeError("unet: expected " + std::to_string(specs_.size()) + " parameters, got " +
                     std::to_string(params.size()));
  }
  for (const auto& spec : specs_) {
    auto it = params.find(spec.name);
    if (it == params.end()) throw ShapeError("unet: missing parameter " + spec.name);
    if (it->second.shape() != spec.shape) {
      throw ShapeError("unet: parameter " + spec.name + " has shape " + shape_str(it->second.shape()) + ", expected " +
                       shape_str(spec.shape));
    }
  }
}

namespace {

template <typename T>
const Tensor<T>& param(const Parameters<T>& p, const std::string& name) {
  auto it = p.find(name);
  if (it == p.end()) throw ShapeError("unet: missing parameter " + name);
  return it->second;
}

template <typename T>
Tensor<T> conv_layer(const Parameters<T>& p, const std::string& name, const Tensor<T>& x, Padding pad = Padding::same) {
  return conv2d(x, param(p, name + ".weight"), param(p, name + ".bias"), pad);
}

template <typename T>
Tensor<T> norm_layer(const Parameters<T>& p, const std::string& name, const Tensor<T>& x) {
  return group_norm(x, default_groups(x.dim(1)), param(p, name + ".gamma"), param(p, name + ".beta"));
}

}  // namespace

template <typename T>
Tensor<T> UNet::run_block(const Parameters<T>& p, const Block& b, const Tensor<T>& x, const Tensor<T>& emb) const {
  auto h = conv_layer(p, b.name + ".conv1", x);
  h = norm_layer(p, b.name + ".norm1", h);
  h = add_channel_bias(h, linear(emb, param(p, b.name + ".emb.weight"), param(p, b.name + ".emb.bias")));
  h = silu(h);
  h = conv_layer(p, b.name + ".conv2", h);
  h = norm_layer(p, b.name + ".norm2", h);
  h = silu(h);
  auto skip = b.in == b.out ? x : conv_layer(p, b.name + ".skip", x, Padding::valid);
  return add(h, skip);
}

template <typename T>
Tensor<T> UNet::forward(const Parameters<T>& params, const Tensor<T>& r_noisy, const Tensor<T>& v,
                        const Tensor<T>& t) const {
  if (!r_noisy.defined() || !v.defined() || r_noisy.shape() != v.shape()) {
    throw ShapeError("unet: noisy target " + (r_noisy.defined() ? shape_str(r_noisy.shape()) : "<undefined>") +
                     " and condition " + (v.defined() ? shape_str(v.shape()) : "<undefined>") + " must share a shape");
  }
  const bool batched = r_noisy.rank() == 4;
  if (!batched && r_noisy.rank() != 3) throw ShapeError("unet: inputs must be (C,H,W) or (N,C,H,W)");
  auto reshape4 = [&](const Tensor<T>& x) {
    return batched ? x : reshape(x, Shape{1, x.dim(0), x.dim(1), x.dim(2)});
  };
  const auto x_r = reshape4(r_noisy);
  const auto x_v = reshape4(v);
  const auto n = x_r.dim(0);
  if (x_r.dim(1) != cfg_.out_channels) {
    throw ShapeError("unet: expected " + std::to_string(cfg_.out_channels) + " channels per input, got " +
                     std::to_string(x_r.dim(1)));
  }
  cfg_.check_extent(x_r.dim(2), x_r.dim(3));
  if (t.shape() != Shape{n}) {
    throw ShapeError("unet: noise levels " + shape_str(t.shape()) + " do not match batch of " + std::to_string(n));
  }

  auto emb = sinusoidal_embedding(t, cfg_.time_embed_dim);
  emb = linear(emb, param(params, "time.fc1.weight"), param(params, "time.fc1.bias"));
  emb = silu(emb);
  emb = linear(emb, param(params, "time.fc2.weight"), param(params, "time.fc2.bias"));
  const auto act = silu(emb);

  auto h = conv_layer(params, "in_conv", concat_channels(x_r, x_v));
  std::vector<Tensor<T>> skips;
  for (std::size_t s = 0; s < cfg_.stages(); ++s) {
    for (const auto& b : down_[s]) {
      h = run_block(params, b, h, act);
      skips.push_back(h);
    }
    if (s + 1 < cfg_.stages()) h = avgpool2x(h);
  }
  h = run_block(params, mid_, h, act);
  for (std::size_t s = cfg_.stages(); s-- > 0;) {
    for (const auto& b : up_[s]) {
      h = run_block(params, b, concat_channels(h, skips.back()), act);
      skips.pop_back();
    }
    if (s > 0) h = upsample_nearest2x(h);
  }
  h = silu(norm_layer(params, "out_norm", h));
  h = conv_layer(params, "out_conv", h);
  return batched ? h : reshape(h, Shape{h.dim(1), h.dim(2), h.dim(3)});
}

template <typename T>
Tensor<T> UNet::forward(const Parameters<T>& params, const Tensor<T>& r_noisy, const Tensor<T>& v, double t) const {
  const std::size_t n = r_noisy.defined() && r_noisy.rank() == 4 ? r_noisy.dim(0) : 1;
  return forward(params, r_noisy, v, Tensor<T>(Shape{n}, std::vector<T>(n, static_cast<T>(t))));
}

#define CCM_INSTANTIATE_NET(T)                                                                                 \
  template Parameters<T> clone_parameters<T>(const Parameters<T>&);                                            \
  template void UNet::check_parameters<T>(const Parameters<T>&) const;                                         \
  template Tensor<T> UNet::forward<T>(const Parameters<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&) \
      const;                                                                                                   \
  template Tensor<T> UNet::forward<T>(const Parameters<T>&, const Tensor<T>&, const Tensor<T>&, double) const;

CCM_INSTANTIATE_NET(float)
CCM_INSTANTIATE_NET(double)

}  // namespace ccm
