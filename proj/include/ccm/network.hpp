// Copyright 2026 The CCM Authors
// SPDX-License-Identifier: Apache-2.0
//
// Conditional U-Net denoiser. The network sees the channel concatenation
// [noisy target, condition] (2C channels) plus a noise-level embedding and
// emits C channels.
//
// Parameter names (every entry is "<name>.weight"/"<name>.bias" or, for
// norms, "<name>.gamma"/"<name>.beta"):
//   in_conv                    3x3 conv, 2C -> base_width
//   time.fc1, time.fc2         embedding MLP, time_embed_dim -> time_embed_dim
//   down.<stage>.<i>.*         residual blocks on the contracting path
//   mid.*                      bottleneck residual block
//   up.<stage>.<i>.*           residual blocks on the expanding path, fed
//                              [upsampled features, skip] concatenations
//   out_norm, out_conv         final norm and zero-initialized 3x3 conv -> C
// A residual block <b> holds <b>.conv1, <b>.norm1, <b>.emb (embedding
// projection), <b>.conv2, <b>.norm2 and, when widths differ, <b>.skip (1x1).

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ccm/tensor.hpp"

namespace ccm {

struct UNetConfig {
  std::size_t in_channels = 6;
  std::size_t out_channels = 3;
  std::size_t base_width = 32;
  std::vector<std::size_t> channel_mults{1, 2};
  std::size_t depth = 1;
  std::size_t time_embed_dim = 64;

  static UNetConfig for_channels(std::size_t c) {
    UNetConfig cfg;
    cfg.in_channels = 2 * c;
    cfg.out_channels = c;
    return cfg;
  }

  std::size_t stages() const { return channel_mults.size(); }
  void validate() const;
  // Throws ShapeError unless h and w are divisible by 2^(stages-1).
  void check_extent(std::size_t h, std::size_t w) const;
};

template <typename T>
using Parameters = std::map<std::string, Tensor<T>>;

struct ParamSpec {
  enum class Init { fan_in_normal, zeros, ones };
  std::string name;
  Shape shape;
  Init init;
  std::size_t fan_in;
};

/// Deep copy; the result shares no buffers with the source.
template <typename T>
Parameters<T> clone_parameters(const Parameters<T>& params);

template <typename U, typename T>
Parameters<U> cast_parameters(const Parameters<T>& params) {
  Parameters<U> out;
  for (const auto& [name, t] : params) out.emplace(name, t.template cast<U>());
  return out;
}

/// Sinusoidal features of a single noise level (no learned layers).
std::vector<float> time_embed(double t, std::size_t dim);

class UNet {
 public:
  explicit UNet(UNetConfig cfg);

  const UNetConfig& config() const { return cfg_; }
  // Architecture order.
  const std::vector<ParamSpec>& parameter_specs() const { return specs_; }

  /// Fan-in scaled normal weights (std 1/sqrt(fan_in)), zero biases, unit
  /// norm gains; out_conv is all zeros. Deterministic in seed.
  Parameters<float> init(std::uint64_t seed) const;

  /// Throws ShapeError if names or shapes disagree with the architecture.
  template <typename T>
  void check_parameters(const Parameters<T>& params) const;

  /// r_noisy and v are (C,H,W) or (N,C,H,W); t holds one noise level per
  /// sample. Returns the same rank as the inputs.
  template <typename T>
  Tensor<T> forward(const Parameters<T>& params, const Tensor<T>& r_noisy, const Tensor<T>& v,
                    const Tensor<T>& t) const;

  template <typename T>
  Tensor<T> forward(const Parameters<T>& params, const Tensor<T>& r_noisy, const Tensor<T>& v, double t) const;

 private:
  struct Block {
    std::string name;
    std::size_t in, out;
  };

  template <typename T>
  Tensor<T> run_block(const Parameters<T>& p, const Block& b, const Tensor<T>& x, const Tensor<T>& emb) const;

  void add_block_specs(const Block& b);

  UNetConfig cfg_;
  std::vector<std::vector<Block>> down_;
  Block mid_;
  std::vector<std::vector<Block>> up_;  // up_[s] runs at stage s
  std::vector<ParamSpec> specs_;
};

}  // namespace ccm
