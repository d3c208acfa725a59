// Copyright 2026 The CCM Authors
// SPDX-License-Identifier: Apache-2.0
//
// Differentiable operators. Image tensors are either (C,H,W) or (N,C,H,W);
// the channel axis is always rank-3. Shape errors name the operator and the
// offending extents.

#pragma once

#include <cstddef>
#include <span>
#include <string_view>

#include "ccm/tensor.hpp"

namespace ccm {

enum class Padding { same, valid };

/// 2-D convolution, stride 1. weight is (Cout,Cin,k,k) with odd k for
/// Padding::same; bias is (Cout) or undefined.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias, Padding padding);

/// x (N,in) or (in) times weight (out,in) transposed, plus bias (out) if defined.
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

/// Concatenation along the channel axis, a's channels first.
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> silu(const Tensor<T>& x);

/// Group normalization over (C/groups, H, W) slabs per sample, followed by
/// the per-channel affine map gamma*x + beta.
template <typename T>
Tensor<T> group_norm(const Tensor<T>& x, std::size_t groups, const Tensor<T>& gamma, const Tensor<T>& beta,
                     double eps = 1e-5);

/// Group count used by the network: min(8, channels), reduced to the largest
/// divisor of channels when 8 does not divide it.
std::size_t default_groups(std::size_t channels);

template <typename T>
Tensor<T> upsample_nearest2x(const Tensor<T>& x);
template <typename T>
Tensor<T> avgpool2x(const Tensor<T>& x);

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor);
template <typename T>
Tensor<T> add_scalar(const Tensor<T>& x, T offset);

/// Multiplies every element of row i (leading axis) by s[i]; s is (N).
template <typename T>
Tensor<T> scale_rows(const Tensor<T>& x, const Tensor<T>& s);

/// x (N,C,H,W) plus e (N,C) broadcast over the spatial axes.
template <typename T>
Tensor<T> add_channel_bias(const Tensor<T>& x, const Tensor<T>& e);

/// Reductions. sum and mean return shape (1); sum_rows reduces all but the
/// leading axis to shape (N). Accumulation is in double precision.
template <typename T>
Tensor<T> sum(const Tensor<T>& x);
template <typename T>
Tensor<T> mean(const Tensor<T>& x);
template <typename T>
Tensor<T> sum_rows(const Tensor<T>& x);

template <typename T>
Tensor<T> sqrt(const Tensor<T>& x);

/// Same values under a new shape with equal element count.
template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape);

/// Sinusoidal features of 0.25*ln(t) for each t in the (N) input: the first
/// dim/2 columns are sines, the rest cosines, at frequencies
/// exp(-ln(10000) * i / (dim/2)). Output is (N, dim).
template <typename T>
Tensor<T> sinusoidal_embedding(const Tensor<T>& t, std::size_t dim);

// Tag-dispatched entry point over the full operator set.
enum class OpKind {
  conv2d,
  linear,
  concat_channels,
  add,
  sub,
  mul,
  silu,
  group_norm,
  upsample_nearest2x,
  avgpool2x,
  scale,
  add_scalar,
  scale_rows,
  add_channel_bias,
  sum,
  mean,
  sum_rows,
  sqrt,
  sinusoidal_embedding,
};

inline constexpr OpKind kAllOps[] = {
    OpKind::conv2d,     OpKind::linear,     OpKind::concat_channels,  OpKind::add,
    OpKind::sub,        OpKind::mul,        OpKind::silu,             OpKind::group_norm,
    OpKind::upsample_nearest2x, OpKind::avgpool2x, OpKind::scale,     OpKind::add_scalar,
    OpKind::scale_rows, OpKind::add_channel_bias, OpKind::sum,        OpKind::mean,
    OpKind::sum_rows,   OpKind::sqrt,       OpKind::sinusoidal_embedding,
};

std::string_view op_name(OpKind op);

struct OpAttrs {
  Padding padding = Padding::same;
  std::size_t groups = 0;  // group_norm; 0 selects default_groups
  std::size_t dim = 0;     // sinusoidal_embedding width
  double scalar = 1.0;     // scale / add_scalar
  double eps = 1e-5;       // group_norm
};

/// Operand order follows the named functions above (e.g. conv2d takes
/// {x, weight, bias}). Wrong arity is a ShapeError.
template <typename T>
Tensor<T> apply(OpKind op, std::span<const Tensor<T>> inputs, const OpAttrs& attrs = {});

}  // namespace ccm
