// Copyright 2026 The CCM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <optional>

#include "ccm/tensor.hpp"

namespace ccm {

using ScalarFn = std::function<Tensor<double>(const Tensor<double>&)>;

struct GradCheckOptions {
  double step = 1e-6;
  // Check only this many randomly chosen coordinates (all when unset).
  std::optional<std::size_t> max_coords;
  std::uint64_t seed = 0;
};

/// Max over checked coordinates of |analytic - numeric| / max(|analytic|,
/// |numeric|, 1e-8), where numeric is the central difference of fn at x.
/// Exceptions thrown by fn propagate.
double grad_check(const ScalarFn& fn, const Tensor<double>& x, const GradCheckOptions& options);

inline double grad_check(const ScalarFn& fn, const Tensor<double>& x, double step) {
  return grad_check(fn, x, GradCheckOptions{step, std::nullopt, 0});
}

}  // namespace ccm
