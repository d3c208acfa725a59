// Copyright 2026 The CCM Authors
// SPDX-License-Identifier: Apache-2.0

#include "ccm/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace ccm {

double grad_check(const ScalarFn& fn, const Tensor<double>& x, const GradCheckOptions& options) {
  if (!(options.step > 0)) throw std::invalid_argument("grad_check: step must be positive");

  Tensor<double> leaf(x.shape(), std::vector<double>(x.values().begin(), x.values().end()), true);
  {
    GradTape<double> tape;
    auto loss = fn(leaf);
    if (loss.numel() != 1) throw ShapeError("grad_check: function must return a scalar");
    if (loss.has_node()) {
      backward(loss);
    } else {
      leaf.zero_grad();  // constant in x
    }
  }
  const auto analytic = leaf.grad_or_zeros();

  std::vector<std::size_t> coords(x.numel());
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  if (options.max_coords && *options.max_coords < coords.size()) {
    std::mt19937_64 rng(options.seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(*options.max_coords);
  }

  auto eval = [&](std::size_t i, double delta) {
    std::vector<double> v(x.values().begin(), x.values().end());
    v[i] += delta;
    return fn(Tensor<double>(x.shape(), std::move(v))).item();
  };

  double worst = 0;
  for (auto i : coords) {
    const double numeric = (eval(i, options.step) - eval(i, -options.step)) / (2 * options.step);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

}  // namespace ccm
