// Copyright 2026 The CCM Authors
// SPDX-License-Identifier: Apache-2.0

#include "ccm/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace ccm {

std::string_view optimizer_name(OptimizerKind kind) {
  return kind == OptimizerKind::sgd ? "sgd" : "adam";
}

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "sgd") return OptimizerKind::sgd;
  if (name == "adam") return OptimizerKind::adam;
  throw std::invalid_argument("unknown optimizer '" + std::string(name) + "' (expected sgd or adam)");
}

Optimizer::Optimizer(double lr, OptimizerState state, AdamHyper hyper)
    : lr_(lr), state_(std::move(state)), hyper_(hyper) {
  if (!(lr >= 0) || !std::isfinite(lr)) throw std::invalid_argument("optimizer: learning rate must be finite and >= 0");
}

void Optimizer::step(Parameters<float>& params) {
  ++state_.step;
  const double bc1 = 1.0 - std::pow(hyper_.beta1, static_cast<double>(state_.step));
  const double bc2 = 1.0 - std::pow(hyper_.beta2, static_cast<double>(state_.step));
  for (auto& [name, p] : params) {
    auto g = p.grad();
    if (g.empty()) continue;
    auto w = p.mutable_values();
    if (state_.kind == OptimizerKind::sgd) {
      for (std::size_t i = 0; i < w.size(); ++i) {
        w[i] = static_cast<float>(w[i] - lr_ * g[i]);
      }
      continue;
    }
    auto& m = state_.m[name];
    auto& v = state_.v[name];
    if (m.empty()) m.assign(w.size(), 0.0f);
    if (v.empty()) v.assign(w.size(), 0.0f);
    if (m.size() != w.size() || v.size() != w.size()) {
      throw std::invalid_argument("optimizer: moment size mismatch for " + name);
    }
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g[i];
      const double mi = hyper_.beta1 * m[i] + (1.0 - hyper_.beta1) * gi;
      const double vi = hyper_.beta2 * v[i] + (1.0 - hyper_.beta2) * gi * gi;
      m[i] = static_cast<float>(mi);
      v[i] = static_cast<float>(vi);
      const double update = lr_ * (mi / bc1) / (std::sqrt(vi / bc2) + hyper_.eps);
      w[i] = static_cast<float>(w[i] - update);
    }
  }
}

}  // namespace ccm
