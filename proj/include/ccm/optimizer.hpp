// Copyright 2026 The CCM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "ccm/network.hpp"

namespace ccm {

enum class OptimizerKind { sgd, adam };

std::string_view optimizer_name(OptimizerKind kind);
// Throws std::invalid_argument for anything but "sgd" or "adam".
OptimizerKind parse_optimizer(std::string_view name);

struct OptimizerState {
  OptimizerKind kind = OptimizerKind::adam;
  std::uint64_t step = 0;
  // Adam moments keyed by parameter name; empty for sgd.
  std::map<std::string, std::vector<float>> m;
  std::map<std::string, std::vector<float>> v;
};

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Optimizer {
 public:
  Optimizer(double lr, OptimizerState state, AdamHyper hyper = {});

  /// Applies one update from the gradients stored on params. Parameters
  /// without a gradient are left alone.
  void step(Parameters<float>& params);

  const OptimizerState& state() const { return state_; }
  double lr() const { return lr_; }

 private:
  double lr_;
  OptimizerState state_;
  AdamHyper hyper_;
};

}  // namespace ccm
