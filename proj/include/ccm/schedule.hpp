// Copyright 2026 The CCM Authors
// SPDX-License-Identifier: Apache-2.0
//
// Noise levels, discretization-size schedule, loss weighting and the
// skip/out scalings that pin the consistency function to the identity at
// the minimal noise level.

#pragma once

#include <cstdint>
#include <vector>

namespace ccm {

struct NoiseSchedule {
  double sigma_min = 0.002;  // epsilon
  double sigma_max = 80.0;   // T
  double rho = 7.0;
  double sigma_data = 0.5;

  void validate() const;
};

struct StepScheduleConfig {
  std::uint64_t s0 = 10;
  std::uint64_t s1 = 1280;
  std::uint64_t total_iterations = 1;  // K

  void validate() const;
};

struct Scalings {
  double skip;
  double out;
};

/// N levels t_1 < ... < t_N with t_1 = sigma_min and t_N = sigma_max exactly:
/// t_i = (eps^(1/rho) + (i-1)/(N-1) * (T^(1/rho) - eps^(1/rho)))^rho.
std::vector<double> discretize(const NoiseSchedule& sched, std::size_t levels);

/// Discretization size M(k) = min(s0 * 2^floor(k/K'), s1) + 1 with
/// K' = max(1, floor(K / (ceil(log2(s1/s0)) + 1))).
std::uint64_t steps_at(const StepScheduleConfig& cfg, std::uint64_t k);

/// lambda = 1 / (t_next - t).
double weighting(double t, double t_next);

/// a_skip(t) = sd^2 / ((t - eps)^2 + sd^2), a_out(t) = sd (t - eps) / sqrt(sd^2 + t^2).
Scalings scalings(const NoiseSchedule& sched, double t);

/// Network input scaling 1 / sqrt(t^2 + sd^2) applied to the noisy target.
double input_scale(const NoiseSchedule& sched, double t);

}  // namespace ccm
