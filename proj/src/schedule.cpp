// Copyright 2026 The CCM Authors
// SPDX-License-Identifier: Apache-2.0

#include "ccm/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ccm {

void NoiseSchedule::validate() const {
  if (!(sigma_min > 0) || !(sigma_min < sigma_max)) {
    throw std::invalid_argument("schedule: need 0 < sigma_min < sigma_max");
  }
  if (!(rho >= 1)) throw std::invalid_argument("schedule: rho must be at least 1");
  if (!(sigma_data > 0)) throw std::invalid_argument("schedule: sigma_data must be positive");
}

void StepScheduleConfig::validate() const {
  if (s0 < 2 || s0 > s1) throw std::invalid_argument("step schedule: need 1 < s0 <= s1");
  if (total_iterations < 1) throw std::invalid_argument("step schedule: total iterations must be at least 1");
}

std::vector<double> discretize(const NoiseSchedule& sched, std::size_t levels) {
  sched.validate();
  if (levels < 2) throw std::invalid_argument("discretize: need at least 2 levels, got " + std::to_string(levels));
  const double lo = std::pow(sched.sigma_min, 1.0 / sched.rho);
  const double hi = std::pow(sched.sigma_max, 1.0 / sched.rho);
  std::vector<double> t(levels);
  const double last = static_cast<double>(levels - 1);
  for (std::size_t i = 0; i < levels; ++i) {
    t[i] = std::pow(lo + static_cast<double>(i) / last * (hi - lo), sched.rho);
  }
  // The closed form only reproduces the endpoints to within rounding.
  t.front() = sched.sigma_min;
  t.back() = sched.sigma_max;
  return t;
}

std::uint64_t steps_at(const StepScheduleConfig& cfg, std::uint64_t k) {
  cfg.validate();
  if (k >= cfg.total_iterations) {
    throw std::out_of_range("steps_at: iteration " + std::to_string(k) + " outside [0, " +
                            std::to_string(cfg.total_iterations) + ")");
  }
  const auto doublings = static_cast<std::uint64_t>(
      std::ceil(std::log2(static_cast<double>(cfg.s1) / static_cast<double>(cfg.s0)) - 1e-12));
  const std::uint64_t stage_len = std::max<std::uint64_t>(1, cfg.total_iterations / (doublings + 1));
  const std::uint64_t stage = k / stage_len;
  std::uint64_t n = cfg.s0;
  for (std::uint64_t i = 0; i < stage && n < cfg.s1; ++i) n *= 2;
  return std::min(n, cfg.s1) + 1;
}

double weighting(double t, double t_next) {
  if (!(t_next > t)) throw std::invalid_argument("weighting: need t_next > t");
  return 1.0 / (t_next - t);
}

Scalings scalings(const NoiseSchedule& sched, double t) {
  if (!(t >= sched.sigma_min && t <= sched.sigma_max)) {
    throw std::out_of_range("scalings: t=" + std::to_string(t) + " outside [sigma_min, sigma_max]");
  }
  const double sd2 = sched.sigma_data * sched.sigma_data;
  const double dt = t - sched.sigma_min;
  return {sd2 / (dt * dt + sd2), sched.sigma_data * dt / std::sqrt(sd2 + t * t)};
}

double input_scale(const NoiseSchedule& sched, double t) {
  return 1.0 / std::sqrt(t * t + sched.sigma_data * sched.sigma_data);
}

}  // namespace ccm
