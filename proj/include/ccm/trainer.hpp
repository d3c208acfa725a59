// Copyright 2026 The CCM Authors
// SPDX-License-Identifier: Apache-2.0
//
// Consistency-training loop. Each iteration k draws a batch of pairs, one
// level index n ~ U[1, M(k) - 1] and fresh noise per sample, takes one
// optimizer step on the student and then refreshes the teacher (a plain copy
// unless ema_decay > 0).

#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ccm/consistency.hpp"
#include "ccm/data.hpp"
#include "ccm/optimizer.hpp"

namespace ccm {

struct TrainConfig {
  double lr = 2e-4;
  std::uint64_t iterations = 5000;  // K
  std::uint64_t s0 = 10;
  std::uint64_t s1 = 1280;
  double huber_c = 0.0;  // 0 selects default_huber_c(C*H*W)
  std::size_t batch = 8;
  OptimizerKind optimizer = OptimizerKind::adam;
  double ema_decay = 0.0;
  // Training windows cut from larger pairs at each draw; 0 uses whole images.
  std::size_t crop_size = 0;
  std::uint64_t seed = 0;

  StepScheduleConfig step_config() const { return {s0, s1, iterations}; }
  void validate() const;
};

struct TrainState {
  std::uint64_t iteration = 0;
  Parameters<float> params;
  Parameters<float> teacher;
  OptimizerState optimizer;
  std::string rng_state;  // std::mt19937_64 textual state
};

struct TrainRecord {
  std::uint64_t iteration;  // iterations completed
  std::uint64_t steps;      // M(k) of the last iteration
  double mean_loss;         // over the iterations since the previous record
  double wall_seconds;
};

struct TrainCallbacks {
  std::uint64_t log_every = 0;
  std::function<void(const TrainRecord&)> on_log;
  std::uint64_t checkpoint_every = 0;
  std::function<void(const TrainState&)> on_checkpoint;
};

class NonFiniteLossError : public std::runtime_error {
 public:
  NonFiniteLossError(std::uint64_t iteration, std::vector<std::size_t> n, std::vector<double> t_lo,
                     std::vector<double> t_hi);

  std::uint64_t iteration() const { return iteration_; }
  const std::vector<std::size_t>& level_indices() const { return n_; }

 private:
  std::uint64_t iteration_;
  std::vector<std::size_t> n_;
};

class Trainer {
 public:
  /// Fresh run: parameters initialized from cfg.seed, teacher = student.
  Trainer(UNetConfig net_cfg, NoiseSchedule sched, TrainConfig cfg, const Dataset& data);
  /// Resume from a saved state.
  Trainer(UNetConfig net_cfg, NoiseSchedule sched, TrainConfig cfg, const Dataset& data, TrainState state);

  /// One iteration; returns the batch loss.
  double step();
  /// Runs until cfg.iterations iterations are complete.
  void run(const TrainCallbacks& callbacks = {});

  const TrainState& state() const;
  const TrainConfig& config() const { return cfg_; }
  const UNet& net() const { return net_; }
  double huber_c() const { return huber_c_; }
  ConsistencyModel model() const;

 private:
  // Validates the dataset against the network and resolves huber_c.
  void prepare();

  UNet net_;
  NoiseSchedule sched_;
  TrainConfig cfg_;
  const Dataset& data_;
  mutable TrainState state_;
  std::mt19937_64 rng_;
  double huber_c_ = 0.0;
  std::uint64_t cached_steps_ = 0;
  std::vector<double> levels_;
};

/// Convenience wrapper: trains from scratch and returns the final state.
TrainState train(const Dataset& data, const UNetConfig& net_cfg, const NoiseSchedule& sched, const TrainConfig& cfg,
                 const TrainCallbacks& callbacks = {});

}  // namespace ccm
