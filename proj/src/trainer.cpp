// Copyright 2026 The CCM Authors
// SPDX-License-Identifier: Apache-2.0

#include "ccm/trainer.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "ccm/ops.hpp"

namespace ccm {

void TrainConfig::validate() const {
  if (!(lr >= 0) || !std::isfinite(lr)) throw std::invalid_argument("train: lr must be finite and >= 0");
  if (!(huber_c >= 0) || !std::isfinite(huber_c)) throw std::invalid_argument("train: huber_c must be >= 0");
  if (batch < 1) throw std::invalid_argument("train: batch must be at least 1");
  if (!(ema_decay >= 0 && ema_decay < 1)) throw std::invalid_argument("train: ema_decay must lie in [0, 1)");
  step_config().validate();
}

namespace {

std::string describe(std::uint64_t iteration, const std::vector<std::size_t>& n, const std::vector<double>& lo,
                     const std::vector<double>& hi) {
  std::ostringstream os;
  os.precision(17);
  os << "non-finite loss at iteration " << iteration << ":";
  for (std::size_t i = 0; i < n.size(); ++i) os << " [n=" << n[i] << " t_n=" << lo[i] << " t_n+1=" << hi[i] << "]";
  return os.str();
}

std::mt19937_64 training_rng(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x7472u};
  return std::mt19937_64(seq);
}

Tensor<float> stack(const std::vector<const Image*>& imgs) {
  const auto& first = *imgs.front();
  std::vector<float> values;
  values.reserve(imgs.size() * first.size());
  for (const auto* img : imgs) values.insert(values.end(), img->data.begin(), img->data.end());
  return Tensor<float>(Shape{imgs.size(), first.channels, first.height, first.width}, std::move(values));
}

}  // namespace

NonFiniteLossError::NonFiniteLossError(std::uint64_t iteration, std::vector<std::size_t> n, std::vector<double> t_lo,
                                       std::vector<double> t_hi)
    : std::runtime_error(describe(iteration, n, t_lo, t_hi)), iteration_(iteration), n_(std::move(n)) {}

Trainer::Trainer(UNetConfig net_cfg, NoiseSchedule sched, TrainConfig cfg, const Dataset& data)
    : net_(std::move(net_cfg)), sched_(sched), cfg_(cfg), data_(data), rng_(training_rng(cfg.seed)) {
  cfg_.validate();
  sched_.validate();
  state_.params = net_.init(cfg_.seed);
  state_.teacher = clone_parameters(state_.params);
  state_.optimizer.kind = cfg_.optimizer;
  prepare();
}

Trainer::Trainer(UNetConfig net_cfg, NoiseSchedule sched, TrainConfig cfg, const Dataset& data, TrainState state)
    : net_(std::move(net_cfg)), sched_(sched), cfg_(cfg), data_(data), state_(std::move(state)) {
  cfg_.validate();
  sched_.validate();
  net_.check_parameters(state_.params);
  net_.check_parameters(state_.teacher);
  if (state_.optimizer.kind != cfg_.optimizer) throw std::invalid_argument("train: optimizer state kind mismatch");
  std::istringstream in(state_.rng_state);
  in >> rng_;
  if (!in) throw std::invalid_argument("train: malformed RNG state");
  prepare();
}

void Trainer::prepare() {
  if (data_.empty()) throw std::invalid_argument("train: dataset is empty");
  const auto& first = data_.front();
  for (const auto& pair : data_) {
    if (!pair.v.same_shape(first.v) || !pair.r.same_shape(first.v)) {
      if (cfg_.crop_size == 0) throw ShapeError("train: pairs must share one shape unless crop_size is set");
    }
    if (cfg_.crop_size > std::min(pair.v.height, pair.v.width)) {
      throw ShapeError("train: crop_size exceeds pair " + pair.id);
    }
  }
  const auto c = net_.config().out_channels;
  if (first.v.channels != c) {
    throw ShapeError("train: data has " + std::to_string(first.v.channels) + " channels, network expects " +
                     std::to_string(c));
  }
  const auto extent = cfg_.crop_size ? cfg_.crop_size : first.v.height;
  net_.config().check_extent(extent, cfg_.crop_size ? cfg_.crop_size : first.v.width);
  const auto side = cfg_.crop_size;
  const auto values = side ? c * side * side : first.v.size();
  huber_c_ = cfg_.huber_c > 0 ? cfg_.huber_c : default_huber_c(values);
}

double Trainer::step() {
  const auto k = state_.iteration;
  const auto steps = steps_at(cfg_.step_config(), k);
  if (steps != cached_steps_) {
    levels_ = discretize(sched_, steps);
    cached_steps_ = steps;
  }
  const auto batch = cfg_.batch;
  std::uniform_int_distribution<std::size_t> pick(0, data_.size() - 1);
  std::uniform_int_distribution<std::size_t> level(1, steps - 1);
  std::vector<std::size_t> n(batch);
  std::vector<PairedSample> cropped;
  std::vector<const Image*> vs(batch), rs(batch);
  cropped.reserve(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    const auto& pair = data_[pick(rng_)];
    n[b] = level(rng_);
    if (cfg_.crop_size) {
      cropped.push_back(random_crop_pair(pair, cfg_.crop_size, rng_));
      vs[b] = &cropped.back().v;
      rs[b] = &cropped.back().r;
    } else {
      vs[b] = &pair.v;
      rs[b] = &pair.r;
    }
  }
  auto v = stack(vs);
  auto r = stack(rs);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  std::vector<float> zv(r.numel());
  for (auto& x : zv) x = normal(rng_);
  Tensor<float> z(r.shape(), std::move(zv));

  for (auto& [name, p] : state_.params) p.set_requires_grad(true);
  double loss_value;
  {
    GradTape<float> tape;
    auto loss = cct_loss(net_, sched_, state_.params, state_.teacher, r, v, z, n, levels_, huber_c_);
    loss_value = loss.item();
    if (!std::isfinite(loss_value)) {
      std::vector<double> lo(batch), hi(batch);
      for (std::size_t b = 0; b < batch; ++b) {
        lo[b] = levels_[n[b] - 1];
        hi[b] = levels_[n[b]];
      }
      throw NonFiniteLossError(k, n, lo, hi);
    }
    backward(loss);
  }
  Optimizer opt(cfg_.lr, std::move(state_.optimizer));
  opt.step(state_.params);
  state_.optimizer = opt.state();

  const float decay = static_cast<float>(cfg_.ema_decay);
  for (auto& [name, teacher] : state_.teacher) {
    auto src = state_.params.at(name).values();
    auto dst = teacher.mutable_values();
    if (cfg_.ema_decay == 0.0) {
      std::copy(src.begin(), src.end(), dst.begin());
    } else {
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = decay * dst[i] + (1.0f - decay) * src[i];
    }
  }
  ++state_.iteration;
  return loss_value;
}

void Trainer::run(const TrainCallbacks& callbacks) {
  const auto start = std::chrono::steady_clock::now();
  double acc = 0.0;
  std::uint64_t count = 0;
  while (state_.iteration < cfg_.iterations) {
    const auto steps = steps_at(cfg_.step_config(), state_.iteration);
    acc += step();
    ++count;
    const auto k = state_.iteration;
    const bool last = k == cfg_.iterations;
    if (callbacks.on_log && ((callbacks.log_every && k % callbacks.log_every == 0) || last)) {
      const std::chrono::duration<double> wall = std::chrono::steady_clock::now() - start;
      callbacks.on_log({k, steps, acc / static_cast<double>(count), wall.count()});
      acc = 0.0;
      count = 0;
    }
    if (callbacks.on_checkpoint && callbacks.checkpoint_every && k % callbacks.checkpoint_every == 0 && !last) {
      callbacks.on_checkpoint(state());
    }
  }
}

const TrainState& Trainer::state() const {
  std::ostringstream os;
  os << rng_;
  state_.rng_state = os.str();
  return state_;
}

ConsistencyModel Trainer::model() const {
  return ConsistencyModel(net_.config(), sched_, clone_parameters(state_.params), clone_parameters(state_.teacher));
}

TrainState train(const Dataset& data, const UNetConfig& net_cfg, const NoiseSchedule& sched, const TrainConfig& cfg,
                 const TrainCallbacks& callbacks) {
  Trainer trainer(net_cfg, sched, cfg, data);
  trainer.run(callbacks);
  return trainer.state();
}

}  // namespace ccm
