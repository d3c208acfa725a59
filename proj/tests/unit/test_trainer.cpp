// Copyright 2026 The CCM Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "ccm/data.hpp"
#include "ccm/optimizer.hpp"
#include "ccm/trainer.hpp"

namespace ccm {
namespace {

UNetConfig tiny_net() {
  UNetConfig cfg = UNetConfig::for_channels(3);
  cfg.base_width = 8;
  cfg.time_embed_dim = 8;
  return cfg;
}

TrainConfig tiny_train(std::uint64_t iterations) {
  TrainConfig cfg;
  cfg.iterations = iterations;
  cfg.batch = 2;
  cfg.s1 = 40;
  cfg.lr = 1e-3;
  cfg.seed = 9;
  return cfg;
}

bool same(const Parameters<float>& a, const Parameters<float>& b) {
  if (a.size() != b.size()) return false;
  for (const auto& [name, t] : a) {
    const auto& u = b.at(name);
    if (!std::equal(t.values().begin(), t.values().end(), u.values().begin(), u.values().end())) return false;
  }
  return true;
}

const Dataset& tiny_data() {
  static const Dataset data = synth_lowlight(1, 6, 8);
  return data;
}

TEST(Optimizer, SgdIsLiteralGradientStep) {
  Parameters<float> p;
  p.emplace("w", Tensor<float>(Shape{2}, {1.0f, -2.0f}, true));
  p.at("w").data()->grad = {0.5f, 4.0f};
  Optimizer opt(0.1, OptimizerState{OptimizerKind::sgd, 0, {}, {}});
  opt.step(p);
  EXPECT_EQ(p.at("w").values()[0], static_cast<float>(1.0f - 0.1 * 0.5f));
  EXPECT_EQ(p.at("w").values()[1], static_cast<float>(-2.0f - 0.1 * 4.0f));
}

TEST(Optimizer, AdamFirstStepIsSignedLearningRate) {
  Parameters<float> p;
  p.emplace("w", Tensor<float>(Shape{3}, {0.0f, 0.0f, 0.0f}, true));
  p.at("w").data()->grad = {0.5f, -3.0f, 1e-3f};
  Optimizer opt(0.01, OptimizerState{});
  opt.step(p);
  EXPECT_NEAR(p.at("w").values()[0], -0.01, 1e-8);
  EXPECT_NEAR(p.at("w").values()[1], 0.01, 1e-8);
  EXPECT_NEAR(p.at("w").values()[2], -0.01, 1e-6);
  EXPECT_EQ(opt.state().step, 1u);
}

TEST(Optimizer, SkipsParametersWithoutGradient) {
  Parameters<float> p;
  p.emplace("w", Tensor<float>(Shape{1}, {2.0f}));
  Optimizer opt(1.0, OptimizerState{});
  opt.step(p);
  EXPECT_EQ(p.at("w").values()[0], 2.0f);
}

TEST(Optimizer, Names) {
  EXPECT_EQ(parse_optimizer("sgd"), OptimizerKind::sgd);
  EXPECT_EQ(optimizer_name(OptimizerKind::adam), "adam");
  EXPECT_THROW(parse_optimizer("rmsprop"), std::invalid_argument);
  EXPECT_THROW(Optimizer(-1.0, OptimizerState{}), std::invalid_argument);
}

TEST(Trainer, LiteralTeacherCopy) {
  Trainer trainer(tiny_net(), NoiseSchedule{}, tiny_train(1), tiny_data());
  const auto before = clone_parameters(trainer.state().params);
  const double loss = trainer.step();
  EXPECT_TRUE(std::isfinite(loss));
  EXPECT_GT(loss, 0.0);
  EXPECT_FALSE(same(before, trainer.state().params));
  EXPECT_TRUE(same(trainer.state().params, trainer.state().teacher));
  EXPECT_EQ(trainer.state().iteration, 1u);
}

TEST(Trainer, ZeroLearningRateLeavesParameters) {
  for (auto kind : {OptimizerKind::sgd, OptimizerKind::adam}) {
    auto cfg = tiny_train(3);
    cfg.lr = 0.0;
    cfg.optimizer = kind;
    Trainer trainer(tiny_net(), NoiseSchedule{}, cfg, tiny_data());
    const auto before = clone_parameters(trainer.state().params);
    trainer.run();
    EXPECT_TRUE(same(before, trainer.state().params)) << optimizer_name(kind);
  }
}

TEST(Trainer, EmaTeacher) {
  auto cfg = tiny_train(1);
  cfg.ema_decay = 0.75;
  Trainer trainer(tiny_net(), NoiseSchedule{}, cfg, tiny_data());
  const auto before = clone_parameters(trainer.state().teacher);
  trainer.step();
  const auto& s = trainer.state();
  for (const auto& [name, t] : s.teacher) {
    const auto old = before.at(name).values();
    const auto cur = s.params.at(name).values();
    for (std::size_t i = 0; i < t.numel(); ++i) {
      ASSERT_EQ(t.values()[i], 0.75f * old[i] + 0.25f * cur[i]) << name;
    }
  }
}

TEST(Trainer, Deterministic) {
  Trainer a(tiny_net(), NoiseSchedule{}, tiny_train(4), tiny_data());
  Trainer b(tiny_net(), NoiseSchedule{}, tiny_train(4), tiny_data());
  for (int i = 0; i < 4; ++i) EXPECT_EQ(a.step(), b.step());
  EXPECT_TRUE(same(a.state().params, b.state().params));
  EXPECT_EQ(a.state().rng_state, b.state().rng_state);
}

TEST(Trainer, SeedChangesTrajectory) {
  auto other = tiny_train(2);
  other.seed = 10;
  Trainer a(tiny_net(), NoiseSchedule{}, tiny_train(2), tiny_data());
  Trainer b(tiny_net(), NoiseSchedule{}, other, tiny_data());
  a.run();
  b.run();
  EXPECT_FALSE(same(a.state().params, b.state().params));
}

TEST(Trainer, ResumeFromStateIsBitwise) {
  for (auto kind : {OptimizerKind::sgd, OptimizerKind::adam}) {
    auto cfg = tiny_train(6);
    cfg.optimizer = kind;
    cfg.crop_size = 4;
    Trainer full(tiny_net(), NoiseSchedule{}, cfg, tiny_data());
    full.run();
    Trainer first(tiny_net(), NoiseSchedule{}, cfg, tiny_data());
    for (int i = 0; i < 3; ++i) first.step();
    TrainState saved = first.state();
    saved.params = clone_parameters(saved.params);
    saved.teacher = clone_parameters(saved.teacher);
    Trainer second(tiny_net(), NoiseSchedule{}, cfg, tiny_data(), std::move(saved));
    second.run();
    EXPECT_TRUE(same(full.state().params, second.state().params)) << optimizer_name(kind);
    EXPECT_TRUE(same(full.state().teacher, second.state().teacher));
    EXPECT_EQ(full.state().rng_state, second.state().rng_state);
  }
}

TEST(Trainer, Callbacks) {
  std::vector<std::uint64_t> logged, saved;
  TrainCallbacks cb;
  cb.log_every = 2;
  cb.on_log = [&](const TrainRecord& r) {
    logged.push_back(r.iteration);
    EXPECT_TRUE(std::isfinite(r.mean_loss));
    EXPECT_GE(r.steps, 11u);
  };
  cb.checkpoint_every = 2;
  cb.on_checkpoint = [&](const TrainState& s) { saved.push_back(s.iteration); };
  Trainer trainer(tiny_net(), NoiseSchedule{}, tiny_train(5), tiny_data());
  trainer.run(cb);
  EXPECT_EQ(logged, (std::vector<std::uint64_t>{2, 4, 5}));
  EXPECT_EQ(saved, (std::vector<std::uint64_t>{2, 4}));
}

TEST(Trainer, NonFiniteLossAborts) {
  auto cfg = tiny_train(20);
  cfg.optimizer = OptimizerKind::sgd;
  cfg.lr = 1e30;
  Trainer trainer(tiny_net(), NoiseSchedule{}, cfg, tiny_data());
  try {
    trainer.run();
    FAIL() << "expected NonFiniteLossError";
  } catch (const NonFiniteLossError& e) {
    EXPECT_EQ(e.level_indices().size(), cfg.batch);
    const std::string msg = e.what();
    EXPECT_NE(msg.find("iteration"), std::string::npos) << msg;
  }
}

TEST(Trainer, RejectsBadInputs) {
  auto cfg = tiny_train(1);
  cfg.batch = 0;
  EXPECT_THROW(Trainer(tiny_net(), NoiseSchedule{}, cfg, tiny_data()), std::invalid_argument);
  cfg = tiny_train(1);
  cfg.ema_decay = 1.0;
  EXPECT_THROW(Trainer(tiny_net(), NoiseSchedule{}, cfg, tiny_data()), std::invalid_argument);
  const Dataset empty;
  EXPECT_THROW(Trainer(tiny_net(), NoiseSchedule{}, tiny_train(1), empty), std::invalid_argument);
  Dataset mixed = tiny_data();
  mixed.push_back(synth_lowlight_item(1, 99, 16));
  EXPECT_THROW(Trainer(tiny_net(), NoiseSchedule{}, tiny_train(1), mixed), ShapeError);
  const Dataset gray = synth_lowlight(1, 2, 8);
  EXPECT_THROW(Trainer(UNetConfig::for_channels(1), NoiseSchedule{}, tiny_train(1), gray), ShapeError);
}

TEST(Trainer, SingleIterationRun) {
  const auto state = train(tiny_data(), tiny_net(), NoiseSchedule{}, tiny_train(1));
  EXPECT_EQ(state.iteration, 1u);
  EXPECT_EQ(state.optimizer.step, 1u);
}

}  // namespace
}  // namespace ccm
