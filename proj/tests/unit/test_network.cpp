// Copyright 2026 The CCM Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>

#include "ccm/network.hpp"
#include "ccm/ops.hpp"
#include "support/oracles.hpp"

namespace ccm {
namespace {

UNetConfig small_config() {
  UNetConfig cfg = UNetConfig::for_channels(3);
  cfg.base_width = 16;
  cfg.time_embed_dim = 16;
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

void randomize_output(Parameters<float>& p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> n(0.0f, 0.1f);
  for (const char* name : {"out_conv.weight", "out_conv.bias"}) {
    for (auto& x : p.at(name).mutable_values()) x = n(rng);
  }
}

TEST(UNetInit, DeterministicInSeed) {
  const UNet net(small_config());
  EXPECT_TRUE(same(net.init(5), net.init(5)));
  EXPECT_FALSE(same(net.init(5), net.init(6)));
}

TEST(UNetInit, MatchesSpecs) {
  const UNet net(small_config());
  const auto p = net.init(1);
  ASSERT_EQ(p.size(), net.parameter_specs().size());
  for (const auto& spec : net.parameter_specs()) {
    ASSERT_TRUE(p.count(spec.name)) << spec.name;
    EXPECT_EQ(p.at(spec.name).shape(), spec.shape) << spec.name;
  }
  for (float x : p.at("out_conv.weight").values()) EXPECT_EQ(x, 0.0f);
  for (float x : p.at("out_norm.gamma").values()) EXPECT_EQ(x, 1.0f);
  EXPECT_NO_THROW(net.check_parameters(p));
}

TEST(UNetInit, DocumentedNames) {
  const UNet net(small_config());
  const auto p = net.init(1);
  for (const char* name : {"in_conv.weight", "time.fc1.weight", "time.fc2.bias", "down.0.0.conv1.weight",
                           "down.1.0.skip.weight", "mid.emb.weight", "up.0.0.norm2.beta", "out_norm.beta"}) {
    EXPECT_TRUE(p.count(name)) << name;
  }
}

TEST(UNetInit, CheckParametersRejectsMismatch) {
  const UNet net(small_config());
  auto p = net.init(1);
  p.erase("mid.conv1.weight");
  EXPECT_THROW(net.check_parameters(p), ShapeError);
  p = net.init(1);
  p["in_conv.bias"] = Tensor<float>(Shape{3});
  EXPECT_THROW(net.check_parameters(p), ShapeError);
}

TEST(UNetForward, ZeroFinalLayerGivesZeros) {
  const UNet net(small_config());
  const auto p = net.init(2);
  std::mt19937_64 rng(1);
  const auto r = testing::random_image(3, 8, 8, rng).to_tensor();
  const auto v = testing::random_image(3, 8, 8, rng).to_tensor();
  const auto y = net.forward(p, r, v, 3.0);
  ASSERT_EQ(y.shape(), r.shape());
  for (float x : y.values()) EXPECT_EQ(x, 0.0f);
}

TEST(UNetForward, DeterministicAndPure) {
  const UNet net(small_config());
  auto p = net.init(2);
  randomize_output(p, 3);
  std::mt19937_64 rng(1);
  const auto r = testing::random_image(3, 8, 8, rng).to_tensor();
  const auto v = testing::random_image(3, 8, 8, rng).to_tensor();
  const auto before = clone_parameters(p);
  const auto a = net.forward(p, r, v, 3.0);
  const auto b = net.forward(p, r, v, 3.0);
  EXPECT_TRUE(std::equal(a.values().begin(), a.values().end(), b.values().begin()));
  EXPECT_TRUE(same(p, before));
}

TEST(UNetForward, ConditionAndTimeMatter) {
  const UNet net(small_config());
  auto p = net.init(2);
  randomize_output(p, 3);
  std::mt19937_64 rng(1);
  const auto r = testing::random_image(3, 8, 8, rng).to_tensor();
  const auto v = testing::random_image(3, 8, 8, rng).to_tensor();
  auto differs = [](const Tensor<float>& a, const Tensor<float>& b) {
    return !std::equal(a.values().begin(), a.values().end(), b.values().begin());
  };
  const auto base = net.forward(p, r, v, 3.0);
  EXPECT_TRUE(differs(base, net.forward(p, v, r, 3.0)));
  EXPECT_TRUE(differs(base, net.forward(p, r, r, 3.0)));
  EXPECT_TRUE(differs(base, net.forward(p, r, v, 6.0)));
}

TEST(UNetForward, BatchMatchesSingles) {
  const UNet net(small_config());
  auto p = net.init(2);
  randomize_output(p, 3);
  std::mt19937_64 rng(4);
  const auto r = testing::random_tensor({2, 3, 8, 8}, rng).cast<float>();
  const auto v = testing::random_tensor({2, 3, 8, 8}, rng).cast<float>();
  const auto batched = net.forward(p, r, v, Tensor<float>(Shape{2}, {0.5f, 9.0f}));
  const double ts[] = {0.5, 9.0};
  for (std::size_t i = 0; i < 2; ++i) {
    const std::size_t n = 3 * 64;
    const Tensor<float> ri(Shape{3, 8, 8}, {r.values().begin() + i * n, r.values().begin() + (i + 1) * n});
    const Tensor<float> vi(Shape{3, 8, 8}, {v.values().begin() + i * n, v.values().begin() + (i + 1) * n});
    const auto yi = net.forward(p, ri, vi, ts[i]);
    // The GEMM blocking depends on the batch size, so agreement is to rounding.
    for (std::size_t k = 0; k < n; ++k) EXPECT_NEAR(yi.values()[k], batched.values()[i * n + k], 1e-5);
  }
}

TEST(UNetForward, ShapeErrors) {
  const UNet net(small_config());
  const auto p = net.init(2);
  EXPECT_THROW(net.forward(p, Tensor<float>(Shape{3, 8, 8}), Tensor<float>(Shape{3, 8, 6}), 1.0), ShapeError);
  EXPECT_THROW(net.forward(p, Tensor<float>(Shape{2, 8, 8}), Tensor<float>(Shape{2, 8, 8}), 1.0), ShapeError);
  EXPECT_THROW(net.forward(p, Tensor<float>(Shape{3, 7, 8}), Tensor<float>(Shape{3, 7, 8}), 1.0), ShapeError);
}

TEST(UNetConfigValidate, RejectsBadConfigs) {
  auto cfg = small_config();
  cfg.channel_mults.clear();
  EXPECT_THROW(cfg.validate(), std::exception);
  cfg = small_config();
  cfg.time_embed_dim = 7;
  EXPECT_THROW(cfg.validate(), std::exception);
  cfg = small_config();
  EXPECT_THROW(cfg.check_extent(7, 8), ShapeError);
  EXPECT_NO_THROW(cfg.check_extent(8, 8));
}

TEST(TimeEmbed, AtOneIsZerosThenOnes) {
  const auto e = time_embed(1.0, 8);
  ASSERT_EQ(e.size(), 8u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(e[i], 0.0f);
  for (std::size_t i = 4; i < 8; ++i) EXPECT_EQ(e[i], 1.0f);
}

TEST(TimeEmbed, PureAndOddDimRejected) {
  EXPECT_EQ(time_embed(3.7, 16), time_embed(3.7, 16));
  EXPECT_NE(time_embed(3.7, 16), time_embed(7.4, 16));
  EXPECT_THROW(time_embed(1.0, 7), std::exception);
}

class UNetGradient : public ::testing::TestWithParam<std::uint64_t> {};

TEST_P(UNetGradient, EveryParameterGroup) {
  const UNet net(testing::grad_check_net());
  std::vector<std::string> groups;
  for (const auto& spec : net.parameter_specs()) groups.push_back(spec.name);
  for (const auto& r : testing::unet_grad_checks(GetParam(), groups, 4)) {
    EXPECT_LT(r.error, 1e-4) << r.group;
  }
}

INSTANTIATE_TEST_SUITE_P(Seeds, UNetGradient, ::testing::Values(11, 12));

}  // namespace
}  // namespace ccm
