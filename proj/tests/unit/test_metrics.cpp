// Copyright 2026 The CCM Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "ccm/metrics.hpp"
#include "support/oracles.hpp"

namespace ccm {
namespace {

Image noisy_copy(const Image& a, std::mt19937_64& rng, float sigma) {
  Image b = a;
  std::normal_distribution<float> n(0.0f, sigma);
  for (auto& x : b.data) x = std::clamp(x + n(rng), 0.0f, 1.0f);
  return b;
}

TEST(Psnr, ClosedFormOffset) {
  EXPECT_NEAR(psnr(Image(3, 8, 8, 0.5f), Image(3, 8, 8, 0.6f), 1.0), 20.0, 1e-5);
  EXPECT_NEAR(psnr(Image(1, 4, 4, 0.0f), Image(1, 4, 4, 0.125f), 1.0), 20 * std::log10(8.0), 1e-12);
}

TEST(Psnr, IdenticalIsInfinite) {
  const Image a(3, 4, 4, 0.3f);
  EXPECT_EQ(psnr(a, a, 1.0), std::numeric_limits<double>::infinity());
}

TEST(Psnr, SymmetricScaleInvariantAndMatchesReference) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 30; ++i) {
    const auto a = testing::random_image(3, 9, 11, rng, 0.0f, 1.0f);
    const auto b = noisy_copy(a, rng, 0.2f);
    const double p = psnr(a, b, 1.0);
    EXPECT_EQ(p, psnr(b, a, 1.0));
    EXPECT_NEAR(p, testing::ref_psnr(a, b, 1.0), 1e-6);
    Image a4 = a, b4 = b;
    for (auto& x : a4.data) x *= 4.0f;
    for (auto& x : b4.data) x *= 4.0f;
    EXPECT_NEAR(psnr(a4, b4, 4.0), p, 1e-9);
  }
}

TEST(Psnr, ShapeMismatch) { EXPECT_THROW(psnr(Image(3, 4, 4), Image(3, 4, 5), 1.0), ShapeError); }

TEST(Ssim, SelfSimilarityIsExactlyOne) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 20; ++i) {
    const auto a = testing::random_image(i % 2 ? 3 : 1, 11 + i % 4, 12 + i % 3, rng, 0.0f, 1.0f);
    EXPECT_EQ(ssim(a, a), 1.0);
    EXPECT_EQ(ssim(a, a, {SsimOptions::Mode::per_channel, 1.0}), 1.0);
  }
  const Image flat(1, 12, 12, 0.4f);
  EXPECT_EQ(ssim(flat, flat), 1.0);
}

TEST(Ssim, SymmetricAndMatchesReference) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 20; ++i) {
    const auto a = testing::random_image(3, 16, 13, rng, 0.0f, 1.0f);
    const auto b = noisy_copy(a, rng, 0.1f);
    const double s = ssim(a, b);
    EXPECT_NEAR(s, ssim(b, a), 1e-12);
    EXPECT_NEAR(s, testing::ref_ssim(a, b, 1.0), 1e-4);
    EXPECT_GE(s, -1.0);
    EXPECT_LE(s, 1.0);
  }
}

// A checkerboard has near-zero mean inside every window, so negation flips
// the structure term while the luminance term stays close to 1.
TEST(Ssim, NegatedZeroMeanImageIsNegative) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 5; ++trial) {
    const float amp = std::uniform_real_distribution<float>(0.1f, 0.5f)(rng);
    Image a(1, 16, 16);
    for (std::size_t y = 0; y < 16; ++y)
      for (std::size_t x = 0; x < 16; ++x) a.at(0, y, x) = (x + y) % 2 ? amp : -amp;
    Image b = a;
    for (auto& x : b.data) x = -x;
    EXPECT_LT(ssim(a, b), 0.0) << amp;
  }
}

TEST(Ssim, TooSmall) {
  EXPECT_THROW(ssim(Image(1, 10, 20), Image(1, 10, 20)), std::invalid_argument);
}

Dataset pairs(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Dataset data;
  for (std::size_t i = 0; i < n; ++i) {
    auto r = testing::random_image(3, 16, 16, rng);
    auto v = testing::random_image(3, 16, 16, rng);
    data.push_back({v, r, "item" + std::to_string(i)});
  }
  return data;
}

const Predictor identity = [](const Image& v, std::uint64_t) { return v; };

TEST(Evaluate, PerfectPredictor) {
  auto data = pairs(4, 5);
  for (auto& p : data) p.v = p.r;
  const auto report = evaluate(data, identity, {});
  EXPECT_EQ(report.count, 4u);
  EXPECT_EQ(report.mean_ssim, 1.0);
  EXPECT_EQ(report.mean_psnr, std::numeric_limits<double>::infinity());
}

TEST(Evaluate, SingleItemMean) {
  const auto data = pairs(1, 6);
  const auto report = evaluate(data, identity, {});
  ASSERT_EQ(report.items.size(), 1u);
  EXPECT_EQ(report.mean_psnr, report.items[0].psnr);
  EXPECT_EQ(report.mean_ssim, report.items[0].ssim);
  const auto unit_v = to_unit_range(data[0].v), unit_r = to_unit_range(data[0].r);
  EXPECT_EQ(report.items[0].psnr, psnr(unit_v, unit_r, 1.0));
}

TEST(Evaluate, OrderInvariantWithSeededPredictor) {
  auto data = pairs(6, 7);
  const Predictor noisy = [](const Image& v, std::uint64_t seed) {
    Image out = v;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(-0.1f, 0.1f);
    for (auto& x : out.data) x = std::clamp(x + u(rng), -1.0f, 1.0f);
    return out;
  };
  const auto a = evaluate(data, noisy, {});
  std::reverse(data.begin(), data.end());
  const auto b = evaluate(data, noisy, {});
  EXPECT_EQ(a.to_csv(), b.to_csv());
  EXPECT_EQ(a.items.front().id, "item0");
}

TEST(Evaluate, ModesAndText) {
  const auto data = pairs(3, 8);
  EvalOptions crop;
  crop.size = 12;
  EvalOptions full;
  full.mode = EvalMode::full_resize;
  full.size = 12;
  const auto a = evaluate(data, identity, crop);
  const auto b = evaluate(data, identity, full);
  EXPECT_NE(a.to_text(), b.to_text());
  EXPECT_NE(a.to_text().find("mode: crop"), std::string::npos);
  EXPECT_NE(b.to_text().find("mode: full-resize"), std::string::npos);
  EXPECT_EQ(b.to_csv().rfind("# mode=full-resize", 0), 0u);
  EXPECT_EQ(parse_eval_mode("full-resize"), EvalMode::full_resize);
  EXPECT_THROW(parse_eval_mode("whole"), std::invalid_argument);
}

TEST(Evaluate, EvalView) {
  const auto pair = pairs(1, 9)[0];
  EvalOptions opts;
  opts.size = 12;
  EXPECT_EQ(eval_view(pair, opts).v.shape(), (Shape{3, 12, 12}));
  opts.mode = EvalMode::full_resize;
  EXPECT_EQ(eval_view(pair, opts).r.shape(), (Shape{3, 12, 12}));
  opts.size = 0;
  EXPECT_EQ(eval_view(pair, opts).r.data, pair.r.data);
}

TEST(Evaluate, EmptyDatasetFails) { EXPECT_THROW(evaluate({}, identity, {}), std::invalid_argument); }

}  // namespace
}  // namespace ccm
