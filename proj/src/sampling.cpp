// Copyright 2026 The CCM Authors
// SPDX-License-Identifier: Apache-2.0

#include "ccm/sampling.hpp"

#include <algorithm>
#include <random>

namespace ccm {

Tensor<float> sample_noise(const Shape& shape, std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x736du};
  std::mt19937_64 rng(seq);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  std::vector<float> values(shape_numel(shape));
  for (auto& x : values) x = normal(rng);
  return Tensor<float>(shape, std::move(values));
}

std::vector<Image> sample_batch(const ConsistencyModel& model, const std::vector<Image>& v, std::uint64_t seed,
                                bool clamp) {
  if (v.empty()) return {};
  const auto& first = v.front();
  const auto& cfg = model.net().config();
  for (const auto& img : v) {
    if (!img.same_shape(first)) throw ShapeError("sample: conditions in one batch must share a shape");
  }
  if (first.channels != cfg.out_channels) {
    throw ShapeError("sample: condition has " + std::to_string(first.channels) + " channels, model expects " +
                     std::to_string(cfg.out_channels));
  }
  cfg.check_extent(first.height, first.width);

  const double t_max = model.schedule().sigma_max;
  const float t = static_cast<float>(t_max);
  const std::size_t n = v.size(), per = first.size();
  std::vector<float> cond(n * per), noisy(n * per);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(v[i].data.begin(), v[i].data.end(), cond.begin() + static_cast<std::ptrdiff_t>(i * per));
    const auto z = sample_noise(first.shape(), seed + i);
    std::transform(z.values().begin(), z.values().end(), noisy.begin() + static_cast<std::ptrdiff_t>(i * per),
                   [t](float x) { return t * x; });
  }
  const Shape shape{n, first.channels, first.height, first.width};
  Tensor<float> out;
  {
    NoGradGuard<float> no_grad;
    out = model.g(Tensor<float>(shape, std::move(noisy)), Tensor<float>(shape, std::move(cond)), t_max);
  }
  std::vector<Image> result(n, Image(first.channels, first.height, first.width));
  for (std::size_t i = 0; i < n; ++i) {
    auto src = out.values().subspan(i * per, per);
    std::copy(src.begin(), src.end(), result[i].data.begin());
    if (clamp) {
      for (auto& x : result[i].data) x = std::clamp(x, -1.0f, 1.0f);
    }
  }
  return result;
}

Image sample_single_step(const ConsistencyModel& model, const SampleRequest& req) {
  return sample_batch(model, {req.v}, req.seed, req.clamp).front();
}

}  // namespace ccm
