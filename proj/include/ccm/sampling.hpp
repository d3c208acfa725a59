// Copyright 2026 The CCM Authors
// SPDX-License-Identifier: Apache-2.0
//
// Single-step generation: r = g(T z, v, T) with z ~ N(0, I) drawn from the
// request seed.

#pragma once

#include <cstdint>
#include <vector>

#include "ccm/consistency.hpp"
#include "ccm/image.hpp"

namespace ccm {

struct SampleRequest {
  Image v;
  std::uint64_t seed = 0;
  bool clamp = true;
};

/// Standard normal noise of the given shape, a pure function of seed.
Tensor<float> sample_noise(const Shape& shape, std::uint64_t seed);

Image sample_single_step(const ConsistencyModel& model, const SampleRequest& req);

/// Element i uses seed + i. Evaluated as one network batch; each output
/// depends only on its own condition and seed.
std::vector<Image> sample_batch(const ConsistencyModel& model, const std::vector<Image>& v, std::uint64_t seed,
                                bool clamp = true);

}  // namespace ccm
