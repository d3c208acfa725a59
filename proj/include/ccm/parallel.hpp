// Copyright 2026 The CCM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>

namespace ccm {

// Worker count used by parallel sections (batch loops in convolutions).
// Results never depend on the count: parallel work writes disjoint outputs and
// reductions run afterwards in a fixed order.
void set_num_threads(std::size_t n);
std::size_t num_threads();

// Calls fn(i) for i in [0, count), splitting contiguous ranges across workers.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

}  // namespace ccm
