// Copyright 2026 The CCM Authors
// SPDX-License-Identifier: Apache-2.0
//
// Conditional consistency function and the consistency-training objective.
//
//   g(r, v, t) = a_skip(t) r + a_out(t) G(c_in(t) r, v, t)
//
// with G the U-Net and c_in the input scaling from schedule.hpp. At
// t = sigma_min the skip/out pair is exactly (1, 0), so g returns r
// unchanged.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ccm/network.hpp"
#include "ccm/schedule.hpp"
#include "ccm/tensor.hpp"

namespace ccm {

/// Pseudo-Huber constant 0.00054 * sqrt(D) for D values per sample.
double default_huber_c(std::size_t values_per_sample);

/// sqrt(||a - b||^2 + c^2) - c over all elements; returns shape (1).
template <typename T>
Tensor<T> pseudo_huber(const Tensor<T>& a, const Tensor<T>& b, double c);

/// Per-sample pseudo-Huber distance over all but the leading axis; shape (N).
template <typename T>
Tensor<T> pseudo_huber_rows(const Tensor<T>& a, const Tensor<T>& b, double c);

/// g for a batch: r_t and v are (N,C,H,W) (or (C,H,W) with one level), t
/// holds one noise level per sample, each within [sigma_min, sigma_max].
template <typename T>
Tensor<T> consistency_fn(const UNet& net, const NoiseSchedule& sched, const Parameters<T>& params,
                         const Tensor<T>& r_t, const Tensor<T>& v, std::span<const double> t);

/// Consistency-training loss averaged over the batch:
///   mean_b lambda(t_n) d(g_student(r + t_{n+1} z, v, t_{n+1}), g_teacher(r + t_n z, v, t_n))
/// n holds 1-based level indices with 1 <= n < levels.size(). The teacher
/// branch is evaluated with recording suspended.
template <typename T>
Tensor<T> cct_loss(const UNet& net, const NoiseSchedule& sched, const Parameters<T>& student,
                   const Parameters<T>& teacher, const Tensor<T>& r, const Tensor<T>& v, const Tensor<T>& z,
                   std::span<const std::size_t> n, std::span<const double> levels, double huber_c);

class ConsistencyModel {
 public:
  ConsistencyModel(UNetConfig net_cfg, NoiseSchedule sched, std::uint64_t seed);
  ConsistencyModel(UNetConfig net_cfg, NoiseSchedule sched, Parameters<float> params, Parameters<float> teacher);

  const UNet& net() const { return net_; }
  const NoiseSchedule& schedule() const { return sched_; }
  const Parameters<float>& params() const { return params_; }
  const Parameters<float>& teacher_params() const { return teacher_; }
  Parameters<float>& mutable_params() { return params_; }
  Parameters<float>& mutable_teacher_params() { return teacher_; }

  Tensor<float> g(const Tensor<float>& r_t, const Tensor<float>& v, double t, bool use_teacher = false) const;
  Tensor<float> g(const Tensor<float>& r_t, const Tensor<float>& v, std::span<const double> t,
                  bool use_teacher = false) const;

  /// Loss for a single (C,H,W) pair or a batch; see cct_loss above.
  Tensor<float> loss(const Tensor<float>& r, const Tensor<float>& v, const Tensor<float>& z,
                     std::span<const std::size_t> n, std::span<const double> levels, double huber_c) const;

 private:
  void check() const;

  UNet net_;
  NoiseSchedule sched_;
  Parameters<float> params_;
  Parameters<float> teacher_;
};

}  // namespace ccm
