// Copyright 2026 The CCM Authors
// SPDX-License-Identifier: Apache-2.0

#include "ccm/consistency.hpp"

#include <cmath>
#include <string>

#include "ccm/ops.hpp"

namespace ccm {

double default_huber_c(std::size_t values_per_sample) {
  return 0.00054 * std::sqrt(static_cast<double>(values_per_sample));
}

template <typename T>
Tensor<T> pseudo_huber_rows(const Tensor<T>& a, const Tensor<T>& b, double c) {
  if (!(c > 0)) throw std::invalid_argument("pseudo_huber: c must be positive");
  if (!a.defined() || !b.defined() || a.shape() != b.shape()) {
    throw ShapeError("pseudo_huber: shape mismatch " + (a.defined() ? shape_str(a.shape()) : "<undefined>") + " vs " +
                     (b.defined() ? shape_str(b.shape()) : "<undefined>"));
  }
  auto diff = sub(a, b);
  auto sq = sum_rows(mul(diff, diff));
  return add_scalar(sqrt(add_scalar(sq, static_cast<T>(c * c))), static_cast<T>(-c));
}

template <typename T>
Tensor<T> pseudo_huber(const Tensor<T>& a, const Tensor<T>& b, double c) {
  if (!a.defined() || !b.defined()) throw ShapeError("pseudo_huber: undefined input");
  const auto n = a.numel();
  return pseudo_huber_rows(reshape(a, Shape{1, n}), reshape(b, Shape{1, n}), c);
}

template <typename T>
Tensor<T> consistency_fn(const UNet& net, const NoiseSchedule& sched, const Parameters<T>& params,
                         const Tensor<T>& r_t, const Tensor<T>& v, std::span<const double> t) {
  if (!r_t.defined() || (r_t.rank() != 3 && r_t.rank() != 4)) {
    throw ShapeError("consistency: noisy target must be (C,H,W) or (N,C,H,W)");
  }
  const std::size_t batch = r_t.rank() == 4 ? r_t.dim(0) : 1;
  if (t.size() != batch) {
    throw ShapeError("consistency: " + std::to_string(t.size()) + " noise levels for a batch of " +
                     std::to_string(batch));
  }
  std::vector<T> skip(batch), out(batch), cin(batch), tv(batch);
  bool boundary = true;
  for (std::size_t i = 0; i < batch; ++i) {
    const auto s = scalings(sched, t[i]);
    skip[i] = static_cast<T>(s.skip);
    out[i] = static_cast<T>(s.out);
    cin[i] = static_cast<T>(input_scale(sched, t[i]));
    tv[i] = static_cast<T>(t[i]);
    boundary = boundary && s.out == 0.0;
  }
  const bool batched = r_t.rank() == 4;
  auto as_batch = [&](const Tensor<T>& x) {
    return batched ? x : reshape(x, Shape{1, x.dim(0), x.dim(1), x.dim(2)});
  };
  const auto r4 = as_batch(r_t);
  const Tensor<T> skip_t(Shape{batch}, std::move(skip));
  Tensor<T> result;
  if (boundary) {
    // a_out == 0 for every sample: the network term vanishes identically.
    result = scale_rows(r4, skip_t);
  } else {
    if (!v.defined() || v.shape() != r_t.shape()) {
      throw ShapeError("consistency: condition " + (v.defined() ? shape_str(v.shape()) : "<undefined>") +
                       " does not match noisy target " + shape_str(r_t.shape()));
    }
    const Tensor<T> cin_t(Shape{batch}, std::move(cin));
    const Tensor<T> out_t(Shape{batch}, std::move(out));
    auto g_net = net.forward(params, scale_rows(r4, cin_t), as_batch(v), Tensor<T>(Shape{batch}, std::move(tv)));
    result = add(scale_rows(r4, skip_t), scale_rows(g_net, out_t));
  }
  return batched ? result : reshape(result, r_t.shape());
}

template <typename T>
Tensor<T> cct_loss(const UNet& net, const NoiseSchedule& sched, const Parameters<T>& student,
                   const Parameters<T>& teacher, const Tensor<T>& r, const Tensor<T>& v, const Tensor<T>& z,
                   std::span<const std::size_t> n, std::span<const double> levels, double huber_c) {
  if (!r.defined() || !z.defined() || r.shape() != z.shape()) throw ShapeError("cct_loss: r and z must share a shape");
  const bool batched = r.rank() == 4;
  const std::size_t batch = batched ? r.dim(0) : 1;
  if (n.size() != batch) throw ShapeError("cct_loss: need one level index per sample");
  std::vector<double> t_lo(batch), t_hi(batch);
  std::vector<T> lambda(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    if (n[i] < 1 || n[i] >= levels.size()) {
      throw std::out_of_range("cct_loss: level index " + std::to_string(n[i]) + " outside [1, " +
                              std::to_string(levels.size() - 1) + "]");
    }
    t_lo[i] = levels[n[i] - 1];
    t_hi[i] = levels[n[i]];
    lambda[i] = static_cast<T>(weighting(t_lo[i], t_hi[i]));
  }
  auto r4 = batched ? r : reshape(r, Shape{1, r.dim(0), r.dim(1), r.dim(2)});
  auto v4 = batched ? v : reshape(v, Shape{1, v.dim(0), v.dim(1), v.dim(2)});
  auto z4 = batched ? z : reshape(z, Shape{1, z.dim(0), z.dim(1), z.dim(2)});

  auto noised = [&](const std::vector<double>& t) {
    std::vector<T> tt(t.begin(), t.end());
    return add(r4, scale_rows(z4, Tensor<T>(Shape{batch}, std::move(tt))));
  };

  Tensor<T> target;
  {
    NoGradGuard<T> no_grad;
    target = consistency_fn(net, sched, teacher, noised(t_lo), v4, t_lo);
  }
  auto pred = consistency_fn(net, sched, student, noised(t_hi), v4, t_hi);
  auto d = pseudo_huber_rows(pred, target, huber_c);
  return mean(scale_rows(d, Tensor<T>(Shape{batch}, std::move(lambda))));
}

ConsistencyModel::ConsistencyModel(UNetConfig net_cfg, NoiseSchedule sched, std::uint64_t seed)
    : net_(std::move(net_cfg)), sched_(sched), params_(net_.init(seed)), teacher_(clone_parameters(params_)) {
  check();
}

ConsistencyModel::ConsistencyModel(UNetConfig net_cfg, NoiseSchedule sched, Parameters<float> params,
                                   Parameters<float> teacher)
    : net_(std::move(net_cfg)), sched_(sched), params_(std::move(params)), teacher_(std::move(teacher)) {
  check();
}

void ConsistencyModel::check() const {
  sched_.validate();
  net_.check_parameters(params_);
  net_.check_parameters(teacher_);
}

Tensor<float> ConsistencyModel::g(const Tensor<float>& r_t, const Tensor<float>& v, double t, bool use_teacher) const {
  const std::size_t batch = r_t.defined() && r_t.rank() == 4 ? r_t.dim(0) : 1;
  std::vector<double> levels(batch, t);
  return g(r_t, v, levels, use_teacher);
}

Tensor<float> ConsistencyModel::g(const Tensor<float>& r_t, const Tensor<float>& v, std::span<const double> t,
                                  bool use_teacher) const {
  return consistency_fn(net_, sched_, use_teacher ? teacher_ : params_, r_t, v, t);
}

Tensor<float> ConsistencyModel::loss(const Tensor<float>& r, const Tensor<float>& v, const Tensor<float>& z,
                                     std::span<const std::size_t> n, std::span<const double> levels,
                                     double huber_c) const {
  return cct_loss(net_, sched_, params_, teacher_, r, v, z, n, levels, huber_c);
}

#define CCM_INSTANTIATE_CONSISTENCY(T)                                                                            \
  template Tensor<T> pseudo_huber<T>(const Tensor<T>&, const Tensor<T>&, double);                                  \
  template Tensor<T> pseudo_huber_rows<T>(const Tensor<T>&, const Tensor<T>&, double);                             \
  template Tensor<T> consistency_fn<T>(const UNet&, const NoiseSchedule&, const Parameters<T>&, const Tensor<T>&, \
                                       const Tensor<T>&, std::span<const double>);                                 \
  template Tensor<T> cct_loss<T>(const UNet&, const NoiseSchedule&, const Parameters<T>&, const Parameters<T>&,    \
                                 const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, std::span<const std::size_t>, \
                                 std::span<const double>, double);

CCM_INSTANTIATE_CONSISTENCY(float)
CCM_INSTANTIATE_CONSISTENCY(double)

}  // namespace ccm
