// Copyright 2026 The CCM Authors
// SPDX-License-Identifier: Apache-2.0

#include "ccm/ops.hpp"

#include <Eigen/Core>
#include <cmath>
#include <numeric>
#include <string>

#include "ccm/parallel.hpp"

namespace ccm {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using MapConstMat = Eigen::Map<const RowMat<T>>;

[[noreturn]] void shape_fail(std::string_view op, const std::string& what) {
  throw ShapeError(std::string(op) + ": " + what);
}

struct ImageDims {
  std::size_t n, c, h, w;
  std::size_t plane() const { return h * w; }
};

template <typename T>
ImageDims image_dims(const Tensor<T>& x, std::string_view op) {
  if (!x.defined()) shape_fail(op, "undefined input");
  const auto& s = x.shape();
  if (s.size() == 3) return {1, s[0], s[1], s[2]};
  if (s.size() == 4) return {s[0], s[1], s[2], s[3]};
  shape_fail(op, "expected (C,H,W) or (N,C,H,W), got " + shape_str(s));
}

template <typename T>
Shape image_shape(const Tensor<T>& like, std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
  if (like.rank() == 3) return {c, h, w};
  return {n, c, h, w};
}

template <typename T>
void require_same_shape(std::string_view op, const Tensor<T>& a, const Tensor<T>& b) {
  if (!a.defined() || !b.defined()) shape_fail(op, "undefined input");
  if (a.shape() != b.shape()) shape_fail(op, "shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

// col is (Cin*k*k, Ho*Wo).
template <typename T>
void im2col(const T* x, std::size_t cin, std::size_t h, std::size_t w, std::size_t k, std::size_t pad,
            std::size_t ho, std::size_t wo, T* col) {
  const auto ip = static_cast<std::ptrdiff_t>(pad);
  for (std::size_t ci = 0; ci < cin; ++ci) {
    const T* plane = x + ci * h * w;
    for (std::size_t ki = 0; ki < k; ++ki) {
      for (std::size_t kj = 0; kj < k; ++kj) {
        T* row = col + ((ci * k + ki) * k + kj) * ho * wo;
        for (std::size_t oh = 0; oh < ho; ++oh) {
          auto ih = static_cast<std::ptrdiff_t>(oh + ki) - ip;
          T* dst = row + oh * wo;
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(h)) {
            std::fill(dst, dst + wo, T(0));
            continue;
          }
          const T* src = plane + static_cast<std::size_t>(ih) * w;
          for (std::size_t ow = 0; ow < wo; ++ow) {
            auto iw = static_cast<std::ptrdiff_t>(ow + kj) - ip;
            dst[ow] = (iw < 0 || iw >= static_cast<std::ptrdiff_t>(w)) ? T(0) : src[iw];
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, std::size_t cin, std::size_t h, std::size_t w, std::size_t k, std::size_t pad,
                std::size_t ho, std::size_t wo, T* x) {
  const auto ip = static_cast<std::ptrdiff_t>(pad);
  for (std::size_t ci = 0; ci < cin; ++ci) {
    T* plane = x + ci * h * w;
    for (std::size_t ki = 0; ki < k; ++ki) {
      for (std::size_t kj = 0; kj < k; ++kj) {
        const T* row = col + ((ci * k + ki) * k + kj) * ho * wo;
        for (std::size_t oh = 0; oh < ho; ++oh) {
          auto ih = static_cast<std::ptrdiff_t>(oh + ki) - ip;
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(h)) continue;
          T* dst = plane + static_cast<std::size_t>(ih) * w;
          const T* src = row + oh * wo;
          for (std::size_t ow = 0; ow < wo; ++ow) {
            auto iw = static_cast<std::ptrdiff_t>(ow + kj) - ip;
            if (iw >= 0 && iw < static_cast<std::ptrdiff_t>(w)) dst[iw] += src[ow];
          }
        }
      }
    }
  }
}

template <typename T>
Tensor<T> elementwise_binary(std::string_view op, const Tensor<T>& a, const Tensor<T>& b, int kind) {
  require_same_shape(op, a, b);
  const auto n = a.numel();
  std::vector<T> out(n);
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = kind == 0 ? av[i] + bv[i] : kind == 1 ? av[i] - bv[i] : av[i] * bv[i];
  }
  auto ad = a.data();
  auto bd = b.data();
  return make_result<T>(op, a.shape(), std::move(out), {a, b},
                        [ad, bd, kind](std::span<const T> g, std::span<std::vector<T>*> gin) {
                          const auto n = g.size();
                          if (auto* da = gin[0]) {
                            if (kind == 2) {
                              for (std::size_t i = 0; i < n; ++i) (*da)[i] += g[i] * bd->values[i];
                            } else {
                              for (std::size_t i = 0; i < n; ++i) (*da)[i] += g[i];
                            }
                          }
                          if (auto* db = gin[1]) {
                            if (kind == 2) {
                              for (std::size_t i = 0; i < n; ++i) (*db)[i] += g[i] * ad->values[i];
                            } else if (kind == 1) {
                              for (std::size_t i = 0; i < n; ++i) (*db)[i] -= g[i];
                            } else {
                              for (std::size_t i = 0; i < n; ++i) (*db)[i] += g[i];
                            }
                          }
                        });
}

}  // namespace

std::size_t default_groups(std::size_t channels) {
  std::size_t g = std::min<std::size_t>(8, channels);
  while (g > 1 && channels % g != 0) --g;
  return std::max<std::size_t>(g, 1);
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias, Padding padding) {
  constexpr std::string_view op = "conv2d";
  const auto d = image_dims(x, op);
  if (!weight.defined() || weight.rank() != 4) shape_fail(op, "weight must be (Cout,Cin,k,k)");
  const auto cout = weight.dim(0);
  const auto k = weight.dim(2);
  if (weight.dim(1) != d.c) {
    shape_fail(op, "input has " + std::to_string(d.c) + " channels but weight " + shape_str(weight.shape()) +
                       " expects " + std::to_string(weight.dim(1)));
  }
  if (weight.dim(3) != k) shape_fail(op, "kernel must be square, got " + shape_str(weight.shape()));
  if (bias.defined() && bias.shape() != Shape{cout}) {
    shape_fail(op, "bias " + shape_str(bias.shape()) + " does not match " + std::to_string(cout) + " output channels");
  }
  std::size_t pad = 0;
  if (padding == Padding::same) {
    if (k % 2 == 0) shape_fail(op, "same padding needs an odd kernel, got " + std::to_string(k));
    pad = k / 2;
  } else if (d.h < k || d.w < k) {
    shape_fail(op, "input " + shape_str(x.shape()) + " smaller than kernel " + std::to_string(k));
  }
  const auto ho = d.h + 2 * pad - k + 1;
  const auto wo = d.w + 2 * pad - k + 1;
  const auto kk = d.c * k * k;
  const auto p = ho * wo;
  const bool direct = k == 1 && pad == 0;

  std::vector<T> out(d.n * cout * p);
  {
    const T* xv = x.values().data();
    const T* wv = weight.values().data();
    const T* bv = bias.defined() ? bias.values().data() : nullptr;
    parallel_for(d.n, [&](std::size_t n) {
      std::vector<T> col;
      const T* colp = xv + n * d.c * d.plane();
      if (!direct) {
        col.resize(kk * p);
        im2col(colp, d.c, d.h, d.w, k, pad, ho, wo, col.data());
        colp = col.data();
      }
      MapConstMat<T> wm(wv, cout, kk);
      MapConstMat<T> cm(colp, kk, p);
      MapMat<T> om(out.data() + n * cout * p, cout, p);
      om.noalias() = wm * cm;
      if (bv) {
        for (std::size_t co = 0; co < cout; ++co) om.row(co).array() += bv[co];
      }
    });
  }

  auto xd = x.data();
  auto wd = weight.data();
  const bool has_bias = bias.defined();
  return make_result<T>(
      op, image_shape(x, d.n, cout, ho, wo), std::move(out), {x, weight, bias},
      [=](std::span<const T> g, std::span<std::vector<T>*> gin) {
        auto* dx = gin[0];
        auto* dw = gin[1];
        auto* db = has_bias ? gin[2] : nullptr;
        std::vector<T> partial;
        if (dw) partial.resize(d.n * cout * kk);
        const T* xv = xd->values.data();
        const T* wv = wd->values.data();
        parallel_for(d.n, [&](std::size_t n) {
          MapConstMat<T> gm(g.data() + n * cout * p, cout, p);
          if (dw) {
            std::vector<T> col;
            const T* colp = xv + n * d.c * d.plane();
            if (!direct) {
              col.resize(kk * p);
              im2col(colp, d.c, d.h, d.w, k, pad, ho, wo, col.data());
              colp = col.data();
            }
            MapConstMat<T> cm(colp, kk, p);
            MapMat<T> pm(partial.data() + n * cout * kk, cout, kk);
            pm.noalias() = gm * cm.transpose();
          }
          if (dx) {
            MapConstMat<T> wm(wv, cout, kk);
            T* dxn = dx->data() + n * d.c * d.plane();
            if (direct) {
              MapMat<T> dm(dxn, kk, p);
              dm.noalias() += wm.transpose() * gm;
            } else {
              std::vector<T> dcol(kk * p);
              MapMat<T> dm(dcol.data(), kk, p);
              dm.noalias() = wm.transpose() * gm;
              col2im_add(dcol.data(), d.c, d.h, d.w, k, pad, ho, wo, dxn);
            }
          }
        });
        if (dw) {
          for (std::size_t n = 0; n < d.n; ++n) {
            const T* src = partial.data() + n * cout * kk;
            for (std::size_t i = 0; i < cout * kk; ++i) (*dw)[i] += src[i];
          }
        }
        if (db) {
          for (std::size_t n = 0; n < d.n; ++n) {
            for (std::size_t co = 0; co < cout; ++co) {
              const T* row = g.data() + (n * cout + co) * p;
              T acc = 0;
              for (std::size_t i = 0; i < p; ++i) acc += row[i];
              (*db)[co] += acc;
            }
          }
        }
      });
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  constexpr std::string_view op = "linear";
  if (!x.defined() || (x.rank() != 1 && x.rank() != 2)) shape_fail(op, "input must be (in) or (N,in)");
  if (!weight.defined() || weight.rank() != 2) shape_fail(op, "weight must be (out,in)");
  const std::size_t rows = x.rank() == 2 ? x.dim(0) : 1;
  const std::size_t in = x.shape().back();
  const std::size_t outf = weight.dim(0);
  if (weight.dim(1) != in) {
    shape_fail(op, "input width " + std::to_string(in) + " does not match weight " + shape_str(weight.shape()));
  }
  if (bias.defined() && bias.shape() != Shape{outf}) {
    shape_fail(op, "bias " + shape_str(bias.shape()) + " does not match " + std::to_string(outf) + " outputs");
  }
  std::vector<T> out(rows * outf);
  MapConstMat<T> xm(x.values().data(), rows, in);
  MapConstMat<T> wm(weight.values().data(), outf, in);
  MapMat<T> om(out.data(), rows, outf);
  om.noalias() = xm * wm.transpose();
  if (bias.defined()) {
    auto bv = bias.values();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t o = 0; o < outf; ++o) om(r, o) += bv[o];
  }
  Shape shape = x.rank() == 2 ? Shape{rows, outf} : Shape{outf};
  auto xd = x.data();
  auto wd = weight.data();
  const bool has_bias = bias.defined();
  return make_result<T>(op, std::move(shape), std::move(out), {x, weight, bias},
                        [=](std::span<const T> g, std::span<std::vector<T>*> gin) {
                          MapConstMat<T> gm(g.data(), rows, outf);
                          if (auto* dx = gin[0]) {
                            MapConstMat<T> wm(wd->values.data(), outf, in);
                            MapMat<T> dm(dx->data(), rows, in);
                            dm.noalias() += gm * wm;
                          }
                          if (auto* dw = gin[1]) {
                            MapConstMat<T> xm(xd->values.data(), rows, in);
                            MapMat<T> dm(dw->data(), outf, in);
                            dm.noalias() += gm.transpose() * xm;
                          }
                          if (has_bias) {
                            if (auto* db = gin[2]) {
                              for (std::size_t r = 0; r < rows; ++r)
                                for (std::size_t o = 0; o < outf; ++o) (*db)[o] += gm(r, o);
                            }
                          }
                        });
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  constexpr std::string_view op = "concat_channels";
  const auto da = image_dims(a, op);
  const auto db = image_dims(b, op);
  if (a.rank() != b.rank() || da.n != db.n || da.h != db.h || da.w != db.w) {
    shape_fail(op, "cannot concatenate " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  const auto c = da.c + db.c;
  const auto pa = da.c * da.plane();
  const auto pb = db.c * db.plane();
  std::vector<T> out(da.n * (pa + pb));
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t n = 0; n < da.n; ++n) {
    std::copy_n(av.data() + n * pa, pa, out.data() + n * (pa + pb));
    std::copy_n(bv.data() + n * pb, pb, out.data() + n * (pa + pb) + pa);
  }
  return make_result<T>(op, image_shape(a, da.n, c, da.h, da.w), std::move(out), {a, b},
                        [=](std::span<const T> g, std::span<std::vector<T>*> gin) {
                          for (std::size_t n = 0; n < da.n; ++n) {
                            const T* src = g.data() + n * (pa + pb);
                            if (auto* ga = gin[0])
                              for (std::size_t i = 0; i < pa; ++i) (*ga)[n * pa + i] += src[i];
                            if (auto* gb = gin[1])
                              for (std::size_t i = 0; i < pb; ++i) (*gb)[n * pb + i] += src[pa + i];
                          }
                        });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return elementwise_binary<T>("add", a, b, 0);
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return elementwise_binary<T>("sub", a, b, 1);
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return elementwise_binary<T>("mul", a, b, 2);
}

template <typename T>
Tensor<T> silu(const Tensor<T>& x) {
  if (!x.defined()) shape_fail("silu", "undefined input");
  auto xv = x.values();
  std::vector<T> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] / (T(1) + std::exp(-xv[i]));
  auto xd = x.data();
  return make_result<T>("silu", x.shape(), std::move(out), {x},
                        [xd](std::span<const T> g, std::span<std::vector<T>*> gin) {
                          auto* dx = gin[0];
                          const auto& xv = xd->values;
                          for (std::size_t i = 0; i < g.size(); ++i) {
                            T s = T(1) / (T(1) + std::exp(-xv[i]));
                            (*dx)[i] += g[i] * s * (T(1) + xv[i] * (T(1) - s));
                          }
                        });
}

template <typename T>
Tensor<T> group_norm(const Tensor<T>& x, std::size_t groups, const Tensor<T>& gamma, const Tensor<T>& beta,
                     double eps) {
  constexpr std::string_view op = "group_norm";
  const auto d = image_dims(x, op);
  if (groups == 0 || d.c % groups != 0) {
    shape_fail(op, std::to_string(groups) + " groups do not divide " + std::to_string(d.c) + " channels");
  }
  if (!gamma.defined() || !beta.defined() || gamma.shape() != Shape{d.c} || beta.shape() != Shape{d.c}) {
    shape_fail(op, "gamma and beta must be (" + std::to_string(d.c) + ")");
  }
  const auto cg = d.c / groups;
  const auto slab = cg * d.plane();
  auto xv = x.values();
  auto gv = gamma.values();
  auto bv = beta.values();
  std::vector<T> xhat(xv.size());
  std::vector<double> inv_std(d.n * groups);
  std::vector<T> out(xv.size());
  for (std::size_t n = 0; n < d.n; ++n) {
    for (std::size_t gi = 0; gi < groups; ++gi) {
      const auto off = (n * groups + gi) * slab;
      double m = 0;
      for (std::size_t i = 0; i < slab; ++i) m += xv[off + i];
      m /= static_cast<double>(slab);
      double var = 0;
      for (std::size_t i = 0; i < slab; ++i) {
        double dv = xv[off + i] - m;
        var += dv * dv;
      }
      var /= static_cast<double>(slab);
      const double is = 1.0 / std::sqrt(var + eps);
      inv_std[n * groups + gi] = is;
      for (std::size_t i = 0; i < slab; ++i) {
        const auto c = gi * cg + i / d.plane();
        xhat[off + i] = static_cast<T>((xv[off + i] - m) * is);
        out[off + i] = gv[c] * xhat[off + i] + bv[c];
      }
    }
  }
  auto gd = gamma.data();
  return make_result<T>(
      op, x.shape(), std::move(out), {x, gamma, beta},
      [=, xhat = std::move(xhat), inv_std = std::move(inv_std)](std::span<const T> g, std::span<std::vector<T>*> gin) {
        const auto& gv = gd->values;
        if (auto* dgam = gin[1]) {
          for (std::size_t n = 0; n < d.n; ++n)
            for (std::size_t c = 0; c < d.c; ++c) {
              const auto off = (n * d.c + c) * d.plane();
              double acc = 0;
              for (std::size_t i = 0; i < d.plane(); ++i) acc += static_cast<double>(g[off + i]) * xhat[off + i];
              (*dgam)[c] += static_cast<T>(acc);
            }
        }
        if (auto* dbet = gin[2]) {
          for (std::size_t n = 0; n < d.n; ++n)
            for (std::size_t c = 0; c < d.c; ++c) {
              const auto off = (n * d.c + c) * d.plane();
              double acc = 0;
              for (std::size_t i = 0; i < d.plane(); ++i) acc += g[off + i];
              (*dbet)[c] += static_cast<T>(acc);
            }
        }
        if (auto* dx = gin[0]) {
          for (std::size_t n = 0; n < d.n; ++n) {
            for (std::size_t gi = 0; gi < groups; ++gi) {
              const auto off = (n * groups + gi) * slab;
              double m1 = 0, m2 = 0;
              for (std::size_t i = 0; i < slab; ++i) {
                const double dxh = static_cast<double>(g[off + i]) * gv[gi * cg + i / d.plane()];
                m1 += dxh;
                m2 += dxh * xhat[off + i];
              }
              m1 /= static_cast<double>(slab);
              m2 /= static_cast<double>(slab);
              const double is = inv_std[n * groups + gi];
              for (std::size_t i = 0; i < slab; ++i) {
                const double dxh = static_cast<double>(g[off + i]) * gv[gi * cg + i / d.plane()];
                (*dx)[off + i] += static_cast<T>(is * (dxh - m1 - xhat[off + i] * m2));
              }
            }
          }
        }
      });
}

template <typename T>
Tensor<T> upsample_nearest2x(const Tensor<T>& x) {
  constexpr std::string_view op = "upsample_nearest2x";
  const auto d = image_dims(x, op);
  const auto h2 = d.h * 2, w2 = d.w * 2;
  auto xv = x.values();
  std::vector<T> out(d.n * d.c * h2 * w2);
  for (std::size_t pl = 0; pl < d.n * d.c; ++pl)
    for (std::size_t i = 0; i < h2; ++i)
      for (std::size_t j = 0; j < w2; ++j) out[(pl * h2 + i) * w2 + j] = xv[(pl * d.h + i / 2) * d.w + j / 2];
  return make_result<T>(op, image_shape(x, d.n, d.c, h2, w2), std::move(out), {x},
                        [=](std::span<const T> g, std::span<std::vector<T>*> gin) {
                          auto& dx = *gin[0];
                          for (std::size_t pl = 0; pl < d.n * d.c; ++pl)
                            for (std::size_t i = 0; i < h2; ++i)
                              for (std::size_t j = 0; j < w2; ++j)
                                dx[(pl * d.h + i / 2) * d.w + j / 2] += g[(pl * h2 + i) * w2 + j];
                        });
}

template <typename T>
Tensor<T> avgpool2x(const Tensor<T>& x) {
  constexpr std::string_view op = "avgpool2x";
  const auto d = image_dims(x, op);
  if (d.h % 2 || d.w % 2) shape_fail(op, "spatial extents must be even, got " + shape_str(x.shape()));
  const auto h2 = d.h / 2, w2 = d.w / 2;
  auto xv = x.values();
  std::vector<T> out(d.n * d.c * h2 * w2);
  for (std::size_t pl = 0; pl < d.n * d.c; ++pl)
    for (std::size_t i = 0; i < h2; ++i)
      for (std::size_t j = 0; j < w2; ++j) {
        const T* base = xv.data() + (pl * d.h + 2 * i) * d.w + 2 * j;
        out[(pl * h2 + i) * w2 + j] = (base[0] + base[1] + base[d.w] + base[d.w + 1]) * T(0.25);
      }
  return make_result<T>(op, image_shape(x, d.n, d.c, h2, w2), std::move(out), {x},
                        [=](std::span<const T> g, std::span<std::vector<T>*> gin) {
                          auto& dx = *gin[0];
                          for (std::size_t pl = 0; pl < d.n * d.c; ++pl)
                            for (std::size_t i = 0; i < d.h; ++i)
                              for (std::size_t j = 0; j < d.w; ++j)
                                dx[(pl * d.h + i) * d.w + j] += g[(pl * h2 + i / 2) * w2 + j / 2] * T(0.25);
                        });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  if (!x.defined()) shape_fail("scale", "undefined input");
  auto xv = x.values();
  std::vector<T> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] * factor;
  return make_result<T>("scale", x.shape(), std::move(out), {x},
                        [factor](std::span<const T> g, std::span<std::vector<T>*> gin) {
                          for (std::size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += g[i] * factor;
                        });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& x, T offset) {
  if (!x.defined()) shape_fail("add_scalar", "undefined input");
  auto xv = x.values();
  std::vector<T> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] + offset;
  return make_result<T>("add_scalar", x.shape(), std::move(out), {x},
                        [](std::span<const T> g, std::span<std::vector<T>*> gin) {
                          for (std::size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += g[i];
                        });
}

template <typename T>
Tensor<T> scale_rows(const Tensor<T>& x, const Tensor<T>& s) {
  constexpr std::string_view op = "scale_rows";
  if (!x.defined() || !s.defined()) shape_fail(op, "undefined input");
  const auto rows = x.dim(0);
  if (s.shape() != Shape{rows}) {
    shape_fail(op, "scales " + shape_str(s.shape()) + " do not match leading extent of " + shape_str(x.shape()));
  }
  const auto len = x.numel() / rows;
  auto xv = x.values();
  auto sv = s.values();
  std::vector<T> out(xv.size());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t i = 0; i < len; ++i) out[r * len + i] = xv[r * len + i] * sv[r];
  auto xd = x.data();
  auto sd = s.data();
  return make_result<T>(op, x.shape(), std::move(out), {x, s},
                        [=](std::span<const T> g, std::span<std::vector<T>*> gin) {
                          if (auto* dx = gin[0]) {
                            for (std::size_t r = 0; r < rows; ++r)
                              for (std::size_t i = 0; i < len; ++i) (*dx)[r * len + i] += g[r * len + i] * sd->values[r];
                          }
                          if (auto* ds = gin[1]) {
                            for (std::size_t r = 0; r < rows; ++r) {
                              double acc = 0;
                              for (std::size_t i = 0; i < len; ++i)
                                acc += static_cast<double>(g[r * len + i]) * xd->values[r * len + i];
                              (*ds)[r] += static_cast<T>(acc);
                            }
                          }
                        });
}

template <typename T>
Tensor<T> add_channel_bias(const Tensor<T>& x, const Tensor<T>& e) {
  constexpr std::string_view op = "add_channel_bias";
  if (!x.defined() || x.rank() != 4) shape_fail(op, "input must be (N,C,H,W)");
  const auto d = image_dims(x, op);
  if (!e.defined() || e.shape() != Shape{d.n, d.c}) {
    shape_fail(op, "bias " + (e.defined() ? shape_str(e.shape()) : std::string("<undefined>")) +
                       " does not match (N,C) of " + shape_str(x.shape()));
  }
  auto xv = x.values();
  auto ev = e.values();
  std::vector<T> out(xv.size());
  for (std::size_t pl = 0; pl < d.n * d.c; ++pl)
    for (std::size_t i = 0; i < d.plane(); ++i) out[pl * d.plane() + i] = xv[pl * d.plane() + i] + ev[pl];
  return make_result<T>(op, x.shape(), std::move(out), {x, e},
                        [=](std::span<const T> g, std::span<std::vector<T>*> gin) {
                          if (auto* dx = gin[0])
                            for (std::size_t i = 0; i < g.size(); ++i) (*dx)[i] += g[i];
                          if (auto* de = gin[1]) {
                            for (std::size_t pl = 0; pl < d.n * d.c; ++pl) {
                              double acc = 0;
                              for (std::size_t i = 0; i < d.plane(); ++i) acc += g[pl * d.plane() + i];
                              (*de)[pl] += static_cast<T>(acc);
                            }
                          }
                        });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  if (!x.defined()) shape_fail("sum", "undefined input");
  double acc = 0;
  for (auto v : x.values()) acc += v;
  return make_result<T>("sum", Shape{1}, {static_cast<T>(acc)}, {x},
                        [](std::span<const T> g, std::span<std::vector<T>*> gin) {
                          for (auto& v : *gin[0]) v += g[0];
                        });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  if (!x.defined()) shape_fail("mean", "undefined input");
  double acc = 0;
  for (auto v : x.values()) acc += v;
  const double n = static_cast<double>(x.numel());
  return make_result<T>("mean", Shape{1}, {static_cast<T>(acc / n)}, {x},
                        [n](std::span<const T> g, std::span<std::vector<T>*> gin) {
                          const T share = static_cast<T>(g[0] / n);
                          for (auto& v : *gin[0]) v += share;
                        });
}

template <typename T>
Tensor<T> sum_rows(const Tensor<T>& x) {
  if (!x.defined()) shape_fail("sum_rows", "undefined input");
  const auto rows = x.dim(0);
  const auto len = x.numel() / rows;
  auto xv = x.values();
  std::vector<T> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0;
    for (std::size_t i = 0; i < len; ++i) acc += xv[r * len + i];
    out[r] = static_cast<T>(acc);
  }
  return make_result<T>("sum_rows", Shape{rows}, std::move(out), {x},
                        [rows, len](std::span<const T> g, std::span<std::vector<T>*> gin) {
                          for (std::size_t r = 0; r < rows; ++r)
                            for (std::size_t i = 0; i < len; ++i) (*gin[0])[r * len + i] += g[r];
                        });
}

template <typename T>
Tensor<T> sqrt(const Tensor<T>& x) {
  if (!x.defined()) shape_fail("sqrt", "undefined input");
  auto xv = x.values();
  std::vector<T> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = std::sqrt(xv[i]);
  auto od = std::make_shared<std::vector<T>>(out);
  return make_result<T>("sqrt", x.shape(), std::move(out), {x},
                        [od](std::span<const T> g, std::span<std::vector<T>*> gin) {
                          for (std::size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += g[i] * T(0.5) / (*od)[i];
                        });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (!x.defined()) shape_fail("reshape", "undefined input");
  if (shape_numel(shape) != x.numel()) {
    shape_fail("reshape", "cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  std::vector<T> out(x.values().begin(), x.values().end());
  return make_result<T>("reshape", std::move(shape), std::move(out), {x},
                        [](std::span<const T> g, std::span<std::vector<T>*> gin) {
                          for (std::size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += g[i];
                        });
}

template <typename T>
Tensor<T> sinusoidal_embedding(const Tensor<T>& t, std::size_t dim) {
  constexpr std::string_view op = "sinusoidal_embedding";
  if (!t.defined() || t.rank() != 1) shape_fail(op, "times must be a (N) vector");
  if (dim == 0 || dim % 2 != 0) shape_fail(op, "embedding width must be even and positive, got " + std::to_string(dim));
  const auto rows = t.dim(0);
  const auto half = dim / 2;
  std::vector<double> freqs(half);
  for (std::size_t i = 0; i < half; ++i) {
    freqs[i] = std::exp(-std::log(10000.0) * static_cast<double>(i) / static_cast<double>(half));
  }
  auto tv = t.values();
  std::vector<T> out(rows * dim);
  for (std::size_t r = 0; r < rows; ++r) {
    if (!(tv[r] > 0)) shape_fail(op, "times must be positive");
    const double x = 0.25 * std::log(static_cast<double>(tv[r]));
    for (std::size_t i = 0; i < half; ++i) {
      out[r * dim + i] = static_cast<T>(std::sin(x * freqs[i]));
      out[r * dim + half + i] = static_cast<T>(std::cos(x * freqs[i]));
    }
  }
  auto td = t.data();
  return make_result<T>(op, Shape{rows, dim}, std::move(out), {t},
                        [=](std::span<const T> g, std::span<std::vector<T>*> gin) {
                          for (std::size_t r = 0; r < rows; ++r) {
                            const double tr = td->values[r];
                            const double x = 0.25 * std::log(tr);
                            double acc = 0;
                            for (std::size_t i = 0; i < half; ++i) {
                              acc += g[r * dim + i] * std::cos(x * freqs[i]) * freqs[i];
                              acc -= g[r * dim + half + i] * std::sin(x * freqs[i]) * freqs[i];
                            }
                            (*gin[0])[r] += static_cast<T>(acc * 0.25 / tr);
                          }
                        });
}

std::string_view op_name(OpKind op) {
  switch (op) {
    case OpKind::conv2d: return "conv2d";
    case OpKind::linear: return "linear";
    case OpKind::concat_channels: return "concat_channels";
    case OpKind::add: return "add";
    case OpKind::sub: return "sub";
    case OpKind::mul: return "mul";
    case OpKind::silu: return "silu";
    case OpKind::group_norm: return "group_norm";
    case OpKind::upsample_nearest2x: return "upsample_nearest2x";
    case OpKind::avgpool2x: return "avgpool2x";
    case OpKind::scale: return "scale";
    case OpKind::add_scalar: return "add_scalar";
    case OpKind::scale_rows: return "scale_rows";
    case OpKind::add_channel_bias: return "add_channel_bias";
    case OpKind::sum: return "sum";
    case OpKind::mean: return "mean";
    case OpKind::sum_rows: return "sum_rows";
    case OpKind::sqrt: return "sqrt";
    case OpKind::sinusoidal_embedding: return "sinusoidal_embedding";
  }
  return "unknown";
}

template <typename T>
Tensor<T> apply(OpKind op, std::span<const Tensor<T>> in, const OpAttrs& attrs) {
  auto need = [&](std::size_t lo, std::size_t hi) {
    if (in.size() < lo || in.size() > hi) {
      shape_fail(op_name(op), "expected " + std::to_string(lo) + (lo == hi ? "" : "-" + std::to_string(hi)) +
                                  " operands, got " + std::to_string(in.size()));
    }
  };
  auto opt = [&](std::size_t i) { return i < in.size() ? in[i] : Tensor<T>(); };
  switch (op) {
    case OpKind::conv2d: need(2, 3); return conv2d(in[0], in[1], opt(2), attrs.padding);
    case OpKind::linear: need(2, 3); return linear(in[0], in[1], opt(2));
    case OpKind::concat_channels: need(2, 2); return concat_channels(in[0], in[1]);
    case OpKind::add: need(2, 2); return add(in[0], in[1]);
    case OpKind::sub: need(2, 2); return sub(in[0], in[1]);
    case OpKind::mul: need(2, 2); return mul(in[0], in[1]);
    case OpKind::silu: need(1, 1); return silu(in[0]);
    case OpKind::group_norm: {
      need(3, 3);
      const auto channels = image_dims(in[0], "group_norm").c;
      return group_norm(in[0], attrs.groups ? attrs.groups : default_groups(channels), in[1], in[2], attrs.eps);
    }
    case OpKind::upsample_nearest2x: need(1, 1); return upsample_nearest2x(in[0]);
    case OpKind::avgpool2x: need(1, 1); return avgpool2x(in[0]);
    case OpKind::scale: need(1, 1); return scale(in[0], static_cast<T>(attrs.scalar));
    case OpKind::add_scalar: need(1, 1); return add_scalar(in[0], static_cast<T>(attrs.scalar));
    case OpKind::scale_rows: need(2, 2); return scale_rows(in[0], in[1]);
    case OpKind::add_channel_bias: need(2, 2); return add_channel_bias(in[0], in[1]);
    case OpKind::sum: need(1, 1); return sum(in[0]);
    case OpKind::mean: need(1, 1); return mean(in[0]);
    case OpKind::sum_rows: need(1, 1); return sum_rows(in[0]);
    case OpKind::sqrt: need(1, 1); return sqrt(in[0]);
    case OpKind::sinusoidal_embedding: need(1, 1); return sinusoidal_embedding(in[0], attrs.dim);
  }
  shape_fail("apply", "unknown operator");
}

#define CCM_INSTANTIATE_OPS(T)                                                                         \
  template Tensor<T> conv2d<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, Padding);         \
  template Tensor<T> linear<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                  \
  template Tensor<T> concat_channels<T>(const Tensor<T>&, const Tensor<T>&);                           \
  template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&);                                       \
  template Tensor<T> sub<T>(const Tensor<T>&, const Tensor<T>&);                                       \
  template Tensor<T> mul<T>(const Tensor<T>&, const Tensor<T>&);                                       \
  template Tensor<T> silu<T>(const Tensor<T>&);                                                        \
  template Tensor<T> group_norm<T>(const Tensor<T>&, std::size_t, const Tensor<T>&, const Tensor<T>&, double); \
  template Tensor<T> upsample_nearest2x<T>(const Tensor<T>&);                                          \
  template Tensor<T> avgpool2x<T>(const Tensor<T>&);                                                   \
  template Tensor<T> scale<T>(const Tensor<T>&, T);                                                    \
  template Tensor<T> add_scalar<T>(const Tensor<T>&, T);                                               \
  template Tensor<T> scale_rows<T>(const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> add_channel_bias<T>(const Tensor<T>&, const Tensor<T>&);                          \
  template Tensor<T> sum<T>(const Tensor<T>&);                                                         \
  template Tensor<T> mean<T>(const Tensor<T>&);                                                        \
  template Tensor<T> sum_rows<T>(const Tensor<T>&);                                                    \
  template Tensor<T> sqrt<T>(const Tensor<T>&);                                                        \
  template Tensor<T> reshape<T>(const Tensor<T>&, Shape);                                              \
  template Tensor<T> sinusoidal_embedding<T>(const Tensor<T>&, std::size_t);                           \
  template Tensor<T> apply<T>(OpKind, std::span<const Tensor<T>>, const OpAttrs&);

CCM_INSTANTIATE_OPS(float)
CCM_INSTANTIATE_OPS(double)

}  // namespace ccm
