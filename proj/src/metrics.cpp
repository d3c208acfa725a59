// Copyright 2026 The CCM Authors
// SPDX-License-Identifier: Apache-2.0

#include "ccm/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

#include "ccm/hash.hpp"

namespace ccm {

namespace {

void check_same(const Image& a, const Image& b, const char* what) {
  if (!a.same_shape(b) || a.size() == 0) {
    throw ShapeError(std::string(what) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

constexpr int kWin = 11;

std::array<double, kWin * kWin> gaussian_window() {
  std::array<double, kWin> g{};
  double total = 0.0;
  for (int i = 0; i < kWin; ++i) {
    const double d = i - kWin / 2;
    g[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
    total += g[i];
  }
  std::array<double, kWin * kWin> w{};
  for (int y = 0; y < kWin; ++y) {
    for (int x = 0; x < kWin; ++x) w[y * kWin + x] = g[y] * g[x] / (total * total);
  }
  return w;
}

double ssim_plane(const float* a, const float* b, std::size_t h, std::size_t w, double range) {
  static const auto win = gaussian_window();
  const double c1 = (0.01 * range) * (0.01 * range);
  const double c2 = (0.03 * range) * (0.03 * range);
  double acc = 0.0;
  std::size_t windows = 0;
  for (std::size_t y = 0; y + kWin <= h; ++y) {
    for (std::size_t x = 0; x + kWin <= w; ++x) {
      double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
      for (int dy = 0; dy < kWin; ++dy) {
        for (int dx = 0; dx < kWin; ++dx) {
          const double wt = win[dy * kWin + dx];
          const double va = a[(y + dy) * w + x + dx];
          const double vb = b[(y + dy) * w + x + dx];
          ma += wt * va;
          mb += wt * vb;
          saa += wt * va * va;
          sbb += wt * vb * vb;
          sab += wt * va * vb;
        }
      }
      const double var_a = saa - ma * ma;
      const double var_b = sbb - mb * mb;
      const double cov = sab - ma * mb;
      acc += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
      ++windows;
    }
  }
  return acc / static_cast<double>(windows);
}

}  // namespace

double psnr(const Image& a, const Image& b, double max_val) {
  check_same(a, b, "psnr");
  if (!(max_val > 0)) throw std::invalid_argument("psnr: max_val must be positive");
  double sse = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
    sse += d * d;
  }
  if (sse == 0.0) return std::numeric_limits<double>::infinity();
  const double mse = sse / static_cast<double>(a.size());
  return 10.0 * std::log10(max_val * max_val / mse);
}

double ssim(const Image& a, const Image& b, const SsimOptions& options) {
  check_same(a, b, "ssim");
  if (a.height < kWin || a.width < kWin) {
    throw ShapeError("ssim: image " + std::to_string(a.height) + "x" + std::to_string(a.width) +
                     " is smaller than the 11x11 window");
  }
  if (!(options.data_range > 0)) throw std::invalid_argument("ssim: data_range must be positive");
  const std::size_t plane = a.height * a.width;
  if (options.mode == SsimOptions::Mode::luma && a.channels == 3) {
    const auto la = luma(a), lb = luma(b);
    return ssim_plane(la.data.data(), lb.data.data(), a.height, a.width, options.data_range);
  }
  double acc = 0.0;
  for (std::size_t c = 0; c < a.channels; ++c) {
    acc += ssim_plane(a.data.data() + c * plane, b.data.data() + c * plane, a.height, a.width, options.data_range);
  }
  return acc / static_cast<double>(a.channels);
}

std::string_view eval_mode_name(EvalMode mode) { return mode == EvalMode::crop ? "crop" : "full-resize"; }

EvalMode parse_eval_mode(std::string_view name) {
  if (name == "crop") return EvalMode::crop;
  if (name == "full-resize") return EvalMode::full_resize;
  throw std::invalid_argument("unknown eval mode '" + std::string(name) + "' (expected crop or full-resize)");
}

PairedSample eval_view(const PairedSample& pair, const EvalOptions& options) {
  if (options.size == 0) return pair;
  if (options.mode == EvalMode::crop) {
    if (options.size >= std::min(pair.v.height, pair.v.width)) return pair;
    return center_crop_pair(pair, options.size);
  }
  return {resize_bilinear(pair.v, options.size, options.size), resize_bilinear(pair.r, options.size, options.size),
          pair.id};
}

Image to_unit_range(const Image& img) {
  Image out = img;
  for (auto& x : out.data) x = static_cast<float>((static_cast<double>(x) + 1.0) * 0.5);
  return out;
}

MetricReport evaluate(const Dataset& data, const Predictor& predict, const EvalOptions& options) {
  if (data.empty()) throw std::invalid_argument("evaluate: dataset is empty");
  MetricReport report;
  report.mode = std::string(eval_mode_name(options.mode));
  report.items.reserve(data.size());
  for (const auto& pair : data) {
    const auto view = eval_view(pair, options);
    const auto pred = predict(view.v, fnv1a(view.id, options.seed ^ 1469598103934665603ull));
    const auto a = to_unit_range(pred), b = to_unit_range(view.r);
    report.items.push_back({view.id, psnr(a, b, options.max_val), ssim(a, b, options.ssim)});
  }
  std::sort(report.items.begin(), report.items.end(), [](const auto& x, const auto& y) { return x.id < y.id; });
  double sp = 0.0, ss = 0.0;
  for (const auto& item : report.items) {
    sp += item.psnr;
    ss += item.ssim;
  }
  report.count = report.items.size();
  report.mean_psnr = sp / static_cast<double>(report.count);
  report.mean_ssim = ss / static_cast<double>(report.count);
  return report;
}

namespace {

std::string num(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os.precision(6);
  os << std::fixed << x;
  return os.str();
}

}  // namespace

std::string MetricReport::to_text() const {
  std::ostringstream os;
  os << "ccm evaluation report\n";
  os << "mode: " << mode << "\n";
  os << "count: " << count << "\n";
  os << "mean_psnr_db: " << num(mean_psnr) << "\n";
  os << "mean_ssim: " << num(mean_ssim) << "\n";
  os << "\nid\tpsnr_db\tssim\n";
  for (const auto& item : items) os << item.id << '\t' << num(item.psnr) << '\t' << num(item.ssim) << '\n';
  return os.str();
}

std::string MetricReport::to_csv() const {
  std::ostringstream os;
  os << "# mode=" << mode << "\n";
  os << "id,psnr_db,ssim\n";
  for (const auto& item : items) os << item.id << ',' << num(item.psnr) << ',' << num(item.ssim) << '\n';
  os << "mean," << num(mean_psnr) << ',' << num(mean_ssim) << '\n';
  return os.str();
}

}  // namespace ccm
