// Copyright 2026 The CCM Authors
// SPDX-License-Identifier: Apache-2.0
//
// PSNR and SSIM, and dataset evaluation built on them.

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "ccm/data.hpp"
#include "ccm/image.hpp"

namespace ccm {

/// 10 log10(max_val^2 / MSE); +infinity for identical images.
double psnr(const Image& a, const Image& b, double max_val);

struct SsimOptions {
  enum class Mode { luma, per_channel };
  Mode mode = Mode::luma;
  double data_range = 1.0;  // peak-to-peak of the pixel scale
};

/// Gaussian-windowed SSIM (11x11, sigma 1.5, K1 0.01, K2 0.03) averaged over
/// all fully contained windows. Luma mode converts three-channel inputs with
/// BT.601 weights first; per-channel mode averages the channel scores.
double ssim(const Image& a, const Image& b, const SsimOptions& options = {});

enum class EvalMode { crop, full_resize };

std::string_view eval_mode_name(EvalMode mode);  // "crop" or "full-resize"
EvalMode parse_eval_mode(std::string_view name);

struct EvalOptions {
  EvalMode mode = EvalMode::crop;
  // Center-crop window (crop) or resize target (full-resize); 0 leaves
  // pairs untouched.
  std::size_t size = 0;
  std::uint64_t seed = 0;
  double max_val = 1.0;  // on the [0, 1] scale used for scoring
  SsimOptions ssim;
};

struct ItemMetrics {
  std::string id;
  double psnr;
  double ssim;
};

struct MetricReport {
  std::string mode;
  std::vector<ItemMetrics> items;  // sorted by id
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
  std::size_t count = 0;

  /// Human-readable report with a "mode:" header line.
  std::string to_text() const;
  /// Machine-readable rows: id,psnr,ssim then a final "mean" row.
  std::string to_csv() const;
};

/// Maps a condition image and a per-item seed to a prediction of the target.
using Predictor = std::function<Image(const Image& v, std::uint64_t seed)>;

/// Predictions and targets are mapped from [-1, 1] to [0, 1] before scoring.
/// Per-item seeds derive from options.seed and the item id, so the report
/// does not depend on dataset order.
MetricReport evaluate(const Dataset& data, const Predictor& predict, const EvalOptions& options);

/// Prepares a pair for evaluation according to the mode.
PairedSample eval_view(const PairedSample& pair, const EvalOptions& options);

/// (x + 1) / 2 elementwise.
Image to_unit_range(const Image& img);

}  // namespace ccm
