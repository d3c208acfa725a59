// Copyright 2026 The CCM Authors
// SPDX-License-Identifier: Apache-2.0
//
// Paired datasets: procedural generators, folder ingestion and the aligned
// crop pipeline. Every generated pair is a pure function of (seed, index).

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ccm/image.hpp"

namespace ccm {

struct PairedSample {
  Image v;  // condition
  Image r;  // target
  std::string id;

  // Throws ImageError unless v and r share a nonempty shape with values in [-1, 1].
  void validate() const;
};

using Dataset = std::vector<PairedSample>;

struct LowlightParams {
  double gamma = 1.0;
  double gain = 1.0;
  double noise_sigma = 0.0;
};

/// Well-exposed procedural RGB image in [0, 1]: a random two-color gradient
/// with anti-aliased discs and rectangles composited on top.
Image procedural_scene(std::mt19937_64& rng, std::size_t size);

/// v = clip(gain * r^gamma + noise) in [0, 1] space, both mapped to [-1, 1].
/// With params unset, gamma ~ U[2,5], gain ~ U[0.1,0.4], sigma ~ U[0.01,0.05].
PairedSample synth_lowlight_item(std::uint64_t seed, std::size_t index, std::size_t size,
                                 std::optional<LowlightParams> params = std::nullopt);

/// Maps a visible image in [-1, 1] to its pseudo-thermal counterpart:
/// with L the [0, 1] luma, channels are sqrt(L), L^2 and 0.5 + 0.5 sin(2 pi L).
Image modality_transform(const Image& v);

PairedSample synth_modality_item(std::uint64_t seed, std::size_t index, std::size_t size);

/// Items first_index .. first_index + count - 1. Held-out splits use
/// first_index = training count.
Dataset synth_lowlight(std::uint64_t seed, std::size_t count, std::size_t size, std::size_t first_index = 0);
Dataset synth_modality(std::uint64_t seed, std::size_t count, std::size_t size, std::size_t first_index = 0);

struct CropSpec {
  enum class Mode { none, random, center };
  Mode mode = Mode::none;
  std::size_t size = 0;       // crop window; ignored for Mode::none
  std::size_t resize_to = 0;  // 0 keeps the cropped extents

  void validate() const;
};

std::string_view crop_mode_name(CropSpec::Mode mode);
CropSpec::Mode parse_crop_mode(std::string_view name);

/// The same window is cut from v and r. Throws ImageError if size exceeds
/// either extent.
PairedSample random_crop_pair(const PairedSample& pair, std::size_t size, std::mt19937_64& rng);
PairedSample center_crop_pair(const PairedSample& pair, std::size_t size);

/// Crop per spec (random crops draw from rng), then resize.
PairedSample apply_crop(const PairedSample& pair, const CropSpec& spec, std::mt19937_64& rng);

struct LoadReport {
  std::size_t paired = 0;
  std::vector<std::string> skipped;  // "<path>: <reason>"
};

/// Pairs files whose stems appear in both directories, sorted by stem.
/// Undecodable or mismatched pairs are skipped and listed in report.
Dataset load_paired_folder(const std::filesystem::path& dir_v, const std::filesystem::path& dir_r,
                           const CropSpec& crop, std::uint64_t seed, LoadReport* report = nullptr);

struct ManifestRow {
  std::string id;
  std::string v_path;
  std::string r_path;
  Shape shape;
};

/// CSV with header id,v_path,r_path,channels,height,width.
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRow>& rows);
std::vector<ManifestRow> read_manifest(const std::filesystem::path& path);

}  // namespace ccm
