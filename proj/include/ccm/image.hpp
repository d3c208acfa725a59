// Copyright 2026 The CCM Authors
// SPDX-License-Identifier: Apache-2.0
//
// Planar float images and 8-bit file I/O. Pixel values live in [-1, 1];
// 8-bit files map through x / 127.5 - 1 on read and the inverse (rounded,
// clamped) on write.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "ccm/tensor.hpp"

namespace ccm {

class ImageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Image {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> data;  // CHW

  Image() = default;
  Image(std::size_t c, std::size_t h, std::size_t w, float fill = 0.0f)
      : channels(c), height(h), width(w), data(c * h * w, fill) {}

  float& at(std::size_t c, std::size_t y, std::size_t x) { return data[(c * height + y) * width + x]; }
  float at(std::size_t c, std::size_t y, std::size_t x) const { return data[(c * height + y) * width + x]; }
  std::size_t size() const { return data.size(); }
  bool same_shape(const Image& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }
  Shape shape() const { return {channels, height, width}; }

  Tensor<float> to_tensor() const;
  static Image from_tensor(const Tensor<float>& t);  // rank 3
};

float to_unit(std::uint8_t v);
std::uint8_t to_byte(float x);

/// PNG (gray, gray+alpha, RGB, RGBA, 8 or 16 bit), binary PGM (P5) and PPM
/// (P6). Alpha is dropped; 16-bit samples are reduced to 8 bits.
Image read_image(const std::filesystem::path& path);

/// PNG unless the extension is .pgm/.ppm. One or three channels.
void write_image(const std::filesystem::path& path, const Image& img);

std::vector<std::uint8_t> encode_png(const Image& img);

Image resize_bilinear(const Image& img, std::size_t height, std::size_t width);
Image crop(const Image& img, std::size_t y, std::size_t x, std::size_t height, std::size_t width);

/// ITU-R BT.601 luma weights (0.299, 0.587, 0.114); single-channel images
/// pass through.
Image luma(const Image& img);

}  // namespace ccm
