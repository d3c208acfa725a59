// Copyright 2026 The CCM Authors
// SPDX-License-Identifier: Apache-2.0

#include "ccm/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

namespace ccm {

Tensor<float> Image::to_tensor() const {
  return Tensor<float>(shape(), data);
}

Image Image::from_tensor(const Tensor<float>& t) {
  if (!t.defined() || t.rank() != 3) throw ShapeError("image: tensor must be (C,H,W)");
  Image img(t.dim(0), t.dim(1), t.dim(2));
  std::copy(t.values().begin(), t.values().end(), img.data.begin());
  return img;
}

float to_unit(std::uint8_t v) {
  return static_cast<float>(static_cast<double>(v) / 127.5 - 1.0);
}

std::uint8_t to_byte(float x) {
  const double v = std::round((static_cast<double>(x) + 1.0) * 127.5);
  if (!(v > 0)) return 0;
  return static_cast<std::uint8_t>(std::min(v, 255.0));
}

namespace {

std::string lower_ext(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ImageError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ImageError("write failed for " + path.string());
}

struct PngReadSource {
  const std::vector<std::uint8_t>* bytes;
  std::size_t pos;
};

Image decode_png(const std::vector<std::uint8_t>& bytes, const std::string& name) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw ImageError(name + ": not a PNG file");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw ImageError("libpng: out of memory");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw ImageError("libpng: out of memory");
  }
  std::vector<std::uint8_t> pixels;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageError(name + ": corrupt PNG data");
  }
  PngReadSource src{&bytes, 0};
  png_set_read_fn(png, &src, [](png_structp p, png_bytep out, png_size_t n) {
    auto* s = static_cast<PngReadSource*>(png_get_io_ptr(p));
    if (s->pos + n > s->bytes->size()) png_error(p, "truncated");
    std::memcpy(out, s->bytes->data() + s->pos, n);
    s->pos += n;
  });
  png_read_info(png, info);
  const auto color = png_get_color_type(png, info);
  if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);
  const std::size_t w = png_get_image_width(png, info);
  const std::size_t h = png_get_image_height(png, info);
  const std::size_t c = png_get_channels(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  pixels.resize(stride * h);
  rows.resize(h);
  for (std::size_t y = 0; y < h; ++y) rows[y] = pixels.data() + y * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  if (c != 1 && c != 3) throw ImageError(name + ": unsupported channel count " + std::to_string(c));
  Image img(c, h, w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t k = 0; k < c; ++k) img.at(k, y, x) = to_unit(pixels[y * stride + x * c + k]);
    }
  }
  return img;
}

Image decode_pnm(const std::vector<std::uint8_t>& bytes, const std::string& name) {
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < bytes.size()) {
      if (std::isspace(bytes[pos])) {
        ++pos;
      } else if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
    std::string t;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) t.push_back(static_cast<char>(bytes[pos++]));
    return t;
  };
  const auto magic = token();
  if (magic != "P5" && magic != "P6") throw ImageError(name + ": not a binary PGM/PPM file");
  std::size_t w = 0, h = 0, maxval = 0;
  try {
    w = std::stoul(token());
    h = std::stoul(token());
    maxval = std::stoul(token());
  } catch (const std::exception&) {
    throw ImageError(name + ": malformed PNM header");
  }
  if (w == 0 || h == 0 || maxval != 255) throw ImageError(name + ": only 8-bit PNM with positive extents is supported");
  ++pos;  // single whitespace after maxval
  const std::size_t c = magic == "P5" ? 1 : 3;
  if (bytes.size() < pos + w * h * c) throw ImageError(name + ": truncated PNM data");
  Image img(c, h, w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t k = 0; k < c; ++k) img.at(k, y, x) = to_unit(bytes[pos + (y * w + x) * c + k]);
    }
  }
  return img;
}

void check_writable(const Image& img) {
  if (img.channels != 1 && img.channels != 3) {
    throw ImageError("image: can only write 1 or 3 channels, got " + std::to_string(img.channels));
  }
  if (img.height == 0 || img.width == 0) throw ImageError("image: cannot write an empty image");
}

std::vector<std::uint8_t> interleaved(const Image& img) {
  std::vector<std::uint8_t> px(img.size());
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      for (std::size_t k = 0; k < img.channels; ++k) {
        px[(y * img.width + x) * img.channels + k] = to_byte(img.at(k, y, x));
      }
    }
  }
  return px;
}

}  // namespace

std::vector<std::uint8_t> encode_png(const Image& img) {
  check_writable(img);
  auto px = interleaved(img);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw ImageError("libpng: out of memory");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw ImageError("libpng: out of memory");
  }
  std::vector<std::uint8_t> out;
  std::vector<png_bytep> rows(img.height);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw ImageError("libpng: encode failed");
  }
  png_set_write_fn(
      png, &out,
      [](png_structp p, png_bytep data, png_size_t n) {
        auto* o = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(p));
        o->insert(o->end(), data, data + n);
      },
      nullptr);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
               img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t y = 0; y < img.height; ++y) rows[y] = px.data() + y * img.width * img.channels;
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

Image read_image(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  const auto ext = lower_ext(path);
  if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") return decode_pnm(bytes, path.string());
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '5' || bytes[1] == '6')) {
    return decode_pnm(bytes, path.string());
  }
  return decode_png(bytes, path.string());
}

void write_image(const std::filesystem::path& path, const Image& img) {
  check_writable(img);
  const auto ext = lower_ext(path);
  if (ext == ".pgm" || ext == ".ppm") {
    if ((ext == ".pgm") != (img.channels == 1)) {
      throw ImageError(path.string() + ": extension does not match channel count " + std::to_string(img.channels));
    }
    std::string header = (img.channels == 1 ? "P5\n" : "P6\n") + std::to_string(img.width) + " " +
                         std::to_string(img.height) + "\n255\n";
    std::vector<std::uint8_t> bytes(header.begin(), header.end());
    auto px = interleaved(img);
    bytes.insert(bytes.end(), px.begin(), px.end());
    write_file(path, bytes);
    return;
  }
  write_file(path, encode_png(img));
}

Image resize_bilinear(const Image& img, std::size_t height, std::size_t width) {
  if (height == 0 || width == 0) throw ImageError("resize: target extents must be positive");
  if (img.height == height && img.width == width) return img;
  Image out(img.channels, height, width);
  const double sy = static_cast<double>(img.height) / static_cast<double>(height);
  const double sx = static_cast<double>(img.width) / static_cast<double>(width);
  for (std::size_t y = 0; y < height; ++y) {
    const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0, static_cast<double>(img.height - 1));
    const auto y0 = static_cast<std::size_t>(fy);
    const auto y1 = std::min(y0 + 1, img.height - 1);
    const double wy = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < width; ++x) {
      const double fx =
          std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0, static_cast<double>(img.width - 1));
      const auto x0 = static_cast<std::size_t>(fx);
      const auto x1 = std::min(x0 + 1, img.width - 1);
      const double wx = fx - static_cast<double>(x0);
      for (std::size_t c = 0; c < img.channels; ++c) {
        const double top = img.at(c, y0, x0) * (1 - wx) + img.at(c, y0, x1) * wx;
        const double bot = img.at(c, y1, x0) * (1 - wx) + img.at(c, y1, x1) * wx;
        out.at(c, y, x) = static_cast<float>(top * (1 - wy) + bot * wy);
      }
    }
  }
  return out;
}

Image crop(const Image& img, std::size_t y, std::size_t x, std::size_t height, std::size_t width) {
  if (height == 0 || width == 0 || y + height > img.height || x + width > img.width) {
    throw ImageError("crop: window " + std::to_string(height) + "x" + std::to_string(width) + " at (" +
                     std::to_string(y) + "," + std::to_string(x) + ") exceeds " + std::to_string(img.height) + "x" +
                     std::to_string(img.width));
  }
  Image out(img.channels, height, width);
  for (std::size_t c = 0; c < img.channels; ++c) {
    for (std::size_t r = 0; r < height; ++r) {
      const auto* src = &img.data[(c * img.height + y + r) * img.width + x];
      std::copy(src, src + width, &out.data[(c * height + r) * width]);
    }
  }
  return out;
}

Image luma(const Image& img) {
  if (img.channels == 1) return img;
  if (img.channels != 3) throw ImageError("luma: expected 1 or 3 channels, got " + std::to_string(img.channels));
  Image out(1, img.height, img.width);
  const std::size_t plane = img.height * img.width;
  for (std::size_t i = 0; i < plane; ++i) {
    out.data[i] = static_cast<float>(0.299 * img.data[i] + 0.587 * img.data[plane + i] + 0.114 * img.data[2 * plane + i]);
  }
  return out;
}

}  // namespace ccm
