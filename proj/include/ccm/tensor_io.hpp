// Copyright 2026 The CCM Authors
// SPDX-License-Identifier: Apache-2.0
//
// Raw tensor dump used for debugging:
//   "CCMT" | u32 rank | rank x u32 extents | float32 payload
// All integers and floats little-endian.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ccm/tensor.hpp"

namespace ccm {

std::vector<std::uint8_t> encode_tensor_dump(const Tensor<float>& t);
Tensor<float> decode_tensor_dump(const std::vector<std::uint8_t>& bytes);

void write_tensor_dump(const std::filesystem::path& path, const Tensor<float>& t);
Tensor<float> read_tensor_dump(const std::filesystem::path& path);

// Little-endian primitives shared with the checkpoint codec.
namespace le {
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v);
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v);
void put_f32(std::vector<std::uint8_t>& out, float v);
void put_f64(std::vector<std::uint8_t>& out, double v);

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}
  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  double f64();
  std::string bytes(std::size_t n);
  bool done() const { return pos_ == bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const;
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};
}  // namespace le

}  // namespace ccm
