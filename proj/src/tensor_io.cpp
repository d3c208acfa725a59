// Copyright 2026 The CCM Authors
// SPDX-License-Identifier: Apache-2.0

#include "ccm/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>

namespace ccm {

namespace le {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f32(std::vector<std::uint8_t>& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

void put_f64(std::vector<std::uint8_t>& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

void Reader::need(std::size_t n) const {
  if (bytes_.size() - pos_ < n) throw std::runtime_error("truncated data");
}

std::uint32_t Reader::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
  return v;
}

std::uint64_t Reader::u64() {
  need(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
  return v;
}

float Reader::f32() { return std::bit_cast<float>(u32()); }

double Reader::f64() { return std::bit_cast<double>(u64()); }

std::string Reader::bytes(std::size_t n) {
  need(n);
  std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
  pos_ += n;
  return s;
}

}  // namespace le

std::vector<std::uint8_t> encode_tensor_dump(const Tensor<float>& t) {
  std::vector<std::uint8_t> out{'C', 'C', 'M', 'T'};
  le::put_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (auto e : t.shape()) le::put_u32(out, static_cast<std::uint32_t>(e));
  for (auto v : t.values()) le::put_f32(out, v);
  return out;
}

Tensor<float> decode_tensor_dump(const std::vector<std::uint8_t>& bytes) {
  le::Reader r(bytes);
  if (r.bytes(4) != "CCMT") throw std::runtime_error("tensor dump: bad magic");
  const auto rank = r.u32();
  if (rank == 0 || rank > 16) throw std::runtime_error("tensor dump: unsupported rank " + std::to_string(rank));
  Shape shape(rank);
  for (auto& e : shape) e = r.u32();
  const auto n = shape_numel(shape);
  if (r.remaining() != n * 4) throw std::runtime_error("tensor dump: payload size does not match extents");
  std::vector<float> values(n);
  for (auto& v : values) v = r.f32();
  return Tensor<float>(std::move(shape), std::move(values));
}

void write_tensor_dump(const std::filesystem::path& path, const Tensor<float>& t) {
  auto bytes = encode_tensor_dump(t);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("failed writing " + path.string());
}

Tensor<float> read_tensor_dump(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_tensor_dump(bytes);
}

}  // namespace ccm
