// Copyright 2026 The CCM Authors
// SPDX-License-Identifier: Apache-2.0

#include "ccm/checkpoint.hpp"

#include <fstream>
#include <limits>

#include "ccm/hash.hpp"
#include "ccm/tensor_io.hpp"

namespace ccm {

namespace {

constexpr char kMagic[4] = {'C', 'C', 'M', 'K'};

std::uint32_t u32_len(std::size_t n, const char* what) {
  if (n > std::numeric_limits<std::uint32_t>::max()) throw CheckpointError(std::string(what) + " too large");
  return static_cast<std::uint32_t>(n);
}

void put_string(std::vector<std::uint8_t>& out, const std::string& s) {
  le::put_u32(out, u32_len(s.size(), "string"));
  out.insert(out.end(), s.begin(), s.end());
}

void put_params(std::vector<std::uint8_t>& out, const Parameters<float>& params) {
  le::put_u32(out, u32_len(params.size(), "parameter count"));
  for (const auto& [name, t] : params) {
    put_string(out, name);
    le::put_u32(out, u32_len(t.rank(), "rank"));
    for (auto e : t.shape()) le::put_u32(out, u32_len(e, "extent"));
    for (float x : t.values()) le::put_f32(out, x);
  }
}

void put_moments(std::vector<std::uint8_t>& out, const std::map<std::string, std::vector<float>>& m) {
  le::put_u32(out, u32_len(m.size(), "moment count"));
  for (const auto& [name, values] : m) {
    put_string(out, name);
    le::put_u32(out, u32_len(values.size(), "moment size"));
    for (float x : values) le::put_f32(out, x);
  }
}

std::string get_string(le::Reader& in) {
  const auto n = in.u32();
  return in.bytes(n);
}

Parameters<float> get_params(le::Reader& in) {
  Parameters<float> params;
  const auto count = in.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    auto name = get_string(in);
    const auto rank = in.u32();
    if (rank == 0 || rank > 8) throw CheckpointError("checkpoint: bad rank for " + name);
    Shape shape(rank);
    std::size_t numel = 1;
    for (auto& e : shape) {
      e = in.u32();
      if (e == 0) throw CheckpointError("checkpoint: zero extent for " + name);
      numel *= e;
    }
    if (numel * 4 > in.remaining()) throw CheckpointError("checkpoint: truncated payload for " + name);
    std::vector<float> values(numel);
    for (auto& x : values) x = in.f32();
    if (!params.emplace(name, Tensor<float>(std::move(shape), std::move(values))).second) {
      throw CheckpointError("checkpoint: duplicate parameter " + name);
    }
  }
  return params;
}

std::map<std::string, std::vector<float>> get_moments(le::Reader& in) {
  std::map<std::string, std::vector<float>> m;
  const auto count = in.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    auto name = get_string(in);
    const auto n = in.u32();
    if (std::size_t{n} * 4 > in.remaining()) throw CheckpointError("checkpoint: truncated moments for " + name);
    std::vector<float> values(n);
    for (auto& x : values) x = in.f32();
    m.emplace(std::move(name), std::move(values));
  }
  return m;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  le::put_u32(out, ckpt.version);
  le::put_u64(out, ckpt.config_hash);
  le::put_u64(out, ckpt.state.iteration);
  put_string(out, ckpt.config_text);
  put_params(out, ckpt.state.params);
  put_params(out, ckpt.state.teacher);
  le::put_u32(out, ckpt.state.optimizer.kind == OptimizerKind::sgd ? 0 : 1);
  le::put_u64(out, ckpt.state.optimizer.step);
  put_moments(out, ckpt.state.optimizer.m);
  put_moments(out, ckpt.state.optimizer.v);
  put_string(out, ckpt.state.rng_state);
  const auto sum = fnv1a(std::string_view(reinterpret_cast<const char*>(out.data()), out.size()));
  le::put_u64(out, sum);
  return out;
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 + 4 + 8 || !std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin())) {
    throw CheckpointError("checkpoint: bad magic (not a checkpoint file)");
  }
  const std::size_t body = bytes.size() - 8;
  const auto expect = fnv1a(std::string_view(reinterpret_cast<const char*>(bytes.data()), body));
  try {
    le::Reader in(bytes);
    in.bytes(4);
    Checkpoint ckpt;
    ckpt.version = in.u32();
    if (ckpt.version != kCheckpointVersion) {
      throw CheckpointError("checkpoint: unsupported version " + std::to_string(ckpt.version));
    }
    ckpt.config_hash = in.u64();
    ckpt.state.iteration = in.u64();
    ckpt.config_text = get_string(in);
    ckpt.state.params = get_params(in);
    ckpt.state.teacher = get_params(in);
    const auto kind = in.u32();
    if (kind > 1) throw CheckpointError("checkpoint: unknown optimizer kind");
    ckpt.state.optimizer.kind = kind == 0 ? OptimizerKind::sgd : OptimizerKind::adam;
    ckpt.state.optimizer.step = in.u64();
    ckpt.state.optimizer.m = get_moments(in);
    ckpt.state.optimizer.v = get_moments(in);
    ckpt.state.rng_state = get_string(in);
    const auto sum = in.u64();
    if (!in.done()) throw CheckpointError("checkpoint: trailing bytes");
    if (sum != expect) throw CheckpointError("checkpoint: checksum mismatch (file is corrupt)");
    return ckpt;
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("checkpoint: corrupt file (") + e.what() + ")");
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto bytes = encode_checkpoint(ckpt);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("checkpoint: cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError("checkpoint: write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw CheckpointError("checkpoint: cannot move into place " + path.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("checkpoint: cannot open " + path.string());
  std::vector<std::uint8_t> bytes(std::istreambuf_iterator<char>(in), {});
  return decode_checkpoint(bytes);
}

}  // namespace ccm
