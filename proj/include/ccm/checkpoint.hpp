// Copyright 2026 The CCM Authors
// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint file format (all integers little-endian):
//
//   "CCMK"  u32 version  u64 config_hash  u64 iteration
//   u32 len, config text (RunConfig::to_text)
//   params, teacher:   u32 count, then per entry
//                      u32 name_len, name, u32 rank, rank x u32 extent,
//                      numel x f32 payload
//   optimizer:         u32 kind (0 sgd, 1 adam), u64 step,
//                      first and second moments as u32 count, then per entry
//                      u32 name_len, name, u32 n, n x f32
//   u32 len, RNG state (std::mt19937_64 text form)
//   u64 FNV-1a of every preceding byte
//
// Entries are written in name order, so encoding is canonical.

#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "ccm/trainer.hpp"

namespace ccm {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::uint64_t config_hash = 0;
  std::string config_text;
  TrainState state;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

/// Writes to a temporary sibling and renames it into place.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ccm
