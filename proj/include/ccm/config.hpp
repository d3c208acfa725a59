// Copyright 2026 The CCM Authors
// SPDX-License-Identifier: Apache-2.0
//
// Run configuration: a flat "key = value" text file. Lines starting with '#'
// are comments. Every key has a default (see RunConfig::keys()); unknown keys
// are rejected.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ccm/data.hpp"
#include "ccm/metrics.hpp"
#include "ccm/network.hpp"
#include "ccm/schedule.hpp"
#include "ccm/trainer.hpp"

namespace ccm {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ConfigKey {
  std::string_view name;
  std::string_view default_value;
  std::string_view doc;
  bool hashed;  // part of the training identity checked on resume
};

class RunConfig {
 public:
  /// All defaults; seed falls back to the CCM_SEED environment variable.
  RunConfig();

  static const std::vector<ConfigKey>& keys();

  /// Applies the assignments in text on top of the defaults.
  static RunConfig parse(std::string_view text, std::string_view origin = "<config>");
  static RunConfig load(const std::filesystem::path& path);

  void set(std::string_view key, std::string_view value);
  /// "key=value".
  void set_assignment(std::string_view assignment);
  const std::string& get(std::string_view key) const;

  /// Every key, sorted, one "key = value" per line; parse(to_text()) round-trips.
  std::string to_text() const;
  /// Only the keys that define the trained model (no output paths, logging
  /// cadence or evaluation settings). Stored in checkpoints.
  std::string identity_text() const;
  /// FNV-1a of identity_text().
  std::uint64_t hash() const;

  /// Typed checks of every value; dataset paths must exist for paired-folder.
  void validate() const;

  std::string task() const;
  std::uint64_t seed() const;
  std::filesystem::path out_dir() const;
  std::string predictor() const;  // "consistency" or "identity"
  std::size_t channels() const;
  std::size_t data_count() const;
  std::size_t data_size() const;
  std::size_t data_holdout() const;
  std::filesystem::path dir_v() const;
  std::filesystem::path dir_r() const;
  CropSpec crop() const;
  NoiseSchedule schedule() const;
  UNetConfig net() const;
  TrainConfig train() const;
  std::uint64_t log_every() const;
  std::uint64_t checkpoint_every() const;
  EvalOptions eval() const;

 private:
  std::map<std::string, std::string, std::less<>> values_;
};

}  // namespace ccm
