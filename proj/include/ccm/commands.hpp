// Copyright 2026 The CCM Authors
// SPDX-License-Identifier: Apache-2.0
//
// The operator commands behind the CLI: data synthesis, training, sampling
// and evaluation. Output layout under out_dir:
//
//   v/, r/, manifest.csv                  synth-data training split
//   holdout/v/, holdout/r/, holdout/manifest.csv
//   checkpoints/ckpt_<k>.ccmk             periodic checkpoints
//   final.ccmk                            final checkpoint
//   train_log.txt, train_log.csv          one row per log interval
//   nonfinite_loss.txt                    diagnostic written on abort
//   eval_<mode>.txt, eval_<mode>.csv      evaluation reports

#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ccm/checkpoint.hpp"
#include "ccm/config.hpp"
#include "ccm/metrics.hpp"

namespace ccm {

class ConfigMismatchError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

using MessageFn = std::function<void(const std::string&)>;

enum class Split { train, holdout };

/// Training or held-out pairs for the configured task. Folder data has no
/// held-out split; both splits load the folders (without cropping for
/// holdout, where evaluation applies its own view).
Dataset resolve_dataset(const RunConfig& cfg, Split split, const MessageFn& message = {});

/// Writes both splits as 8-bit PNGs plus manifests; returns the number of
/// training pairs written.
std::size_t cmd_synth(const RunConfig& cfg, const MessageFn& message = {});

struct TrainOptions {
  std::filesystem::path resume;  // empty for a fresh run
  bool force = false;            // accept a config-hash mismatch on resume
  std::function<void(const TrainRecord&)> on_record;
  MessageFn message;
};

/// Trains (or, for predictor = identity, writes a parameter-free stub) and
/// returns the path of the final checkpoint.
std::filesystem::path cmd_train(const RunConfig& cfg, const TrainOptions& options = {});

class LoadedModel {
 public:
  explicit LoadedModel(const Checkpoint& ckpt);
  static LoadedModel load(const std::filesystem::path& path);

  const RunConfig& config() const { return cfg_; }
  bool identity() const { return !model_.has_value(); }
  const ConsistencyModel& model() const;

  /// Throws ShapeError naming both the input and the architecture when the
  /// image cannot be processed.
  void check_input(const Image& v, const std::string& what) const;
  Image predict(const Image& v, std::uint64_t seed, bool clamp = true) const;

 private:
  RunConfig cfg_;
  std::optional<ConsistencyModel> model_;
};

/// inputs are image files or directories of images (sorted by name). The
/// i-th condition uses seed + i and is written as <stem>_gen.png.
std::vector<std::filesystem::path> cmd_sample(const std::filesystem::path& checkpoint,
                                              const std::vector<std::filesystem::path>& inputs, std::uint64_t seed,
                                              const std::filesystem::path& out_dir, bool clamp = true);

/// Evaluates the checkpoint (or the identity baseline when checkpoint is
/// empty) on the configured held-out data; writes eval_<mode>.txt/.csv.
MetricReport cmd_eval(const RunConfig& cfg, const std::filesystem::path& checkpoint);

}  // namespace ccm
