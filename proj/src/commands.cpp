// Copyright 2026 The CCM Authors
// SPDX-License-Identifier: Apache-2.0

#include "ccm/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ccm/sampling.hpp"

namespace fs = std::filesystem;

namespace ccm {

namespace {

void say(const MessageFn& message, const std::string& text) {
  if (message) message(text);
}

void make_dirs(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw std::runtime_error("cannot create directory " + dir.string() + (ec ? ": " + ec.message() : ""));
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

Dataset synth(const RunConfig& cfg, std::size_t count, std::size_t first) {
  if (cfg.task() == "synth-lowlight") return synth_lowlight(cfg.seed(), count, cfg.data_size(), first);
  return synth_modality(cfg.seed(), count, cfg.data_size(), first);
}

std::size_t write_split(const Dataset& data, const fs::path& dir) {
  make_dirs(dir / "v");
  make_dirs(dir / "r");
  std::vector<ManifestRow> rows;
  for (const auto& pair : data) {
    const auto v = fs::path("v") / (pair.id + ".png");
    const auto r = fs::path("r") / (pair.id + ".png");
    write_image(dir / v, pair.v);
    write_image(dir / r, pair.r);
    rows.push_back({pair.id, v.generic_string(), r.generic_string(), pair.v.shape()});
  }
  write_manifest(dir / "manifest.csv", rows);
  return rows.size();
}

std::string checkpoint_name(std::uint64_t k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "ckpt_%08llu.ccmk", static_cast<unsigned long long>(k));
  return buf;
}

std::string format_record(const TrainRecord& rec) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "iter %llu  steps %llu  loss %.6g  wall %.2fs",
                static_cast<unsigned long long>(rec.iteration), static_cast<unsigned long long>(rec.steps),
                rec.mean_loss, rec.wall_seconds);
  return buf;
}

std::string csv_record(const TrainRecord& rec) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%llu,%llu,%.9g,%.3f\n", static_cast<unsigned long long>(rec.iteration),
                static_cast<unsigned long long>(rec.steps), rec.mean_loss, rec.wall_seconds);
  return buf;
}

std::vector<fs::path> expand_inputs(const std::vector<fs::path>& inputs) {
  std::vector<fs::path> out;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(in)) {
        if (!e.is_regular_file()) continue;
        auto ext = e.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
        if (ext == ".png" || ext == ".pgm" || ext == ".ppm" || ext == ".pnm") files.push_back(e.path());
      }
      std::sort(files.begin(), files.end());
      out.insert(out.end(), files.begin(), files.end());
    } else if (fs::is_regular_file(in)) {
      out.push_back(in);
    } else {
      throw ImageError("input does not exist: " + in.string());
    }
  }
  if (out.empty()) throw ImageError("sample: no input images");
  return out;
}

}  // namespace

Dataset resolve_dataset(const RunConfig& cfg, Split split, const MessageFn& message) {
  cfg.validate();
  const bool folders = cfg.task() == "paired-folder" || (!cfg.dir_v().empty() && !cfg.dir_r().empty());
  if (!folders) {
    if (split == Split::train) return synth(cfg, cfg.data_count(), 0);
    if (cfg.data_holdout() == 0) throw ConfigError("config: data.holdout is 0, nothing to evaluate");
    return synth(cfg, cfg.data_holdout(), cfg.data_count());
  }
  LoadReport report;
  auto data = load_paired_folder(cfg.dir_v(), cfg.dir_r(), split == Split::train ? cfg.crop() : CropSpec{},
                                 cfg.seed(), &report);
  say(message, "paired " + std::to_string(report.paired) + " images from " + cfg.dir_v().string() + " and " +
                   cfg.dir_r().string());
  for (const auto& s : report.skipped) say(message, "warning: skipped " + s);
  return data;
}

std::size_t cmd_synth(const RunConfig& cfg, const MessageFn& message) {
  cfg.validate();
  if (cfg.task() == "paired-folder") throw ConfigError("config: synth-data needs a synth-* task");
  const auto out = cfg.out_dir();
  const auto n = write_split(synth(cfg, cfg.data_count(), 0), out);
  say(message, "wrote " + std::to_string(n) + " pairs to " + out.string());
  if (cfg.data_holdout() > 0) {
    const auto h = write_split(synth(cfg, cfg.data_holdout(), cfg.data_count()), out / "holdout");
    say(message, "wrote " + std::to_string(h) + " held-out pairs to " + (out / "holdout").string());
  }
  return n;
}

fs::path cmd_train(const RunConfig& cfg, const TrainOptions& options) {
  cfg.validate();
  const auto out = cfg.out_dir();
  make_dirs(out);
  const auto final_path = out / "final.ccmk";
  Checkpoint ckpt;
  ckpt.config_hash = cfg.hash();
  ckpt.config_text = cfg.identity_text();

  if (cfg.predictor() == "identity") {
    ckpt.state.optimizer.kind = cfg.train().optimizer;
    save_checkpoint(final_path, ckpt);
    say(options.message, "wrote identity stub checkpoint " + final_path.string());
    return final_path;
  }

  const auto data = resolve_dataset(cfg, Split::train, options.message);
  const auto tcfg = cfg.train();
  std::optional<Trainer> trainer;
  if (!options.resume.empty()) {
    auto prev = load_checkpoint(options.resume);
    if (prev.config_hash != ckpt.config_hash) {
      if (!options.force) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "checkpoint config hash %016llx does not match config hash %016llx",
                      static_cast<unsigned long long>(prev.config_hash),
                      static_cast<unsigned long long>(ckpt.config_hash));
        throw ConfigMismatchError(std::string(buf) + " (use --force to resume anyway)");
      }
      say(options.message, "warning: resuming despite config hash mismatch");
    }
    if (prev.state.params.empty()) throw CheckpointError("checkpoint: cannot resume from an identity stub");
    trainer.emplace(cfg.net(), cfg.schedule(), tcfg, data, std::move(prev.state));
    say(options.message, "resumed at iteration " + std::to_string(trainer->state().iteration));
  } else {
    trainer.emplace(cfg.net(), cfg.schedule(), tcfg, data);
  }

  const bool append = !options.resume.empty();
  const auto mode = append ? std::ios::app : std::ios::trunc;
  std::ofstream log_txt(out / "train_log.txt", std::ios::binary | mode);
  std::ofstream log_csv(out / "train_log.csv", std::ios::binary | mode);
  if (!log_txt || !log_csv) throw std::runtime_error("cannot write training logs in " + out.string());
  if (!append) log_csv << "iteration,steps,mean_loss,wall_seconds\n";

  TrainCallbacks callbacks;
  callbacks.log_every = cfg.log_every();
  callbacks.on_log = [&](const TrainRecord& rec) {
    log_txt << format_record(rec) << '\n' << std::flush;
    log_csv << csv_record(rec) << std::flush;
    if (options.on_record) options.on_record(rec);
  };
  callbacks.checkpoint_every = cfg.checkpoint_every();
  callbacks.on_checkpoint = [&](const TrainState& state) {
    make_dirs(out / "checkpoints");
    Checkpoint c = ckpt;
    c.state = state;
    save_checkpoint(out / "checkpoints" / checkpoint_name(state.iteration), c);
  };

  try {
    trainer->run(callbacks);
  } catch (const NonFiniteLossError& e) {
    std::ostringstream diag;
    diag << e.what() << "\n\n" << cfg.identity_text();
    write_text(out / "nonfinite_loss.txt", diag.str());
    throw;
  }
  ckpt.state = trainer->state();
  save_checkpoint(final_path, ckpt);
  say(options.message, "wrote " + final_path.string());
  return final_path;
}

LoadedModel::LoadedModel(const Checkpoint& ckpt) : cfg_(RunConfig::parse(ckpt.config_text, "<checkpoint>")) {
  if (cfg_.predictor() == "identity") return;
  model_.emplace(cfg_.net(), cfg_.schedule(), clone_parameters(ckpt.state.params),
                 clone_parameters(ckpt.state.teacher));
}

LoadedModel LoadedModel::load(const fs::path& path) { return LoadedModel(load_checkpoint(path)); }

const ConsistencyModel& LoadedModel::model() const {
  if (!model_) throw std::logic_error("identity stub has no network");
  return *model_;
}

void LoadedModel::check_input(const Image& v, const std::string& what) const {
  if (!model_) return;
  const auto& net = model_->net().config();
  const std::string arch = "checkpoint architecture expects " + std::to_string(net.out_channels) +
                           " channels and extents divisible by " +
                           std::to_string(std::size_t{1} << (net.stages() - 1));
  if (v.channels != net.out_channels) {
    throw ShapeError(what + " is " + shape_str(v.shape()) + " but " + arch);
  }
  try {
    net.check_extent(v.height, v.width);
  } catch (const ShapeError&) {
    throw ShapeError(what + " is " + shape_str(v.shape()) + " but " + arch);
  }
}

Image LoadedModel::predict(const Image& v, std::uint64_t seed, bool clamp) const {
  if (!model_) return v;
  return sample_single_step(*model_, {v, seed, clamp});
}

std::vector<fs::path> cmd_sample(const fs::path& checkpoint, const std::vector<fs::path>& inputs, std::uint64_t seed,
                                 const fs::path& out_dir, bool clamp) {
  const auto model = LoadedModel::load(checkpoint);
  const auto files = expand_inputs(inputs);
  std::vector<Image> conds;
  for (const auto& f : files) {
    conds.push_back(read_image(f));
    model.check_input(conds.back(), "input " + f.string());
  }
  make_dirs(out_dir);
  std::vector<fs::path> written;
  for (std::size_t i = 0; i < files.size(); ++i) {
    const auto img = model.predict(conds[i], seed + i, clamp);
    auto path = out_dir / (files[i].stem().string() + "_gen.png");
    write_image(path, img);
    written.push_back(std::move(path));
  }
  return written;
}

MetricReport cmd_eval(const RunConfig& cfg, const fs::path& checkpoint) {
  const auto data = resolve_dataset(cfg, Split::holdout);
  const auto opts = cfg.eval();
  std::optional<LoadedModel> model;
  if (!checkpoint.empty()) model.emplace(LoadedModel::load(checkpoint));
  Predictor predict = [&](const Image& v, std::uint64_t seed) {
    if (!model) return v;
    model->check_input(v, "evaluation input");
    return model->predict(v, seed);
  };
  auto report = evaluate(data, predict, opts);
  const auto out = cfg.out_dir();
  make_dirs(out);
  const auto stem = "eval_" + report.mode;
  write_text(out / (stem + ".txt"), report.to_text());
  write_text(out / (stem + ".csv"), report.to_csv());
  return report;
}

}  // namespace ccm
