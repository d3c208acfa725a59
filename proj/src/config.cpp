// Copyright 2026 The CCM Authors
// SPDX-License-Identifier: Apache-2.0

#include "ccm/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "ccm/hash.hpp"

namespace ccm {

const std::vector<ConfigKey>& RunConfig::keys() {
  static const std::vector<ConfigKey> k = {
      {"task", "synth-lowlight", "synth-lowlight | synth-modality | paired-folder", true},
      {"seed", "0", "single source of randomness (CCM_SEED environment fallback)", true},
      {"out_dir", "run", "output directory for data, checkpoints, logs and reports", false},
      {"predictor", "consistency", "consistency | identity (returns the condition unchanged)", true},
      {"data.channels", "3", "image channels", true},
      {"data.count", "500", "training pairs generated by synth tasks", true},
      {"data.size", "16", "synthetic image side length", true},
      {"data.holdout", "50", "held-out synth pairs, indices following the training pairs", true},
      {"data.dir_v", "", "condition image folder (paired-folder, or eval on files)", true},
      {"data.dir_r", "", "target image folder", true},
      {"crop.mode", "none", "none | random | center, applied when loading folders", true},
      {"crop.size", "0", "crop window side", true},
      {"crop.resize_to", "0", "bilinear resize after cropping; 0 keeps extents", true},
      {"schedule.sigma_min", "0.002", "minimal noise level epsilon", true},
      {"schedule.sigma_max", "80", "maximal noise level T", true},
      {"schedule.rho", "7", "discretization curvature", true},
      {"schedule.sigma_data", "0.5", "data scale in the skip/out scalings", true},
      {"steps.s0", "10", "initial discretization steps", true},
      {"steps.s1", "1280", "final discretization steps", true},
      {"net.base_width", "32", "U-Net width at full resolution", true},
      {"net.channel_mults", "1,2", "width multiplier per resolution stage", true},
      {"net.depth", "1", "residual blocks per stage", true},
      {"net.time_embed_dim", "64", "noise-level embedding width", true},
      {"train.iterations", "5000", "total iterations K", true},
      {"train.lr", "0.0002", "learning rate", true},
      {"train.batch", "8", "pairs per iteration", true},
      {"train.optimizer", "adam", "adam | sgd", true},
      {"train.huber_c", "auto", "pseudo-Huber constant; auto = 0.00054 sqrt(C*H*W)", true},
      {"train.ema_decay", "0", "teacher EMA decay; 0 copies the student every step", true},
      {"train.crop_size", "0", "random training window cut at each draw; 0 uses whole images", true},
      {"train.log_every", "100", "iterations per log row", false},
      {"train.checkpoint_every", "1000", "iterations per periodic checkpoint; 0 disables", false},
      {"eval.mode", "crop", "crop | full-resize", false},
      {"eval.size", "0", "center-crop window or resize target; 0 uses whole images", false},
      {"eval.ssim", "luma", "luma | per-channel", false},
  };
  return k;
}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

const ConfigKey* find_key(std::string_view name) {
  for (const auto& k : RunConfig::keys()) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty()) {
    throw ConfigError("config: " + key + " expects a non-negative integer, got '" + v + "'");
  }
  return out;
}

double to_f64(const std::string& key, const std::string& v) {
  double out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty() || !std::isfinite(out)) {
    throw ConfigError("config: " + key + " expects a finite number, got '" + v + "'");
  }
  return out;
}

void one_of(const std::string& key, const std::string& v, std::initializer_list<std::string_view> allowed) {
  for (auto a : allowed) {
    if (v == a) return;
  }
  std::string list;
  for (auto a : allowed) list += (list.empty() ? "" : ", ") + std::string(a);
  throw ConfigError("config: " + key + " must be one of " + list + ", got '" + v + "'");
}

}  // namespace

RunConfig::RunConfig() {
  for (const auto& k : keys()) values_.emplace(std::string(k.name), std::string(k.default_value));
  if (const char* env = std::getenv("CCM_SEED"); env && *env) {
    to_u64("CCM_SEED", env);
    values_["seed"] = env;
  }
}

RunConfig RunConfig::parse(std::string_view text, std::string_view origin) {
  RunConfig cfg;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    auto line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    if (line.find('=') == std::string_view::npos) {
      throw ConfigError("config: " + std::string(origin) + ":" + std::to_string(line_no) +
                        ": expected key = value");
    }
    try {
      cfg.set_assignment(line);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string(e.what()) + " (" + std::string(origin) + ":" + std::to_string(line_no) + ")");
    }
  }
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

void RunConfig::set(std::string_view key, std::string_view value) {
  if (!find_key(key)) throw ConfigError("config: unknown key '" + std::string(key) + "'");
  values_[std::string(key)] = std::string(trim(value));
}

void RunConfig::set_assignment(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError("config: expected key=value, got '" + std::string(assignment) + "'");
  }
  set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

const std::string& RunConfig::get(std::string_view key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("config: unknown key '" + std::string(key) + "'");
  return it->second;
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

std::string RunConfig::identity_text() const {
  std::string out;
  for (const auto& [k, v] : values_) {
    if (find_key(k)->hashed) out += k + " = " + v + "\n";
  }
  return out;
}

std::uint64_t RunConfig::hash() const { return fnv1a(identity_text()); }

void RunConfig::validate() const {
  one_of("task", get("task"), {"synth-lowlight", "synth-modality", "paired-folder"});
  one_of("predictor", get("predictor"), {"consistency", "identity"});
  one_of("crop.mode", get("crop.mode"), {"none", "random", "center"});
  one_of("train.optimizer", get("train.optimizer"), {"adam", "sgd"});
  one_of("eval.mode", get("eval.mode"), {"crop", "full-resize"});
  one_of("eval.ssim", get("eval.ssim"), {"luma", "per-channel"});
  seed();
  if (out_dir().empty()) throw ConfigError("config: out_dir must not be empty");
  if (channels() != 1 && channels() != 3) throw ConfigError("config: data.channels must be 1 or 3");
  if (task() != "paired-folder") {
    if (data_count() < 1) throw ConfigError("config: data.count must be at least 1");
    if (data_size() < 8) throw ConfigError("config: data.size must be at least 8");
    if (channels() != 3) throw ConfigError("config: synthetic tasks produce 3 channels");
    data_holdout();
  } else {
    if (dir_v().empty() || dir_r().empty()) {
      throw ConfigError("config: paired-folder needs data.dir_v and data.dir_r");
    }
    for (const auto& d : {dir_v(), dir_r()}) {
      if (!std::filesystem::is_directory(d)) throw ConfigError("config: directory does not exist: " + d.string());
    }
  }
  try {
    crop().validate();
    schedule().validate();
    net().validate();
    train().validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  log_every();
  checkpoint_every();
  eval();
}

std::string RunConfig::task() const { return get("task"); }
std::uint64_t RunConfig::seed() const { return to_u64("seed", get("seed")); }
std::filesystem::path RunConfig::out_dir() const { return get("out_dir"); }
std::string RunConfig::predictor() const { return get("predictor"); }
std::size_t RunConfig::channels() const { return to_u64("data.channels", get("data.channels")); }
std::size_t RunConfig::data_count() const { return to_u64("data.count", get("data.count")); }
std::size_t RunConfig::data_size() const { return to_u64("data.size", get("data.size")); }
std::size_t RunConfig::data_holdout() const { return to_u64("data.holdout", get("data.holdout")); }
std::filesystem::path RunConfig::dir_v() const { return get("data.dir_v"); }
std::filesystem::path RunConfig::dir_r() const { return get("data.dir_r"); }

CropSpec RunConfig::crop() const {
  CropSpec c;
  try {
    c.mode = parse_crop_mode(get("crop.mode"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.size = to_u64("crop.size", get("crop.size"));
  c.resize_to = to_u64("crop.resize_to", get("crop.resize_to"));
  return c;
}

NoiseSchedule RunConfig::schedule() const {
  NoiseSchedule s;
  s.sigma_min = to_f64("schedule.sigma_min", get("schedule.sigma_min"));
  s.sigma_max = to_f64("schedule.sigma_max", get("schedule.sigma_max"));
  s.rho = to_f64("schedule.rho", get("schedule.rho"));
  s.sigma_data = to_f64("schedule.sigma_data", get("schedule.sigma_data"));
  return s;
}

UNetConfig RunConfig::net() const {
  auto n = UNetConfig::for_channels(channels());
  n.base_width = to_u64("net.base_width", get("net.base_width"));
  n.depth = to_u64("net.depth", get("net.depth"));
  n.time_embed_dim = to_u64("net.time_embed_dim", get("net.time_embed_dim"));
  n.channel_mults.clear();
  std::string_view mults = get("net.channel_mults");
  while (!mults.empty()) {
    const auto comma = mults.find(',');
    const auto item = std::string(trim(mults.substr(0, comma)));
    n.channel_mults.push_back(to_u64("net.channel_mults", item));
    mults = comma == std::string_view::npos ? std::string_view{} : mults.substr(comma + 1);
  }
  return n;
}

TrainConfig RunConfig::train() const {
  TrainConfig t;
  t.lr = to_f64("train.lr", get("train.lr"));
  t.iterations = to_u64("train.iterations", get("train.iterations"));
  t.s0 = to_u64("steps.s0", get("steps.s0"));
  t.s1 = to_u64("steps.s1", get("steps.s1"));
  const auto& c = get("train.huber_c");
  t.huber_c = c == "auto" ? 0.0 : to_f64("train.huber_c", c);
  if (c != "auto" && !(t.huber_c > 0)) throw ConfigError("config: train.huber_c must be positive or auto");
  t.batch = to_u64("train.batch", get("train.batch"));
  try {
    t.optimizer = parse_optimizer(get("train.optimizer"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  t.ema_decay = to_f64("train.ema_decay", get("train.ema_decay"));
  t.crop_size = to_u64("train.crop_size", get("train.crop_size"));
  t.seed = seed();
  return t;
}

std::uint64_t RunConfig::log_every() const { return to_u64("train.log_every", get("train.log_every")); }
std::uint64_t RunConfig::checkpoint_every() const {
  return to_u64("train.checkpoint_every", get("train.checkpoint_every"));
}

EvalOptions RunConfig::eval() const {
  EvalOptions e;
  try {
    e.mode = parse_eval_mode(get("eval.mode"));
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(std::string("config: ") + ex.what());
  }
  e.size = to_u64("eval.size", get("eval.size"));
  e.seed = seed();
  e.ssim.mode = get("eval.ssim") == "per-channel" ? SsimOptions::Mode::per_channel : SsimOptions::Mode::luma;
  return e;
}

}  // namespace ccm
