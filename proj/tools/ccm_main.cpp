// Copyright 2026 The CCM Authors
// SPDX-License-Identifier: Apache-2.0
//
// ccm: command-line front end over the C API.
//
//   ccm synth-data [--config F] [--set key=value]...
//   ccm train      [--config F] [--set key=value]... [--resume CKPT] [--force]
//   ccm sample     --checkpoint CKPT --input PATH... [--seed N] [--out DIR] [--no-clamp]
//   ccm eval       [--config F] [--set key=value]... (--checkpoint CKPT | --baseline)
//
// Failures print a single line "error code=<CODE> message=<text>" on stderr
// and exit with the numeric status.

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ccm/ccm.h"

namespace {

struct Failure {
  int code;
  std::string name;
  std::string message;
};

void check(ccm_status status) {
  if (status != CCM_OK) throw Failure{status, ccm_status_name(status), ccm_last_error()};
}

[[noreturn]] void usage_error(const std::string& message) {
  throw Failure{CCM_ERR_INVALID_ARGUMENT, "INVALID_ARGUMENT", message};
}

std::string one_line(std::string s) {
  for (auto& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

struct ConfigArgs {
  std::string path;
  std::vector<std::string> sets;
};

void add_config_options(CLI::App* cmd, ConfigArgs& args) {
  cmd->add_option("--config", args.path, "key = value configuration file");
  cmd->add_option("--set", args.sets, "override one key (key=value); repeatable")->take_all();
}

class Config {
 public:
  explicit Config(const ConfigArgs& args) {
    if (args.path.empty()) {
      check(ccm_config_new(&cfg_));
    } else {
      check(ccm_config_load(args.path.c_str(), &cfg_));
    }
    for (const auto& s : args.sets) check(ccm_config_set_assignment(cfg_, s.c_str()));
    check(ccm_config_validate(cfg_));
  }
  ~Config() { ccm_config_free(cfg_); }
  Config(const Config&) = delete;
  Config& operator=(const Config&) = delete;
  const ccm_config* get() const { return cfg_; }

 private:
  ccm_config* cfg_ = nullptr;
};

void print_line(const char* line, void*) { std::cout << line << '\n' << std::flush; }

void print_record(const ccm_train_record* r, void*) {
  std::printf("iter %llu  steps %llu  loss %.6g  wall %.2fs\n", static_cast<unsigned long long>(r->iteration),
              static_cast<unsigned long long>(r->steps), r->mean_loss, r->wall_seconds);
  std::fflush(stdout);
}

std::string fetch(ccm_status (*fn)(const ccm_report*, char*, size_t, size_t*), const ccm_report* report) {
  size_t needed = 0;
  check(fn(report, nullptr, 0, &needed));
  std::string out(needed, '\0');
  check(fn(report, out.data(), out.size(), &needed));
  out.resize(needed - 1);
  return out;
}

std::uint64_t default_seed() {
  const char* env = std::getenv("CCM_SEED");
  if (!env || !*env) return 0;
  try {
    std::size_t pos = 0;
    const auto v = std::stoull(env, &pos);
    if (pos != std::string(env).size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    usage_error(std::string("CCM_SEED is not an unsigned integer: ") + env);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conditional consistency models: synthesize data, train, sample and evaluate"};
  app.require_subcommand(1);
  app.fallthrough();
  std::size_t threads = 1;
  app.add_option("--threads", threads, "worker threads (1 guarantees bitwise reproducibility)")
      ->check(CLI::PositiveNumber);

  auto* synth = app.add_subcommand("synth-data", "write synthetic paired images and manifests");
  ConfigArgs synth_cfg;
  add_config_options(synth, synth_cfg);

  auto* train = app.add_subcommand("train", "train a model and write checkpoints and logs");
  ConfigArgs train_cfg;
  std::string resume;
  bool force = false;
  add_config_options(train, train_cfg);
  train->add_option("--resume", resume, "continue from a checkpoint");
  train->add_flag("--force", force, "resume even if the config hash differs");

  auto* sample = app.add_subcommand("sample", "single-step generation for condition images");
  std::string sample_ckpt, sample_out = "samples";
  std::vector<std::string> inputs;
  std::uint64_t seed = 0;
  bool no_clamp = false;
  sample->add_option("--checkpoint", sample_ckpt, "checkpoint file")->required();
  sample->add_option("--input", inputs, "condition image files or directories")->required()->take_all();
  auto* seed_opt = sample->add_option("--seed", seed, "base seed; input i uses seed + i (default CCM_SEED or 0)");
  sample->add_option("--out", sample_out, "output directory");
  sample->add_flag("--no-clamp", no_clamp, "keep values outside [-1, 1] before quantization");

  auto* eval = app.add_subcommand("eval", "PSNR/SSIM of single-step samples on held-out pairs");
  ConfigArgs eval_cfg;
  std::string eval_ckpt, mode;
  bool baseline = false;
  add_config_options(eval, eval_cfg);
  auto* ckpt_opt = eval->add_option("--checkpoint", eval_ckpt, "checkpoint file");
  auto* base_opt = eval->add_flag("--baseline", baseline, "score the condition itself (identity predictor)");
  ckpt_opt->excludes(base_opt);
  eval->add_option("--mode", mode, "crop | full-resize (overrides eval.mode)");

  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
      std::cout << app.help();
      return 0;
    } catch (const CLI::CallForAllHelp&) {
      std::cout << app.help("", CLI::AppFormatMode::All);
      return 0;
    } catch (const CLI::ParseError& e) {
      usage_error(e.what());
    }
    ccm_set_threads(threads);

    if (*synth) {
      Config cfg(synth_cfg);
      size_t written = 0;
      check(ccm_synth_data(cfg.get(), print_line, nullptr, &written));
    } else if (*train) {
      Config cfg(train_cfg);
      check(ccm_train(cfg.get(), resume.empty() ? nullptr : resume.c_str(), force ? 1 : 0, print_record, print_line,
                      nullptr, nullptr, 0, nullptr));
    } else if (*sample) {
      if (!*seed_opt) seed = default_seed();
      std::vector<const char*> in;
      for (const auto& s : inputs) in.push_back(s.c_str());
      size_t written = 0;
      check(ccm_sample_files(sample_ckpt.c_str(), in.data(), in.size(), seed, sample_out.c_str(), no_clamp ? 0 : 1,
                             &written));
      std::cout << "wrote " << written << " samples to " << sample_out << '\n';
    } else if (*eval) {
      if (eval_ckpt.empty() && !baseline) usage_error("eval needs --checkpoint or --baseline");
      if (!mode.empty()) eval_cfg.sets.push_back("eval.mode=" + mode);
      Config cfg(eval_cfg);
      ccm_report* report = nullptr;
      check(ccm_eval(cfg.get(), baseline ? nullptr : eval_ckpt.c_str(), &report));
      std::string text;
      try {
        text = fetch(ccm_report_text, report);
      } catch (...) {
        ccm_report_free(report);
        throw;
      }
      ccm_report_free(report);
      std::cout << text;
    }
  } catch (const Failure& f) {
    std::cout.flush();
    std::cerr << "error code=" << f.name << " message=" << one_line(f.message) << '\n';
    return f.code;
  }
  return 0;
}
