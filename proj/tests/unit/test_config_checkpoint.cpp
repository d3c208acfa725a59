// Copyright 2026 The CCM Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>

#include "ccm/checkpoint.hpp"
#include "ccm/config.hpp"
#include "ccm/data.hpp"

namespace ccm {
namespace {

namespace fs = std::filesystem;

TEST(Config, DefaultsAndAccessors) {
  const RunConfig cfg;
  EXPECT_EQ(cfg.get("schedule.sigma_max"), "80");
  EXPECT_EQ(cfg.schedule().rho, 7.0);
  EXPECT_EQ(cfg.train().s1, 1280u);
  EXPECT_EQ(cfg.train().optimizer, OptimizerKind::adam);
  EXPECT_EQ(cfg.net().channel_mults, (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(cfg.eval().mode, EvalMode::crop);
  EXPECT_NO_THROW(cfg.validate());
}

TEST(Config, ParseCommentsAndWhitespace) {
  const auto cfg = RunConfig::parse("# run\n  steps.s1 = 160 \n\ntrain.lr=0.001\nnet.channel_mults = 1,2,2\n");
  EXPECT_EQ(cfg.train().s1, 160u);
  EXPECT_EQ(cfg.train().lr, 0.001);
  EXPECT_EQ(cfg.net().channel_mults, (std::vector<std::size_t>{1, 2, 2}));
}

TEST(Config, UnknownKeyIsNamed) {
  try {
    RunConfig::parse("seed = 1\nbogus.key = 3\n", "run.cfg");
    FAIL();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("bogus.key"), std::string::npos) << msg;
    EXPECT_NE(msg.find("run.cfg:2"), std::string::npos) << msg;
  }
  RunConfig cfg;
  EXPECT_THROW(cfg.set("nope", "1"), ConfigError);
  EXPECT_THROW(cfg.set_assignment("seed"), ConfigError);
  EXPECT_THROW(RunConfig::parse("just words\n"), ConfigError);
}

TEST(Config, ValueValidation) {
  RunConfig cfg;
  cfg.set("data.count", "0");
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = RunConfig();
  cfg.set("train.optimizer", "lbfgs");
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = RunConfig();
  cfg.set("seed", "-3");
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = RunConfig();
  cfg.set("schedule.sigma_min", "100");
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = RunConfig();
  cfg.set("task", "paired-folder");
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Config, TextRoundTripAndHash) {
  RunConfig cfg;
  cfg.set("seed", "42");
  cfg.set("net.base_width", "16");
  const auto again = RunConfig::parse(cfg.to_text());
  EXPECT_EQ(again.to_text(), cfg.to_text());
  EXPECT_EQ(again.hash(), cfg.hash());
  RunConfig moved = cfg;
  moved.set("out_dir", "elsewhere");
  moved.set("train.log_every", "7");
  EXPECT_EQ(moved.hash(), cfg.hash());
  RunConfig changed = cfg;
  changed.set("train.lr", "0.1");
  EXPECT_NE(changed.hash(), cfg.hash());
}

TEST(Config, EveryKeyIsDocumented) {
  for (const auto& key : RunConfig::keys()) {
    EXPECT_FALSE(key.doc.empty()) << key.name;
    EXPECT_NO_THROW(RunConfig().get(key.name));
  }
}

TEST(Config, LoadMissingFile) { EXPECT_THROW(RunConfig::load("/nonexistent/run.cfg"), ConfigError); }

Checkpoint sample_checkpoint() {
  RunConfig cfg;
  cfg.set("net.base_width", "8");
  cfg.set("net.time_embed_dim", "8");
  cfg.set("data.count", "4");
  cfg.set("data.size", "8");
  cfg.set("train.iterations", "2");
  cfg.set("train.batch", "2");
  const auto data = synth_lowlight(0, 4, 8);
  Trainer trainer(cfg.net(), cfg.schedule(), cfg.train(), data);
  trainer.run();
  Checkpoint ckpt;
  ckpt.config_hash = cfg.hash();
  ckpt.config_text = cfg.identity_text();
  ckpt.state = trainer.state();
  return ckpt;
}

TEST(Checkpoint, EncodeDecodeEncodeIsByteIdentical) {
  const auto ckpt = sample_checkpoint();
  const auto bytes = encode_checkpoint(ckpt);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "CCMK");
  const auto back = decode_checkpoint(bytes);
  EXPECT_EQ(back.config_hash, ckpt.config_hash);
  EXPECT_EQ(back.config_text, ckpt.config_text);
  EXPECT_EQ(back.state.iteration, 2u);
  EXPECT_EQ(back.state.rng_state, ckpt.state.rng_state);
  EXPECT_EQ(back.state.optimizer.step, 2u);
  EXPECT_EQ(encode_checkpoint(back), bytes);
}

TEST(Checkpoint, SaveLoadSaveFiles) {
  const auto dir = fs::temp_directory_path() / "ccm_ckpt_test";
  fs::remove_all(dir);
  fs::create_directories(dir);
  save_checkpoint(dir / "a.ccmk", sample_checkpoint());
  save_checkpoint(dir / "b.ccmk", load_checkpoint(dir / "a.ccmk"));
  auto read = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  EXPECT_EQ(read(dir / "a.ccmk"), read(dir / "b.ccmk"));
  EXPECT_THROW(load_checkpoint(dir / "missing.ccmk"), CheckpointError);
  fs::remove_all(dir);
}

TEST(Checkpoint, DetectsCorruption) {
  const auto bytes = encode_checkpoint(sample_checkpoint());
  for (std::size_t pos : {std::size_t{0}, std::size_t{5}, bytes.size() / 2, bytes.size() - 1}) {
    auto bad = bytes;
    bad[pos] ^= 0x40;
    EXPECT_THROW(decode_checkpoint(bad), CheckpointError) << pos;
  }
  auto truncated = bytes;
  truncated.resize(bytes.size() - 9);
  EXPECT_THROW(decode_checkpoint(truncated), CheckpointError);
  EXPECT_THROW(decode_checkpoint({}), CheckpointError);
}

}  // namespace
}  // namespace ccm
