// Copyright 2026 The CCM Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include "ccm/data.hpp"
#include "ccm/image.hpp"

namespace ccm {
namespace {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("ccm_test_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

double mean(const Image& img) {
  return std::accumulate(img.data.begin(), img.data.end(), 0.0) / static_cast<double>(img.size());
}

// Pixel value encodes its own position so crops reveal their offsets.
Image coordinate_image(std::size_t c, std::size_t h, std::size_t w) {
  Image img(c, h, w);
  for (std::size_t k = 0; k < c; ++k)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) img.at(k, y, x) = static_cast<float>(y * w + x) / (h * w) * 2.0f - 1.0f;
  return img;
}

TEST(Normalization, AffineEndpoints) {
  EXPECT_EQ(to_unit(255), 1.0f);
  EXPECT_EQ(to_unit(0), -1.0f);
  for (int b = 0; b < 256; ++b) EXPECT_EQ(to_byte(to_unit(static_cast<std::uint8_t>(b))), b);
  EXPECT_EQ(to_byte(3.0f), 255);
  EXPECT_EQ(to_byte(-3.0f), 0);
}

TEST(SynthLowlight, DarkerThanTarget) {
  const auto data = synth_lowlight(3, 100, 16);
  ASSERT_EQ(data.size(), 100u);
  for (const auto& pair : data) {
    EXPECT_LT(mean(pair.v), mean(pair.r)) << pair.id;
    EXPECT_NO_THROW(pair.validate());
  }
}

TEST(SynthLowlight, Deterministic) {
  const auto a = synth_lowlight(3, 5, 16), b = synth_lowlight(3, 5, 16), c = synth_lowlight(4, 5, 16);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(a[i].v.data, b[i].v.data);
    EXPECT_EQ(a[i].r.data, b[i].r.data);
    EXPECT_EQ(a[i].id, b[i].id);
    EXPECT_NE(a[i].r.data, c[i].r.data);
  }
}

TEST(SynthLowlight, ItemsArePureInSeedAndIndex) {
  const auto tail = synth_lowlight(3, 4, 16, 6);
  for (std::size_t i = 0; i < 4; ++i) {
    const auto item = synth_lowlight_item(3, 6 + i, 16);
    EXPECT_EQ(tail[i].v.data, item.v.data);
    EXPECT_EQ(tail[i].id, item.id);
  }
  EXPECT_EQ(synth_lowlight_item(3, 7, 16).id, "lowlight_000007");
}

TEST(SynthLowlight, IdentityOverride) {
  const auto pair = synth_lowlight_item(3, 2, 16, LowlightParams{1.0, 1.0, 0.0});
  for (std::size_t i = 0; i < pair.v.size(); ++i) EXPECT_NEAR(pair.v.data[i], pair.r.data[i], 1e-6);
}

TEST(SynthLowlight, Preconditions) { EXPECT_THROW(synth_lowlight(1, 2, 4), std::invalid_argument); }

TEST(SynthModality, FunctionalMapping) {
  const auto data = synth_modality(5, 8, 16);
  for (const auto& pair : data) {
    const auto again = modality_transform(pair.v);
    EXPECT_EQ(again.data, pair.r.data);
    EXPECT_EQ(modality_transform(pair.v).data, again.data);
    EXPECT_NO_THROW(pair.validate());
  }
}

TEST(SynthModality, LumaCorrelatesWithFirstChannel) {
  const auto data = synth_modality(5, 50, 16);
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0, n = 0;
  for (const auto& pair : data) {
    const auto l = luma(pair.v);
    for (std::size_t i = 0; i < l.size(); ++i) {
      const double x = l.data[i], y = pair.r.data[i];
      sx += x, sy += y, sxx += x * x, syy += y * y, sxy += x * y, n += 1;
    }
  }
  const double corr = (sxy - sx * sy / n) / std::sqrt((sxx - sx * sx / n) * (syy - sy * sy / n));
  EXPECT_GT(corr, 0.9);
}

TEST(Crop, FullFrameIsIdentity) {
  const auto pair = synth_lowlight_item(1, 0, 16);
  std::mt19937_64 rng(1);
  const auto out = random_crop_pair(pair, 16, rng);
  EXPECT_EQ(out.v.data, pair.v.data);
  EXPECT_EQ(out.r.data, pair.r.data);
}

TEST(Crop, SharedWindowAndBounds) {
  PairedSample pair{coordinate_image(3, 20, 13), coordinate_image(3, 20, 13), "c"};
  std::mt19937_64 rng(2);
  std::set<std::pair<std::size_t, std::size_t>> offsets;
  for (int i = 0; i < 200; ++i) {
    const auto out = random_crop_pair(pair, 8, rng);
    ASSERT_EQ(out.v.data, out.r.data);
    ASSERT_EQ(out.v.shape(), (Shape{3, 8, 8}));
    const auto first = static_cast<std::size_t>(std::lround((out.v.data[0] + 1.0f) / 2.0f * 260.0f));
    const std::size_t y = first / 13, x = first % 13;
    ASSERT_LE(y, 12u);
    ASSERT_LE(x, 5u);
    offsets.insert({y, x});
  }
  EXPECT_GT(offsets.size(), 30u);
}

TEST(Crop, Errors) {
  const auto pair = synth_lowlight_item(1, 0, 16);
  std::mt19937_64 rng(1);
  EXPECT_THROW(random_crop_pair(pair, 17, rng), ImageError);
  EXPECT_THROW(center_crop_pair(pair, 17), ImageError);
  CropSpec spec;
  spec.mode = CropSpec::Mode::random;
  EXPECT_THROW(spec.validate(), std::invalid_argument);
  EXPECT_THROW(parse_crop_mode("diagonal"), std::invalid_argument);
}

TEST(Crop, PipelinePreservesEqualPairs) {
  const auto base = synth_lowlight_item(1, 0, 16);
  PairedSample pair{base.r, base.r, "same"};
  std::mt19937_64 rng(3);
  for (auto mode : {CropSpec::Mode::none, CropSpec::Mode::random, CropSpec::Mode::center}) {
    CropSpec spec{mode, 10, 12};
    const auto out = apply_crop(pair, spec, rng);
    EXPECT_EQ(out.v.data, out.r.data) << crop_mode_name(mode);
    EXPECT_EQ(out.v.height, 12u);
  }
}

TEST(Image, PngRoundTrip) {
  TempDir dir("png");
  std::mt19937_64 rng(4);
  for (std::size_t c : {1u, 3u}) {
    Image img(c, 5, 7);
    for (auto& x : img.data) x = to_unit(static_cast<std::uint8_t>(rng() % 256));
    const auto path = dir.path / ("img" + std::to_string(c) + ".png");
    write_image(path, img);
    const auto back = read_image(path);
    EXPECT_EQ(back.shape(), img.shape());
    EXPECT_EQ(back.data, img.data);
  }
}

TEST(Image, PnmFallback) {
  TempDir dir("pnm");
  {
    std::ofstream out(dir.path / "g.pgm", std::ios::binary);
    out << "P5\n# comment\n2 1\n255\n";
    out.put(static_cast<char>(0)).put(static_cast<char>(255));
  }
  const auto g = read_image(dir.path / "g.pgm");
  EXPECT_EQ(g.shape(), (Shape{1, 1, 2}));
  EXPECT_EQ(g.data, (std::vector<float>{-1.0f, 1.0f}));
  Image rgb(3, 2, 2, 0.0f);
  rgb.at(1, 1, 0) = 1.0f;
  write_image(dir.path / "c.ppm", rgb);
  const auto back = read_image(dir.path / "c.ppm");
  EXPECT_EQ(back.at(1, 1, 0), 1.0f);
  EXPECT_EQ(back.at(0, 0, 0), to_unit(to_byte(0.0f)));
}

TEST(Image, RejectsGarbage) {
  TempDir dir("garbage");
  std::ofstream(dir.path / "x.png") << "definitely not an image";
  EXPECT_THROW(read_image(dir.path / "x.png"), ImageError);
  EXPECT_THROW(read_image(dir.path / "missing.png"), ImageError);
}

TEST(Image, ResizeConstantAndExtent) {
  const Image img(3, 16, 16, 0.25f);
  const auto out = resize_bilinear(img, 256, 256);
  EXPECT_EQ(out.shape(), (Shape{3, 256, 256}));
  for (float x : out.data) ASSERT_FLOAT_EQ(x, 0.25f);
}

TEST(Image, LumaWeights) {
  Image img(3, 1, 1);
  img.data = {1.0f, 0.0f, 0.0f};
  EXPECT_NEAR(luma(img).data[0], 0.299f, 1e-6);
}

class FolderFixture : public ::testing::Test {
 protected:
  TempDir dir{"folders"};
  fs::path dv = dir.path / "v", dr = dir.path / "r";
  void SetUp() override {
    fs::create_directories(dv);
    fs::create_directories(dr);
  }
  void put(const fs::path& d, const std::string& name, const Image& img) { write_image(d / name, img); }
};

TEST_F(FolderFixture, PairsByStemIntersection) {
  for (const char* s : {"a", "b", "c"}) put(dv, std::string(s) + ".png", Image(3, 8, 8, 0.0f));
  for (const char* s : {"b", "c", "d"}) put(dr, std::string(s) + ".png", Image(3, 8, 8, 0.5f));
  LoadReport report;
  const auto data = load_paired_folder(dv, dr, CropSpec{}, 0, &report);
  ASSERT_EQ(data.size(), 2u);
  EXPECT_EQ(report.paired, 2u);
  EXPECT_EQ(data[0].id, "b");
  EXPECT_EQ(data[1].id, "c");
}

TEST_F(FolderFixture, ResizeTo256) {
  put(dv, "a.png", Image(3, 20, 30, 0.0f));
  put(dr, "a.png", Image(3, 20, 30, 0.0f));
  CropSpec spec;
  spec.resize_to = 256;
  const auto data = load_paired_folder(dv, dr, spec, 0);
  EXPECT_EQ(data.at(0).v.shape(), (Shape{3, 256, 256}));
  EXPECT_EQ(data.at(0).r.shape(), (Shape{3, 256, 256}));
}

TEST_F(FolderFixture, ByteEndpoints) {
  Image img(1, 1, 2);
  img.data = {1.0f, -1.0f};
  put(dv, "a.png", img);
  put(dr, "a.png", img);
  const auto data = load_paired_folder(dv, dr, CropSpec{}, 0);
  EXPECT_EQ(data.at(0).v.data, (std::vector<float>{1.0f, -1.0f}));
}

TEST_F(FolderFixture, SkipsUndecodableAndReports) {
  put(dv, "a.png", Image(3, 8, 8));
  put(dr, "a.png", Image(3, 8, 8));
  put(dv, "b.png", Image(3, 8, 8));
  std::ofstream(dr / "b.png") << "broken";
  LoadReport report;
  const auto data = load_paired_folder(dv, dr, CropSpec{}, 0, &report);
  EXPECT_EQ(data.size(), 1u);
  ASSERT_EQ(report.skipped.size(), 1u);
  EXPECT_NE(report.skipped[0].find("b.png"), std::string::npos);
}

TEST_F(FolderFixture, GrayReplicatedAgainstRgb) {
  put(dv, "a.png", Image(1, 8, 8, 0.0f));
  put(dr, "a.png", Image(3, 8, 8, 0.0f));
  const auto data = load_paired_folder(dv, dr, CropSpec{}, 0);
  EXPECT_EQ(data.at(0).v.channels, 3u);
}

TEST_F(FolderFixture, EmptyIntersectionFails) {
  put(dv, "a.png", Image(3, 8, 8));
  put(dr, "z.png", Image(3, 8, 8));
  EXPECT_THROW(load_paired_folder(dv, dr, CropSpec{}, 0), ImageError);
}

TEST(Manifest, RoundTripWithQuoting) {
  TempDir dir("manifest");
  const std::vector<ManifestRow> rows{{"a", "v/a.png", "r/a.png", {3, 16, 16}},
                                      {"b,\"odd\"", "v/b c.png", "r/b.png", {1, 8, 4}}};
  write_manifest(dir.path / "m.csv", rows);
  const auto back = read_manifest(dir.path / "m.csv");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].id, rows[1].id);
  EXPECT_EQ(back[1].v_path, rows[1].v_path);
  EXPECT_EQ(back[1].shape, rows[1].shape);
}

TEST(PairedSample, ValidateRejectsBadPairs) {
  PairedSample p{Image(3, 4, 4), Image(3, 4, 5), "x"};
  EXPECT_THROW(p.validate(), ImageError);
  p.r = Image(3, 4, 4, 1.5f);
  EXPECT_THROW(p.validate(), ImageError);
}

}  // namespace
}  // namespace ccm
