// Copyright 2026 The CCM Authors
// SPDX-License-Identifier: Apache-2.0

#include "ccm/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "ccm/hash.hpp"

namespace ccm {

namespace {

enum class Stream : std::uint32_t { lowlight = 1, modality = 2, crop = 3 };

std::mt19937_64 item_rng(std::uint64_t seed, std::uint64_t index, Stream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

std::string item_id(const char* prefix, std::size_t index) {
  std::ostringstream os;
  os << prefix << '_';
  os.width(6);
  os.fill('0');
  os << index;
  return os.str();
}

float to_signed(double unit) { return static_cast<float>(2.0 * unit - 1.0); }

void check_gen_args(std::size_t size) {
  if (size < 8) throw std::invalid_argument("synthetic data: size must be at least 8, got " + std::to_string(size));
}

}  // namespace

void PairedSample::validate() const {
  if (!v.same_shape(r) || v.size() == 0) {
    throw ImageError("pair " + id + ": condition and target shapes differ or are empty");
  }
  auto in_range = [](const Image& img) {
    return std::all_of(img.data.begin(), img.data.end(), [](float x) { return x >= -1.0f && x <= 1.0f; });
  };
  if (!in_range(v) || !in_range(r)) throw ImageError("pair " + id + ": values outside [-1, 1]");
}

Image procedural_scene(std::mt19937_64& rng, std::size_t size) {
  const double n = static_cast<double>(size);
  double c0[3], c1[3];
  for (int k = 0; k < 3; ++k) {
    c0[k] = uniform(rng, 0.2, 0.95);
    c1[k] = uniform(rng, 0.2, 0.95);
  }
  const double angle = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const double dx = std::cos(angle), dy = std::sin(angle);
  const double extent = (std::abs(dx) + std::abs(dy)) * n;

  std::vector<double> img(3 * size * size);
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      const double px = static_cast<double>(x) + 0.5 - n / 2, py = static_cast<double>(y) + 0.5 - n / 2;
      const double s = std::clamp((px * dx + py * dy) / extent + 0.5, 0.0, 1.0);
      for (int k = 0; k < 3; ++k) img[(k * size + y) * size + x] = c0[k] * (1 - s) + c1[k] * s;
    }
  }

  const int shapes = std::uniform_int_distribution<int>(2, 4)(rng);
  constexpr int kSuper = 4;
  for (int i = 0; i < shapes; ++i) {
    const bool disc = std::uniform_int_distribution<int>(0, 1)(rng) == 0;
    const double cx = uniform(rng, 0.1, 0.9) * n, cy = uniform(rng, 0.1, 0.9) * n;
    const double a = uniform(rng, 0.1, 0.3) * n, b = uniform(rng, 0.1, 0.3) * n;
    double color[3];
    for (int k = 0; k < 3; ++k) color[k] = uniform(rng, 0.05, 1.0);
    for (std::size_t y = 0; y < size; ++y) {
      for (std::size_t x = 0; x < size; ++x) {
        int hits = 0;
        for (int sy = 0; sy < kSuper; ++sy) {
          for (int sx = 0; sx < kSuper; ++sx) {
            const double px = static_cast<double>(x) + (sx + 0.5) / kSuper - cx;
            const double py = static_cast<double>(y) + (sy + 0.5) / kSuper - cy;
            const bool inside = disc ? px * px + py * py <= a * a : std::abs(px) <= a && std::abs(py) <= b;
            hits += inside ? 1 : 0;
          }
        }
        if (hits == 0) continue;
        const double cover = static_cast<double>(hits) / (kSuper * kSuper);
        for (int k = 0; k < 3; ++k) {
          auto& p = img[(k * size + y) * size + x];
          p = p * (1 - cover) + color[k] * cover;
        }
      }
    }
  }

  Image out(3, size, size);
  for (std::size_t i = 0; i < img.size(); ++i) out.data[i] = static_cast<float>(img[i]);
  return out;
}

PairedSample synth_lowlight_item(std::uint64_t seed, std::size_t index, std::size_t size,
                                 std::optional<LowlightParams> params) {
  check_gen_args(size);
  auto rng = item_rng(seed, index, Stream::lowlight);
  const auto scene = procedural_scene(rng, size);
  LowlightParams p;
  p.gamma = uniform(rng, 2.0, 5.0);
  p.gain = uniform(rng, 0.1, 0.4);
  p.noise_sigma = uniform(rng, 0.01, 0.05);
  if (params) p = *params;
  std::normal_distribution<double> normal(0.0, 1.0);
  PairedSample s{Image(3, size, size), Image(3, size, size), item_id("lowlight", index)};
  for (std::size_t i = 0; i < scene.size(); ++i) {
    const double r = scene.data[i];
    const double v = std::clamp(p.gain * std::pow(r, p.gamma) + p.noise_sigma * normal(rng), 0.0, 1.0);
    s.r.data[i] = to_signed(r);
    s.v.data[i] = to_signed(v);
  }
  s.validate();
  return s;
}

Image modality_transform(const Image& v) {
  const auto l = luma(v);
  Image r(3, v.height, v.width);
  const std::size_t plane = v.height * v.width;
  for (std::size_t i = 0; i < plane; ++i) {
    const double u = std::clamp((static_cast<double>(l.data[i]) + 1.0) / 2.0, 0.0, 1.0);
    r.data[i] = to_signed(std::sqrt(u));
    r.data[plane + i] = to_signed(u * u);
    r.data[2 * plane + i] = to_signed(0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * u));
  }
  return r;
}

PairedSample synth_modality_item(std::uint64_t seed, std::size_t index, std::size_t size) {
  check_gen_args(size);
  auto rng = item_rng(seed, index, Stream::modality);
  auto scene = procedural_scene(rng, size);
  for (auto& x : scene.data) x = to_signed(x);
  PairedSample s{scene, modality_transform(scene), item_id("modality", index)};
  s.validate();
  return s;
}

Dataset synth_lowlight(std::uint64_t seed, std::size_t count, std::size_t size, std::size_t first_index) {
  Dataset out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(synth_lowlight_item(seed, first_index + i, size));
  return out;
}

Dataset synth_modality(std::uint64_t seed, std::size_t count, std::size_t size, std::size_t first_index) {
  Dataset out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(synth_modality_item(seed, first_index + i, size));
  return out;
}

void CropSpec::validate() const {
  if (mode != Mode::none && size == 0) throw std::invalid_argument("crop: size must be positive when cropping");
}

std::string_view crop_mode_name(CropSpec::Mode mode) {
  switch (mode) {
    case CropSpec::Mode::none: return "none";
    case CropSpec::Mode::random: return "random";
    case CropSpec::Mode::center: return "center";
  }
  return "none";
}

CropSpec::Mode parse_crop_mode(std::string_view name) {
  if (name == "none") return CropSpec::Mode::none;
  if (name == "random") return CropSpec::Mode::random;
  if (name == "center") return CropSpec::Mode::center;
  throw std::invalid_argument("unknown crop mode '" + std::string(name) + "' (expected none, random or center)");
}

namespace {

void check_crop(const PairedSample& pair, std::size_t size) {
  if (!pair.v.same_shape(pair.r)) throw ImageError("crop: pair " + pair.id + " has mismatched shapes");
  if (size == 0 || size > std::min(pair.v.height, pair.v.width)) {
    throw ImageError("crop: size " + std::to_string(size) + " exceeds " + std::to_string(pair.v.height) + "x" +
                     std::to_string(pair.v.width) + " for pair " + pair.id);
  }
}

}  // namespace

PairedSample random_crop_pair(const PairedSample& pair, std::size_t size, std::mt19937_64& rng) {
  check_crop(pair, size);
  const auto y = std::uniform_int_distribution<std::size_t>(0, pair.v.height - size)(rng);
  const auto x = std::uniform_int_distribution<std::size_t>(0, pair.v.width - size)(rng);
  return {crop(pair.v, y, x, size, size), crop(pair.r, y, x, size, size), pair.id};
}

PairedSample center_crop_pair(const PairedSample& pair, std::size_t size) {
  check_crop(pair, size);
  const auto y = (pair.v.height - size) / 2, x = (pair.v.width - size) / 2;
  return {crop(pair.v, y, x, size, size), crop(pair.r, y, x, size, size), pair.id};
}

PairedSample apply_crop(const PairedSample& pair, const CropSpec& spec, std::mt19937_64& rng) {
  spec.validate();
  PairedSample out = pair;
  if (spec.mode == CropSpec::Mode::random) out = random_crop_pair(pair, spec.size, rng);
  if (spec.mode == CropSpec::Mode::center) out = center_crop_pair(pair, spec.size);
  if (spec.resize_to > 0) {
    out.v = resize_bilinear(out.v, spec.resize_to, spec.resize_to);
    out.r = resize_bilinear(out.r, spec.resize_to, spec.resize_to);
  }
  return out;
}

namespace {

bool is_image_file(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".pgm" || ext == ".ppm" || ext == ".pnm";
}

std::map<std::string, std::filesystem::path> index_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw ImageError("not a directory: " + dir.string());
  std::map<std::string, std::filesystem::path> out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && is_image_file(e.path())) out.emplace(e.path().stem().string(), e.path());
  }
  return out;
}

Image to_rgb(const Image& gray) {
  Image out(3, gray.height, gray.width);
  for (int k = 0; k < 3; ++k) std::copy(gray.data.begin(), gray.data.end(), out.data.begin() + k * gray.size());
  return out;
}

}  // namespace

Dataset load_paired_folder(const std::filesystem::path& dir_v, const std::filesystem::path& dir_r,
                           const CropSpec& crop_spec, std::uint64_t seed, LoadReport* report) {
  crop_spec.validate();
  const auto vs = index_dir(dir_v);
  const auto rs = index_dir(dir_r);
  LoadReport local;
  Dataset out;
  bool any_common = false;
  for (const auto& [stem, v_path] : vs) {
    auto it = rs.find(stem);
    if (it == rs.end()) continue;
    any_common = true;
    try {
      PairedSample pair{read_image(v_path), read_image(it->second), stem};
      // Grayscale pairs with an RGB partner are replicated to three channels.
      if (pair.v.channels == 1 && pair.r.channels == 3) pair.v = to_rgb(pair.v);
      if (pair.r.channels == 1 && pair.v.channels == 3) pair.r = to_rgb(pair.r);
      if (!pair.v.same_shape(pair.r)) {
        throw ImageError("shape " + shape_str(pair.v.shape()) + " vs " + shape_str(pair.r.shape()));
      }
      auto rng = item_rng(seed, fnv1a(stem), Stream::crop);
      out.push_back(apply_crop(pair, crop_spec, rng));
      out.back().validate();
    } catch (const std::exception& e) {
      local.skipped.push_back(v_path.string() + ": " + e.what());
    }
  }
  if (!any_common) {
    throw ImageError("no common file stems between " + dir_v.string() + " and " + dir_r.string());
  }
  if (out.empty()) throw ImageError("no decodable pairs between " + dir_v.string() + " and " + dir_r.string());
  local.paired = out.size();
  if (report) *report = std::move(local);
  return out;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> csv_split(const std::string& line) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        out.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        out.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back();
    } else {
      out.back() += c;
    }
  }
  return out;
}

}  // namespace

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ImageError("cannot write manifest " + path.string());
  out << "id,v_path,r_path,channels,height,width\n";
  for (const auto& row : rows) {
    if (row.shape.size() != 3) throw ImageError("manifest: row " + row.id + " needs a (C,H,W) shape");
    out << csv_field(row.id) << ',' << csv_field(row.v_path) << ',' << csv_field(row.r_path) << ',' << row.shape[0]
        << ',' << row.shape[1] << ',' << row.shape[2] << '\n';
  }
  if (!out) throw ImageError("write failed for manifest " + path.string());
}

std::vector<ManifestRow> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ImageError("cannot open manifest " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "id,v_path,r_path,channels,height,width") throw ImageError(path.string() + ": bad manifest header");
  std::vector<ManifestRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = csv_split(line);
    if (f.size() != 6) throw ImageError(path.string() + ": malformed manifest row");
    try {
      rows.push_back({f[0], f[1], f[2], {std::stoul(f[3]), std::stoul(f[4]), std::stoul(f[5])}});
    } catch (const std::logic_error&) {
      throw ImageError(path.string() + ": malformed manifest row");
    }
  }
  return rows;
}

}  // namespace ccm
