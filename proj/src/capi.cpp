// Copyright 2026 The CCM Authors
// SPDX-License-Identifier: Apache-2.0

#include "ccm/ccm.h"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <string>

#include "ccm/commands.hpp"
#include "ccm/parallel.hpp"
#include "ccm/sampling.hpp"

struct ccm_config {
  ccm::RunConfig cfg;
};

struct ccm_report {
  ccm::MetricReport report;
};

struct ccm_model {
  ccm::LoadedModel model;
};

namespace {

thread_local std::string g_last_error;

ccm_status fail(ccm_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

template <typename Fn>
ccm_status guarded(Fn&& fn) {
  try {
    g_last_error.clear();
    fn();
    return CCM_OK;
  } catch (const ccm::ShapeError& e) {
    return fail(CCM_ERR_SHAPE, e.what());
  } catch (const ccm::ConfigMismatchError& e) {
    return fail(CCM_ERR_MISMATCH, e.what());
  } catch (const ccm::ConfigError& e) {
    return fail(CCM_ERR_CONFIG, e.what());
  } catch (const ccm::CheckpointError& e) {
    return fail(CCM_ERR_FORMAT, e.what());
  } catch (const ccm::ImageError& e) {
    return fail(CCM_ERR_IO, e.what());
  } catch (const ccm::NonFiniteLossError& e) {
    return fail(CCM_ERR_NUMERIC, e.what());
  } catch (const ccm::GraphError& e) {
    return fail(CCM_ERR_INTERNAL, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(CCM_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::out_of_range& e) {
    return fail(CCM_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(CCM_ERR_IO, e.what());
  } catch (const std::runtime_error& e) {
    return fail(CCM_ERR_IO, e.what());
  } catch (const std::exception& e) {
    return fail(CCM_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(CCM_ERR_INTERNAL, "unknown error");
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

void copy_out(const std::string& s, char* buf, std::size_t cap, std::size_t* needed) {
  if (needed) *needed = s.size() + 1;
  if (cap == 0 && !buf) return;
  require(buf != nullptr, "output buffer is null");
  if (cap < s.size() + 1) throw std::invalid_argument("output buffer too small");
  std::memcpy(buf, s.c_str(), s.size() + 1);
}

ccm::Image image_from(const float* data, std::size_t c, std::size_t h, std::size_t w) {
  require(data != nullptr, "image data is null");
  require(c > 0 && h > 0 && w > 0, "image extents must be positive");
  ccm::Image img(c, h, w);
  std::memcpy(img.data.data(), data, img.size() * sizeof(float));
  return img;
}

ccm::MessageFn message_fn(ccm_message_fn fn, void* user) {
  if (!fn) return {};
  return [fn, user](const std::string& line) { fn(line.c_str(), user); };
}

}  // namespace

extern "C" {

CCM_API const char* ccm_status_name(ccm_status status) {
  switch (status) {
    case CCM_OK: return "OK";
    case CCM_ERR_INVALID_ARGUMENT: return "INVALID_ARGUMENT";
    case CCM_ERR_CONFIG: return "CONFIG";
    case CCM_ERR_IO: return "IO";
    case CCM_ERR_FORMAT: return "FORMAT";
    case CCM_ERR_SHAPE: return "SHAPE";
    case CCM_ERR_NUMERIC: return "NUMERIC";
    case CCM_ERR_MISMATCH: return "MISMATCH";
    case CCM_ERR_INTERNAL: return "INTERNAL";
  }
  return "UNKNOWN";
}

CCM_API const char* ccm_last_error(void) { return g_last_error.c_str(); }

CCM_API const char* ccm_version(void) { return "0.1.0"; }

CCM_API void ccm_set_threads(size_t n) { ccm::set_num_threads(n); }

CCM_API size_t ccm_threads(void) { return ccm::num_threads(); }

CCM_API ccm_status ccm_config_new(ccm_config** out) {
  return guarded([&] {
    require(out != nullptr, "out is null");
    *out = new ccm_config{};
  });
}

CCM_API ccm_status ccm_config_load(const char* path, ccm_config** out) {
  return guarded([&] {
    require(path && out, "null argument");
    *out = new ccm_config{ccm::RunConfig::load(path)};
  });
}

CCM_API ccm_status ccm_config_parse(const char* text, ccm_config** out) {
  return guarded([&] {
    require(text && out, "null argument");
    *out = new ccm_config{ccm::RunConfig::parse(text)};
  });
}

CCM_API void ccm_config_free(ccm_config* cfg) { delete cfg; }

CCM_API ccm_status ccm_config_set(ccm_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    require(cfg && key && value, "null argument");
    cfg->cfg.set(key, value);
  });
}

CCM_API ccm_status ccm_config_set_assignment(ccm_config* cfg, const char* assignment) {
  return guarded([&] {
    require(cfg && assignment, "null argument");
    cfg->cfg.set_assignment(assignment);
  });
}

CCM_API ccm_status ccm_config_get(const ccm_config* cfg, const char* key, char* buf, size_t cap, size_t* needed) {
  return guarded([&] {
    require(cfg && key, "null argument");
    copy_out(cfg->cfg.get(key), buf, cap, needed);
  });
}

CCM_API ccm_status ccm_config_text(const ccm_config* cfg, char* buf, size_t cap, size_t* needed) {
  return guarded([&] {
    require(cfg != nullptr, "null argument");
    copy_out(cfg->cfg.to_text(), buf, cap, needed);
  });
}

CCM_API ccm_status ccm_config_validate(const ccm_config* cfg) {
  return guarded([&] {
    require(cfg != nullptr, "null argument");
    cfg->cfg.validate();
  });
}

CCM_API ccm_status ccm_config_hash(const ccm_config* cfg, uint64_t* out) {
  return guarded([&] {
    require(cfg && out, "null argument");
    *out = cfg->cfg.hash();
  });
}

CCM_API size_t ccm_config_key_count(void) { return ccm::RunConfig::keys().size(); }

CCM_API ccm_status ccm_config_key_info(size_t index, const char** name, const char** default_value,
                                       const char** doc) {
  return guarded([&] {
    const auto& keys = ccm::RunConfig::keys();
    if (index >= keys.size()) throw std::out_of_range("config key index out of range");
    // The key table holds string literals, so the views are NUL-terminated.
    if (name) *name = keys[index].name.data();
    if (default_value) *default_value = keys[index].default_value.data();
    if (doc) *doc = keys[index].doc.data();
  });
}

CCM_API ccm_status ccm_synth_data(const ccm_config* cfg, ccm_message_fn message, void* user, size_t* written) {
  return guarded([&] {
    require(cfg != nullptr, "null argument");
    const auto n = ccm::cmd_synth(cfg->cfg, message_fn(message, user));
    if (written) *written = n;
  });
}

CCM_API ccm_status ccm_train(const ccm_config* cfg, const char* resume_path, int force, ccm_train_fn on_record,
                             ccm_message_fn message, void* user, char* buf, size_t cap, size_t* needed) {
  return guarded([&] {
    require(cfg != nullptr, "null argument");
    ccm::TrainOptions opts;
    if (resume_path) opts.resume = resume_path;
    opts.force = force != 0;
    opts.message = message_fn(message, user);
    if (on_record) {
      opts.on_record = [on_record, user](const ccm::TrainRecord& r) {
        const ccm_train_record rec{r.iteration, r.steps, r.mean_loss, r.wall_seconds};
        on_record(&rec, user);
      };
    }
    const auto path = ccm::cmd_train(cfg->cfg, opts);
    copy_out(path.string(), buf, cap, needed);
  });
}

CCM_API ccm_status ccm_sample_files(const char* checkpoint, const char* const* inputs, size_t n_inputs,
                                    uint64_t seed, const char* out_dir, int clamp, size_t* written) {
  return guarded([&] {
    require(checkpoint && out_dir && (inputs || n_inputs == 0), "null argument");
    std::vector<std::filesystem::path> in;
    for (size_t i = 0; i < n_inputs; ++i) {
      require(inputs[i] != nullptr, "null input path");
      in.emplace_back(inputs[i]);
    }
    const auto out = ccm::cmd_sample(checkpoint, in, seed, out_dir, clamp != 0);
    if (written) *written = out.size();
  });
}

CCM_API ccm_status ccm_eval(const ccm_config* cfg, const char* checkpoint, ccm_report** out) {
  return guarded([&] {
    require(cfg && out, "null argument");
    *out = new ccm_report{ccm::cmd_eval(cfg->cfg, checkpoint ? checkpoint : "")};
  });
}

CCM_API void ccm_report_free(ccm_report* report) { delete report; }

CCM_API ccm_status ccm_report_summary(const ccm_report* report, double* mean_psnr, double* mean_ssim,
                                      size_t* count) {
  return guarded([&] {
    require(report != nullptr, "null argument");
    if (mean_psnr) *mean_psnr = report->report.mean_psnr;
    if (mean_ssim) *mean_ssim = report->report.mean_ssim;
    if (count) *count = report->report.count;
  });
}

CCM_API ccm_status ccm_report_text(const ccm_report* report, char* buf, size_t cap, size_t* needed) {
  return guarded([&] {
    require(report != nullptr, "null argument");
    copy_out(report->report.to_text(), buf, cap, needed);
  });
}

CCM_API ccm_status ccm_report_csv(const ccm_report* report, char* buf, size_t cap, size_t* needed) {
  return guarded([&] {
    require(report != nullptr, "null argument");
    copy_out(report->report.to_csv(), buf, cap, needed);
  });
}

CCM_API ccm_status ccm_model_load(const char* checkpoint, ccm_model** out) {
  return guarded([&] {
    require(checkpoint && out, "null argument");
    *out = new ccm_model{ccm::LoadedModel::load(checkpoint)};
  });
}

CCM_API void ccm_model_free(ccm_model* model) { delete model; }

CCM_API ccm_status ccm_model_is_identity(const ccm_model* model, int* out) {
  return guarded([&] {
    require(model && out, "null argument");
    *out = model->model.identity() ? 1 : 0;
  });
}

CCM_API ccm_status ccm_model_channels(const ccm_model* model, size_t* out) {
  return guarded([&] {
    require(model && out, "null argument");
    *out = model->model.config().channels();
  });
}

CCM_API ccm_status ccm_model_sample(const ccm_model* model, const float* v, size_t c, size_t h, size_t w,
                                    uint64_t seed, int clamp, float* out) {
  return guarded([&] {
    require(model && out, "null argument");
    const auto img = image_from(v, c, h, w);
    model->model.check_input(img, "condition");
    const auto result = model->model.predict(img, seed, clamp != 0);
    std::memcpy(out, result.data.data(), result.size() * sizeof(float));
  });
}

CCM_API ccm_status ccm_model_consistency(const ccm_model* model, const float* r_t, const float* v, size_t c,
                                         size_t h, size_t w, double t, int use_teacher, float* out) {
  return guarded([&] {
    require(model && out, "null argument");
    if (model->model.identity()) throw std::invalid_argument("identity stub has no consistency function");
    const auto r = image_from(r_t, c, h, w);
    const auto cond = image_from(v, c, h, w);
    model->model.check_input(cond, "condition");
    ccm::NoGradGuard<float> no_grad;
    const auto g = model->model.model().g(r.to_tensor(), cond.to_tensor(), t, use_teacher != 0);
    std::memcpy(out, g.values().data(), g.numel() * sizeof(float));
  });
}

CCM_API ccm_status ccm_discretize(double sigma_min, double sigma_max, double rho, size_t levels, double* out) {
  return guarded([&] {
    require(out != nullptr, "null argument");
    ccm::NoiseSchedule s;
    s.sigma_min = sigma_min;
    s.sigma_max = sigma_max;
    s.rho = rho;
    const auto t = ccm::discretize(s, levels);
    std::copy(t.begin(), t.end(), out);
  });
}

CCM_API ccm_status ccm_steps_at(uint64_t s0, uint64_t s1, uint64_t total_iterations, uint64_t k, uint64_t* out) {
  return guarded([&] {
    require(out != nullptr, "null argument");
    *out = ccm::steps_at({s0, s1, total_iterations}, k);
  });
}

CCM_API ccm_status ccm_scalings(double sigma_min, double sigma_max, double sigma_data, double t, double* skip,
                                double* out_scale) {
  return guarded([&] {
    ccm::NoiseSchedule s;
    s.sigma_min = sigma_min;
    s.sigma_max = sigma_max;
    s.sigma_data = sigma_data;
    s.validate();
    const auto sc = ccm::scalings(s, t);
    if (skip) *skip = sc.skip;
    if (out_scale) *out_scale = sc.out;
  });
}

CCM_API ccm_status ccm_psnr(const float* a, const float* b, size_t c, size_t h, size_t w, double max_val,
                            double* out) {
  return guarded([&] {
    require(out != nullptr, "null argument");
    *out = ccm::psnr(image_from(a, c, h, w), image_from(b, c, h, w), max_val);
  });
}

CCM_API ccm_status ccm_ssim(const float* a, const float* b, size_t c, size_t h, size_t w, double data_range,
                            int per_channel, double* out) {
  return guarded([&] {
    require(out != nullptr, "null argument");
    ccm::SsimOptions opts;
    opts.data_range = data_range;
    opts.mode = per_channel ? ccm::SsimOptions::Mode::per_channel : ccm::SsimOptions::Mode::luma;
    *out = ccm::ssim(image_from(a, c, h, w), image_from(b, c, h, w), opts);
  });
}

}  // extern "C"
