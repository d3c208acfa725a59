/* Copyright 2026 The CCM Authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * C interface to the conditional consistency model toolkit.
 *
 * Every function returning ccm_status reports failures through the code and
 * a thread-local message available from ccm_last_error(). Handles are opaque
 * and owned by the caller; release them with the matching *_free function.
 * Images are planar float arrays (C, H, W) with values in [-1, 1].
 *
 * Functions that produce strings follow one pattern: pass a buffer of
 * capacity cap; *needed receives the full length including the terminator,
 * and the call fails with CCM_ERR_INVALID_ARGUMENT if cap is too small
 * (buf may be NULL when cap is 0 to query the length).
 */

#ifndef CCM_CCM_H_
#define CCM_CCM_H_

#include <stddef.h>
#include <stdint.h>

#if defined(CCM_BUILDING_LIBRARY)
#define CCM_API __attribute__((visibility("default")))
#else
#define CCM_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ccm_status {
  CCM_OK = 0,
  CCM_ERR_INVALID_ARGUMENT = 1,
  CCM_ERR_CONFIG = 2,
  CCM_ERR_IO = 3,
  CCM_ERR_FORMAT = 4, /* corrupt or incompatible checkpoint */
  CCM_ERR_SHAPE = 5,
  CCM_ERR_NUMERIC = 6, /* non-finite training loss */
  CCM_ERR_MISMATCH = 7, /* checkpoint/config hash mismatch on resume */
  CCM_ERR_INTERNAL = 8
} ccm_status;

CCM_API const char* ccm_status_name(ccm_status status);
CCM_API const char* ccm_last_error(void);
CCM_API const char* ccm_version(void);

/* Worker threads for batch-parallel sections; 0 selects the hardware count.
 * Results do not depend on the thread count. */
CCM_API void ccm_set_threads(size_t n);
CCM_API size_t ccm_threads(void);

/* ---- Run configuration ---- */

typedef struct ccm_config ccm_config;

CCM_API ccm_status ccm_config_new(ccm_config** out);
CCM_API ccm_status ccm_config_load(const char* path, ccm_config** out);
CCM_API ccm_status ccm_config_parse(const char* text, ccm_config** out);
CCM_API void ccm_config_free(ccm_config* cfg);
CCM_API ccm_status ccm_config_set(ccm_config* cfg, const char* key, const char* value);
/* "key=value" */
CCM_API ccm_status ccm_config_set_assignment(ccm_config* cfg, const char* assignment);
CCM_API ccm_status ccm_config_get(const ccm_config* cfg, const char* key, char* buf, size_t cap, size_t* needed);
CCM_API ccm_status ccm_config_text(const ccm_config* cfg, char* buf, size_t cap, size_t* needed);
CCM_API ccm_status ccm_config_validate(const ccm_config* cfg);
CCM_API ccm_status ccm_config_hash(const ccm_config* cfg, uint64_t* out);

/* Enumerates the documented keys; index runs from 0 to ccm_config_key_count() - 1. */
CCM_API size_t ccm_config_key_count(void);
CCM_API ccm_status ccm_config_key_info(size_t index, const char** name, const char** default_value,
                                       const char** doc);

/* ---- Commands ---- */

typedef void (*ccm_message_fn)(const char* line, void* user);

typedef struct ccm_train_record {
  uint64_t iteration;
  uint64_t steps;
  double mean_loss;
  double wall_seconds;
} ccm_train_record;

typedef void (*ccm_train_fn)(const ccm_train_record* record, void* user);

CCM_API ccm_status ccm_synth_data(const ccm_config* cfg, ccm_message_fn message, void* user, size_t* written);

/* resume_path may be NULL. On success the final checkpoint path is copied
 * into buf (pattern above; buf may be NULL with cap 0). */
CCM_API ccm_status ccm_train(const ccm_config* cfg, const char* resume_path, int force, ccm_train_fn on_record,
                             ccm_message_fn message, void* user, char* buf, size_t cap, size_t* needed);

/* inputs are image files or directories; outputs are <stem>_gen.png. */
CCM_API ccm_status ccm_sample_files(const char* checkpoint, const char* const* inputs, size_t n_inputs,
                                    uint64_t seed, const char* out_dir, int clamp, size_t* written);

typedef struct ccm_report ccm_report;

/* checkpoint NULL evaluates the identity baseline (prediction = condition). */
CCM_API ccm_status ccm_eval(const ccm_config* cfg, const char* checkpoint, ccm_report** out);
CCM_API void ccm_report_free(ccm_report* report);
CCM_API ccm_status ccm_report_summary(const ccm_report* report, double* mean_psnr, double* mean_ssim,
                                      size_t* count);
CCM_API ccm_status ccm_report_text(const ccm_report* report, char* buf, size_t cap, size_t* needed);
CCM_API ccm_status ccm_report_csv(const ccm_report* report, char* buf, size_t cap, size_t* needed);

/* ---- Models ---- */

typedef struct ccm_model ccm_model;

CCM_API ccm_status ccm_model_load(const char* checkpoint, ccm_model** out);
CCM_API void ccm_model_free(ccm_model* model);
CCM_API ccm_status ccm_model_is_identity(const ccm_model* model, int* out);
CCM_API ccm_status ccm_model_channels(const ccm_model* model, size_t* out);
/* Single-step sample of one condition; out holds c*h*w floats. */
CCM_API ccm_status ccm_model_sample(const ccm_model* model, const float* v, size_t c, size_t h, size_t w,
                                    uint64_t seed, int clamp, float* out);
/* g(r_t, v, t) with the student (use_teacher = 0) or teacher parameters. */
CCM_API ccm_status ccm_model_consistency(const ccm_model* model, const float* r_t, const float* v, size_t c,
                                         size_t h, size_t w, double t, int use_teacher, float* out);

/* ---- Building blocks ---- */

CCM_API ccm_status ccm_discretize(double sigma_min, double sigma_max, double rho, size_t levels, double* out);
CCM_API ccm_status ccm_steps_at(uint64_t s0, uint64_t s1, uint64_t total_iterations, uint64_t k, uint64_t* out);
CCM_API ccm_status ccm_scalings(double sigma_min, double sigma_max, double sigma_data, double t, double* skip,
                                double* out_scale);
CCM_API ccm_status ccm_psnr(const float* a, const float* b, size_t c, size_t h, size_t w, double max_val,
                            double* out);
/* per_channel = 0 selects luma (BT.601) for three-channel images. */
CCM_API ccm_status ccm_ssim(const float* a, const float* b, size_t c, size_t h, size_t w, double data_range,
                            int per_channel, double* out);

#ifdef __cplusplus
}
#endif

#endif /* CCM_CCM_H_ */
