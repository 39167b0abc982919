/*
 * egopnr - state-change classification and PNR localization harness.
 *
 * C interface over the core library: opaque handles, status codes, and a
 * thread-local last-error message. All functions returning egopnr_status
 * set *out parameters only on EGOPNR_OK.
 */
#ifndef EGOPNR_H
#define EGOPNR_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define EGOPNR_API __declspec(dllexport)
#else
#define EGOPNR_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum egopnr_status {
  EGOPNR_OK = 0,
  EGOPNR_ERR_INVALID_ARGUMENT = 1,
  EGOPNR_ERR_PARSE = 2,
  EGOPNR_ERR_VALIDATION = 3,
  EGOPNR_ERR_IO = 4,
  EGOPNR_ERR_FORMAT = 5,
  EGOPNR_ERR_NUMERIC = 6,
  EGOPNR_ERR_CONTRACT = 7,
  EGOPNR_ERR_INTERNAL = 8
} egopnr_status;

EGOPNR_API const char* egopnr_status_name(egopnr_status status);

/* Message for the most recent failure on this thread; empty on success. */
EGOPNR_API const char* egopnr_last_error(void);

typedef struct egopnr_manifest egopnr_manifest;
typedef struct egopnr_features egopnr_features;
typedef struct egopnr_model egopnr_model;

/* ---- clip manifests (JSON) ---- */

EGOPNR_API egopnr_status egopnr_manifest_parse(const char* json_text, egopnr_manifest** out);
EGOPNR_API egopnr_status egopnr_manifest_load(const char* path, egopnr_manifest** out);
EGOPNR_API egopnr_status egopnr_manifest_save(const egopnr_manifest* manifest, const char* path);
EGOPNR_API int64_t egopnr_manifest_clip_count(const egopnr_manifest* manifest);
EGOPNR_API void egopnr_manifest_free(egopnr_manifest* manifest);

/* ---- per-frame feature files (EGF1 binary) ---- */

EGOPNR_API egopnr_status egopnr_features_load(const char* path, egopnr_features** out);
EGOPNR_API egopnr_status egopnr_features_save(const egopnr_features* features, const char* path);
EGOPNR_API void egopnr_features_free(egopnr_features* features);

/* ---- synthetic data ---- */

#define EGOPNR_PRIOR_UNIFORM 0
#define EGOPNR_PRIOR_BETA 1

#define EGOPNR_SPLIT_TRAIN 0
#define EGOPNR_SPLIT_VAL 1
#define EGOPNR_SPLIT_TEST 2

typedef struct egopnr_synth_config {
  int64_t clip_count;
  double p_pos;          /* state-change fraction in [0, 1] */
  int prior;             /* EGOPNR_PRIOR_* */
  double prior_fraction; /* peak of the beta prior, fraction of duration */
  double snr;            /* bump amplitude over unit-variance noise */
  int32_t feature_dim;
  int32_t views_per_clip;
  int32_t num_frames;
  double fps;
  int32_t bump_half_width;
  int split; /* EGOPNR_SPLIT_* */
} egopnr_synth_config;

/* Fills in the defaults (240 frames at 30 fps, 3 views, dim 16, ...). */
EGOPNR_API void egopnr_synth_config_init(egopnr_synth_config* cfg);

EGOPNR_API egopnr_status egopnr_generate_manifest(const egopnr_synth_config* cfg, uint64_t seed,
                                                  egopnr_manifest** out);
EGOPNR_API egopnr_status egopnr_generate_synthetic(const egopnr_synth_config* cfg, uint64_t seed,
                                                   egopnr_manifest** out_manifest,
                                                   egopnr_features** out_features);

/* ---- frame-sampling shift analysis ---- */

#define EGOPNR_SAMPLER_EVEN 0
#define EGOPNR_SAMPLER_STRATIFIED 1
#define EGOPNR_SAMPLER_RANDOM 2

typedef struct egopnr_shift_stats {
  double mean_s;
  double std_s;
  double max_s;
  uint64_t trials;
} egopnr_shift_stats;

/* Analytic bound E[S] / (n * fps * 2) with E[S] = (s_min + s_max) / 2. */
EGOPNR_API egopnr_status egopnr_half_gap_expected_shift(int32_t n, double fps, int32_t s_min,
                                                        int32_t s_max, double* out_seconds);

/* fixed_length_frames <= 0 draws a fresh trimmed length every trial. */
EGOPNR_API egopnr_status egopnr_monte_carlo_shift(int sampler, int32_t n, double fps,
                                                  uint64_t trials, uint64_t seed,
                                                  int32_t fixed_length_frames,
                                                  egopnr_shift_stats* out);

/* ---- training ---- */

/*
 * config_json uses the documented training-config schema. When out_dir is
 * non-NULL, history.jsonl and best.ckpt are written there. out_best receives
 * the best-on-validation model.
 */
EGOPNR_API egopnr_status egopnr_train_run(const char* config_json,
                                          const egopnr_manifest* train_manifest,
                                          const egopnr_manifest* val_manifest,
                                          const egopnr_features* train_features,
                                          const egopnr_features* val_features,
                                          const char* out_dir, egopnr_model** out_best);

/* ---- model checkpoints (EGCK binary) ---- */

EGOPNR_API egopnr_status egopnr_model_load(const char* path, egopnr_model** out);
EGOPNR_API egopnr_status egopnr_model_save(const egopnr_model* model, const char* path);
EGOPNR_API void egopnr_model_free(egopnr_model* model);

/* ---- evaluation ---- */

/*
 * Deterministic full-clip evaluation with multi-view logit averaging.
 * views == 0 uses every stored view. out_report_json receives the metrics
 * report; out_per_clip_csv (optional, may be NULL) receives one CSV row per
 * clip. Returned strings are freed with egopnr_string_free.
 */
EGOPNR_API egopnr_status egopnr_evaluate(const egopnr_model* model,
                                         const egopnr_manifest* manifest,
                                         const egopnr_features* features, int32_t views,
                                         char** out_report_json, char** out_per_clip_csv);

#define EGOPNR_BASELINE_POSITIVE 0
#define EGOPNR_BASELINE_CENTER 1
#define EGOPNR_BASELINE_FIXED 2

/* fraction is used by EGOPNR_BASELINE_FIXED only. */
EGOPNR_API egopnr_status egopnr_baseline(const egopnr_manifest* manifest, int mode,
                                         double fraction, char** out_report_json);

EGOPNR_API void egopnr_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* EGOPNR_H */
