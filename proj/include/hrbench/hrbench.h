/* SPDX-License-Identifier: Apache-2.0
 * Copyright 2026 The hrbench Authors
 *
 * C interface to the heart-rate benchmark engine. All functions return an
 * hrb_status; on failure hrb_last_error() holds a message for the calling
 * thread until its next call into the library.
 */

#ifndef HRBENCH_HRBENCH_H
#define HRBENCH_HRBENCH_H

#include <stddef.h>

#if defined(_WIN32)
#define HRB_API __declspec(dllexport)
#else
#define HRB_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes double as process exit codes for the CLI. */
typedef enum hrb_status {
  HRB_OK = 0,
  HRB_ERR_USAGE = 1,      /* bad argument or config */
  HRB_ERR_DATA = 2,       /* input data, threshold guard or split errors */
  HRB_ERR_DIVERGED = 3,   /* non-finite training loss */
  HRB_ERR_EVALUATION = 4, /* evaluation could not be completed */
  HRB_ERR_INTERNAL = 5
} hrb_status;

typedef struct hrb_session hrb_session;
typedef struct hrb_model hrb_model;

typedef void (*hrb_log_fn)(const char* line, void* user);

typedef struct hrb_prepare_summary {
  double theta;
  size_t records;
  size_t windows;
  size_t positive_windows;
  size_t positive_records;
} hrb_prepare_summary;

typedef struct hrb_prediction {
  double probability; /* calibrated when the run has a calibration.json */
  double mean_bpm;
  double sigma_bpm;
} hrb_prediction;

HRB_API const char* hrb_version(void);
HRB_API const char* hrb_last_error(void);

/* Sessions hold a parsed config. A NULL path starts from defaults with
 * paths relative to the working directory. */
HRB_API hrb_status hrb_session_open(const char* config_path, hrb_session** out);
HRB_API hrb_status hrb_session_set(hrb_session* s, const char* key, const char* value);
/* Progress lines go to the callback; pass NULL to silence them. */
HRB_API hrb_status hrb_session_set_logger(hrb_session* s, hrb_log_fn fn, void* user);
HRB_API void hrb_session_close(hrb_session* s);

HRB_API hrb_status hrb_synth(hrb_session* s);
HRB_API hrb_status hrb_prepare(hrb_session* s, hrb_prepare_summary* out);
HRB_API hrb_status hrb_train(hrb_session* s);
/* runs_dir may be NULL to use the configured data.runs_dir. */
HRB_API hrb_status hrb_evaluate(hrb_session* s, const char* runs_dir);
HRB_API hrb_status hrb_report(const char* runs_dir);

/* Loads a trained run from its directory for single-window inference. The
 * model keeps the standardization stats of the prepared data. */
HRB_API hrb_status hrb_model_load(hrb_session* s, const char* run_dir, hrb_model** out);
/* context: bpm values, oldest first; n must equal the configured window.T.
 * Fields that do not apply to the run's task are set to NaN. */
HRB_API hrb_status hrb_model_predict(hrb_model* m, const double* context, size_t n,
                                     hrb_prediction* out);
HRB_API void hrb_model_free(hrb_model* m);

/* Stateless helpers. */
HRB_API hrb_status hrb_crps_gaussian(double mu, double sigma, double y, double* out);
/* Writes up to capacity samples; *written receives the full series length. */
HRB_API hrb_status hrb_derive_hr(const double* peaks, size_t n_peaks, double* hr, size_t capacity,
                                 size_t* written);

#ifdef __cplusplus
}
#endif

#endif /* HRBENCH_HRBENCH_H */
