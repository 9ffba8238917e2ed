#ifndef DIFFCAST_H
#define DIFFCAST_H

/* Generated from the Rust sources by the build script; do not edit. */

#include <stddef.h>
#include <stdint.h>

/*
 Status of a call. Nonzero values mirror the CLI exit codes where one
 exists; the remaining values are argument and runtime faults specific to
 the C boundary.
 */
typedef enum DcStatus {
  /*
   Success.
   */
  DC_STATUS_OK = 0,
  /*
   Invalid configuration, arguments or hyperparameters.
   */
  DC_STATUS_CONFIG = 1,
  /*
   Unreadable, malformed or insufficient data.
   */
  DC_STATUS_DATA = 2,
  /*
   Non-finite values where finite ones are required.
   */
  DC_STATUS_NUMERIC = 3,
  /*
   A required pointer argument was null.
   */
  DC_STATUS_NULL_ARG = 4,
  /*
   A string argument was not valid UTF-8.
   */
  DC_STATUS_UTF8 = 5,
  /*
   The call panicked; treat the handle as poisoned.
   */
  DC_STATUS_PANIC = 6,
} DcStatus;

/*
 Opaque handle over a trained model bundle.
 */
typedef struct DcModel DcModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Library version as a static NUL-terminated string; never freed.
 */
const char *dc_version(void);

/*
 Message of the last failing call on this thread, empty until one fails.
 The pointer stays valid until the next failing call on the same thread.
 */
const char *dc_last_error(void);

/*
 Frees a string returned through an out-parameter. Null is a no-op.

 # Safety
 `ptr` must come from this library and not have been freed already.
 */
void dc_string_free(char *ptr);

/*
 Writes a synthetic benchmark series as CSV. `kind` is one of `ar1`,
 `sinusoid_noise`, `random_walk` or `heteroscedastic`; `params` is an
 optional comma-separated `key=value` list (null for defaults).

 # Safety
 All pointer arguments must be null or NUL-terminated strings.
 */
enum DcStatus dc_synth_csv(const char *kind,
                           size_t rows,
                           size_t variates,
                           uint64_t seed,
                           const char *params,
                           const char *out_path);

/*
 Trains a model and writes the bundle to `bundle_out`. `config_text` holds
 the same `key = value` lines as a CLI config file (null for defaults);
 `data_path`, when non-null, overrides the configured `data.path`.

 # Safety
 All pointer arguments must be null or NUL-terminated strings.
 */
enum DcStatus dc_train(const char *config_text, const char *data_path, const char *bundle_out);

/*
 Loads a trained bundle from disk into a fresh handle.

 # Safety
 `path` must be a NUL-terminated string; `out` must point at writable
 storage for one pointer.
 */
enum DcStatus dc_model_open(const char *path, struct DcModel **out);

/*
 Releases a model handle. Null is a no-op.

 # Safety
 `model` must come from `dc_model_open` and not have been closed already.
 */
void dc_model_close(struct DcModel *model);

/*
 Writes the bundle behind `model` to `path`.

 # Safety
 `model` must be a live handle; `path` must be a NUL-terminated string.
 */
enum DcStatus dc_model_save(const struct DcModel *model, const char *path);

/*
 Number of past steps the model conditions on.

 # Safety
 `model` must be a live handle; `out` must be writable.
 */
enum DcStatus dc_model_history(const struct DcModel *model, size_t *out);

/*
 Number of future steps each forecast covers.

 # Safety
 `model` must be a live handle; `out` must be writable.
 */
enum DcStatus dc_model_horizon(const struct DcModel *model, size_t *out);

/*
 Number of series the model was trained on.

 # Safety
 `model` must be a live handle; `out` must be writable.
 */
enum DcStatus dc_model_variates(const struct DcModel *model, size_t *out);

/*
 Whether coverage multipliers have been fitted (1) or not (0).

 # Safety
 `model` must be a live handle; `out` must be writable.
 */
enum DcStatus dc_model_is_calibrated(const struct DcModel *model, int *out);

/*
 Fits coverage multipliers on the validation split of the CSV at
 `data_path` and stores them in the handle. Persist with
 `dc_model_save`.

 # Safety
 `model` must be a live handle with no other outstanding borrow;
 `data_path` must be a NUL-terminated string.
 */
enum DcStatus dc_calibrate(struct DcModel *model, const char *data_path);

/*
 Scores the model on the test split of the CSV at `data_path` and returns
 the report as JSON through `out_json` (free with `dc_string_free`).
 `arms` is a comma-separated arm list, or null/`all` for every arm the
 bundle supports; nonzero `trajectory` adds per-jump ensemble scores.

 # Safety
 `model` must be a live handle; string arguments must be null or
 NUL-terminated; `out_json` must point at writable storage for one pointer.
 */
enum DcStatus dc_evaluate_json(const struct DcModel *model,
                               const char *data_path,
                               const char *arms,
                               int trajectory,
                               char **out_json);

/*
 Writes forecast ensembles for the test split of the CSV at `data_path`:
 one CSV of ensemble members and one of per-cell summary statistics.

 # Safety
 `model` must be a live handle; all strings must be NUL-terminated.
 */
enum DcStatus dc_forecast_csv(const struct DcModel *model,
                              const char *data_path,
                              const char *members_out,
                              const char *summary_out);

/*
 Continuous ranked probability score of an ensemble against one observed
 value. All inputs must be finite and `len` must be positive.

 # Safety
 `samples` must point at `len` readable doubles; `out` must be writable.
 */
enum DcStatus dc_crps_empirical(const double *samples, size_t len, double observed, double *out);

/*
 Closed-form continuous ranked probability score of a normal forecast
 with the given mean and spread against one observed value.

 # Safety
 `out` must be writable.
 */
enum DcStatus dc_crps_gaussian(double mean, double spread, double observed, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DIFFCAST_H */
