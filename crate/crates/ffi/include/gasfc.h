#ifndef GASFC_H
#define GASFC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GasfcStatus {
  GASFC_STATUS_OK = 0,
  GASFC_STATUS_NULL_POINTER = 1,
  GASFC_STATUS_INVALID_ARGUMENT = 2,
  GASFC_STATUS_RUNTIME = 3,
  GASFC_STATUS_PANIC = 4,
} GasfcStatus;

/*
 Fitted forecaster.
 */
typedef struct GasfcModel GasfcModel;

/*
 Proleptic Gregorian calendar date.
 */
typedef struct GasfcDate {
  int32_t year;
  uint32_t month;
  uint32_t day;
} GasfcDate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread; empty if none. The
 pointer stays valid until the next failing call on the same thread.
 */
const char *gasfc_last_error_message(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *gasfc_version(void);

/*
 Easter Sunday of `year` (1583..=4099).

 # Safety
 `out` must be a valid pointer to writable memory.
 */
enum GasfcStatus gasfc_easter(int32_t year, struct GasfcDate *out);

/*
 Similar day of `date` in the previous year.

 # Safety
 `out` must be a valid pointer to writable memory.
 */
enum GasfcStatus gasfc_similar_day(struct GasfcDate date, struct GasfcDate *out);

/*
 # Safety
 `out` must be a valid pointer to writable memory.
 */
enum GasfcStatus gasfc_is_holiday(struct GasfcDate date, bool *out);

/*
 Heating degree days `max(18 - t, 0)`.
 */
double gasfc_hdd(double temperature_c);

/*
 Heating and cooling degree days `|16 - t|`.
 */
double gasfc_hcdd(double temperature_c);

/*
 Mean absolute error of two length-`n` arrays.

 # Safety
 `y` and `yhat` must point to `n` doubles; `out` must be writable.
 */
enum GasfcStatus gasfc_mae(const double *y, const double *yhat, uintptr_t n, double *out);

/*
 Fits the model described by `spec_json` (for example
 `{"model":"ridge","lambda":1.0}`) on row-major `x` and `y`.
 `scaled` marks the columns to standardize; null standardizes all.

 # Safety
 `x` must point to `n * p` doubles, `y` to `n`, `scaled` (if not null)
 to `p` bools; `out` must be writable.
 */
enum GasfcStatus gasfc_model_fit(const char *spec_json,
                                 const double *x,
                                 uintptr_t n,
                                 uintptr_t p,
                                 const double *y,
                                 const bool *scaled,
                                 struct GasfcModel **out);

/*
 Forecasts for `n` rows of `x` into `out` (length `n`).

 # Safety
 `model` must come from this library; `x` must point to `n * p`
 doubles and `out` to `n` writable doubles.
 */
enum GasfcStatus gasfc_model_predict(const struct GasfcModel *model,
                                     const double *x,
                                     uintptr_t n,
                                     uintptr_t p,
                                     double *out);

/*
 Number of input columns the model expects.

 # Safety
 `model` must come from this library; `out` must be writable.
 */
enum GasfcStatus gasfc_model_n_features(const struct GasfcModel *model, uintptr_t *out);

/*
 Serializes the model; free the string with [`gasfc_string_free`].

 # Safety
 `model` must come from this library; `out` must be writable.
 */
enum GasfcStatus gasfc_model_to_json(const struct GasfcModel *model, char **out);

/*
 Restores a model written by [`gasfc_model_to_json`].

 # Safety
 `json` must be NUL-terminated; `out` must be writable.
 */
enum GasfcStatus gasfc_model_from_json(const char *json, struct GasfcModel **out);

/*
 Releases a model; null is ignored.

 # Safety
 `model` must be null or come from this library, and not be used again.
 */
void gasfc_model_free(struct GasfcModel *model);

/*
 Releases a string returned by this library; null is ignored.

 # Safety
 `s` must be null or come from this library, and not be used again.
 */
void gasfc_string_free(char *s);

/*
 Runs a backtest from a JSON config file, writing outputs to `out_dir`
 (null uses the config's `out_dir`) with `jobs` worker threads.

 # Safety
 `config_path` and `out_dir` (if not null) must be NUL-terminated.
 */
enum GasfcStatus gasfc_backtest_run(const char *config_path, const char *out_dir, uintptr_t jobs);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GASFC_H */
