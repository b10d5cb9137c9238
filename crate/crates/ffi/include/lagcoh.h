#ifndef LAGCOH_H
#define LAGCOH_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LchEmit {
  LCH_EMIT_JSON = 0,
  LCH_EMIT_CSV = 1,
} LchEmit;

typedef enum LchFormat {
  LCH_FORMAT_CSV_LONG = 0,
  LCH_FORMAT_RAW_F64 = 1,
} LchFormat;

typedef enum LchStatus {
  LCH_STATUS_OK = 0,
  LCH_STATUS_NULL_POINTER = 1,
  LCH_STATUS_INVALID_ARGUMENT = 2,
  LCH_STATUS_CONFIG_ERROR = 3,
  LCH_STATUS_DATA_ERROR = 4,
  LCH_STATUS_NUMERICAL_ERROR = 5,
  LCH_STATUS_PANIC = 6,
} LchStatus;

// Output of [`lch_compute`].
typedef struct LchResult LchResult;

// Epoched recording, `[epoch][sample][channel]`.
typedef struct LchSeries LchSeries;

// Lagged measures for one frequency or band. Measures that were not
// requested are NaN; `statistic`, `p_value` and `df1` describe the first
// requested test and are NaN/0 when there is none.
typedef struct LchRow {
  double lag_a;
  double lag_c;
  double lag_b;
  double statistic;
  double p_value;
  size_t df1;
  size_t n_frequencies;
  bool degenerate;
} LchRow;

typedef struct LchMeasures {
  double lag_a;
  double lag_c;
  double lag_b;
} LchMeasures;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer
// stays valid until the next failing call on the same thread.
const char *lch_last_error_message(void);

// Read an epoch file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a writable pointer.
enum LchStatus lch_series_load(const char *path, enum LchFormat format, struct LchSeries **out);

// Copy `n_epochs·n_samples·n_channels` doubles in `[epoch][sample][channel]`
// order into a new series with channel labels `ch0, ch1, ...`.
//
// # Safety
// `data` must point to that many readable doubles; `out` must be writable.
enum LchStatus lch_series_from_buffer(const double *data,
                                      size_t n_epochs,
                                      size_t n_samples,
                                      size_t n_channels,
                                      struct LchSeries **out);

// # Safety
// `series` must be null or a handle from this library, not yet freed.
void lch_series_free(struct LchSeries *series);

// # Safety
// `series` must be a live handle; the output pointers must be writable.
enum LchStatus lch_series_shape(const struct LchSeries *series,
                                size_t *n_epochs,
                                size_t *n_samples,
                                size_t *n_channels);

// Run the analysis described by a JSON configuration document.
//
// # Safety
// `series` must be a live handle, `config_json` a NUL-terminated string and
// `out` writable.
enum LchStatus lch_compute(const struct LchSeries *series,
                           const char *config_json,
                           struct LchResult **out);

// # Safety
// `result` must be null or a handle from this library, not yet freed.
void lch_result_free(struct LchResult *result);

// Number of frequencies and bands in the result; 0 for a null handle.
//
// # Safety
// `result` must be null or a live handle.
size_t lch_result_len(const struct LchResult *result);

// Label of row `index` (`f<k>` or the band name), owned by the handle.
// Null if the handle is null or the index is out of range.
//
// # Safety
// `result` must be null or a live handle.
const char *lch_result_label(const struct LchResult *result, size_t index);

// # Safety
// `result` must be a live handle and `out` writable.
enum LchStatus lch_result_row(const struct LchResult *result, size_t index, struct LchRow *out);

// Serialize the result. The string must be released with
// [`lch_string_free`].
//
// # Safety
// `result` must be a live handle and `out` writable.
enum LchStatus lch_result_emit(const struct LchResult *result, enum LchEmit format, char **out);

// # Safety
// `s` must be null or a string returned by this library, not yet freed.
void lch_string_free(char *s);

// Lagged measures of one univariate pair from its auto- and cross-spectra.
//
// # Safety
// `out` must be writable.
enum LchStatus lch_bivariate(double sxx,
                             double syy,
                             double sxy_re,
                             double sxy_im,
                             struct LchMeasures *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LAGCOH_H */
