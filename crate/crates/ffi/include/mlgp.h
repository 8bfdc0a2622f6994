#ifndef MLGP_H
#define MLGP_H

/* Generated with cbindgen:0.29.4 */

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Values per sample row: `t, ax, ay, az, gx, gy, gz`.
 */
#define MLGP_SAMPLE_STRIDE 7

#define MLGP_FEATURE_COUNT 132

typedef enum MlgpStatus {
  MLGP_STATUS_OK = 0,
  MLGP_STATUS_NULL_POINTER = 1,
  MLGP_STATUS_INVALID_ARGUMENT = 2,
  MLGP_STATUS_IO = 3,
  MLGP_STATUS_DATA = 4,
  MLGP_STATUS_CONFIG = 5,
  MLGP_STATUS_LAYOUT_MISMATCH = 6,
  MLGP_STATUS_NUMERICAL = 7,
  MLGP_STATUS_BUFFER_TOO_SMALL = 8,
  MLGP_STATUS_PANIC = 9,
} MlgpStatus;

typedef enum MlgpClass {
  MLGP_CLASS_BALANCED = 0,
  MLGP_CLASS_TREMOR = 1,
  MLGP_CLASS_BRADYKINESIA = 2,
  MLGP_CLASS_DYSKINESIA = 3,
} MlgpClass;

/**
 * Trained three-layer model.
 */
typedef struct MlgpModel MlgpModel;

/**
 * Decision for one window. `y_bk` and `y_dk` are NaN when the tremor gate fired.
 */
typedef struct MlgpPrediction {
  enum MlgpClass pd_class;
  uint8_t severity;
  double y_tm;
  double y_bk;
  double y_dk;
} MlgpPrediction;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or NULL. Valid until the
 * next call into the library on the same thread.
 */
const char *mlgp_last_error_message(void);

/**
 * Library version, static string.
 */
const char *mlgp_version(void);

/**
 * Feature layout identifier, static string.
 */
const char *mlgp_layout_version(void);

/**
 * Loads a model bundle directory.
 *
 * # Safety
 * `dir` must be a NUL-terminated string and `out` a valid pointer.
 */
enum MlgpStatus mlgp_model_load(const char *dir, struct MlgpModel **out);

/**
 * # Safety
 * `model` must come from [`mlgp_model_load`] and not be freed already. NULL is ignored.
 */
void mlgp_model_free(struct MlgpModel *model);

/**
 * Feature vector of minute `window_index` (samples with
 * `floor(t / 60) == window_index`). Samples of the two minutes on either
 * side, when present, feed the five-minute rest features.
 *
 * `samples` holds `n_samples` rows of [`MLGP_SAMPLE_STRIDE`] values:
 * time in seconds, acceleration in G, angular rate in deg/s.
 *
 * # Safety
 * `samples` must point to `n_samples * MLGP_SAMPLE_STRIDE` doubles and
 * `out` to `out_len` writable doubles.
 */
enum MlgpStatus mlgp_featurize_window(const double *samples,
                                      size_t n_samples,
                                      double rate_hz,
                                      uint32_t window_index,
                                      double *out,
                                      size_t out_len);

/**
 * Class and severity of one full feature vector.
 *
 * # Safety
 * `model` must be a live handle, `features` must point to `n_features`
 * doubles and `out` must be valid for writes.
 */
enum MlgpStatus mlgp_predict(const struct MlgpModel *model,
                             const double *features,
                             size_t n_features,
                             struct MlgpPrediction *out);

/**
 * Featurizes minute `window_index` and predicts it in one call.
 *
 * # Safety
 * As for [`mlgp_featurize_window`] and [`mlgp_predict`].
 */
enum MlgpStatus mlgp_predict_window(const struct MlgpModel *model,
                                    const double *samples,
                                    size_t n_samples,
                                    double rate_hz,
                                    uint32_t window_index,
                                    struct MlgpPrediction *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MLGP_H */
