#ifndef MIMO_FP_H
#define MIMO_FP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status code returned by every fallible function.
typedef enum MfpStatus {
  MFP_STATUS_OK = 0,
  MFP_STATUS_NULL_POINTER = 1,
  MFP_STATUS_INVALID_ARGUMENT = 2,
  MFP_STATUS_DIMENSION = 3,
  MFP_STATUS_GEOMETRY = 4,
  MFP_STATUS_ILL_CONDITIONED = 5,
  MFP_STATUS_NUMERICAL = 6,
  MFP_STATUS_CONFIG = 7,
  MFP_STATUS_PARSE = 8,
  MFP_STATUS_EXPERIMENT = 9,
  MFP_STATUS_IO = 10,
  MFP_STATUS_UTF8 = 11,
  MFP_STATUS_PANIC = 12,
} MfpStatus;

// Fitted GP positioner.
typedef struct MfpModel MfpModel;

// Fingerprint set: L RSS vectors of length M with their positions.
typedef struct MfpTrainingSet MfpTrainingSet;

// Hyperparameter search settings. Obtain defaults from [`mfp_fit_options_default`].
typedef struct MfpFitOptions {
  uint32_t restarts;
  uint32_t max_evals;
  uint64_t seed;
  // Search on a random subset of this many fingerprints; 0 uses all.
  uint32_t search_points;
} MfpFitOptions;

// Posterior mean position and per-coordinate variances (m^2).
typedef struct MfpPrediction {
  double x1;
  double x2;
  double var_x1;
  double var_x2;
} MfpPrediction;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Description of the last failure on this thread; empty after a success.
// The pointer stays valid until the next `mfp_*` call on this thread.
const char *mfp_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *mfp_version(void);

// Builds a training set from `l` row-major RSS vectors of length `m` and
// `l` (x1, x2) pairs.
//
// # Safety
// `rss` must point to `l * m` doubles, `positions` to `2 * l` doubles and
// `out` to writable storage for one handle.
enum MfpStatus mfp_training_set_new(const double *rss,
                                    size_t l,
                                    size_t m,
                                    const double *positions,
                                    struct MfpTrainingSet **out);

// Loads a fingerprint CSV (`x1,x2,rss_0,...`).
//
// # Safety
// `path` must be a NUL-terminated string and `out` writable.
enum MfpStatus mfp_training_set_load_csv(const char *path, struct MfpTrainingSet **out);

// Number of fingerprints, or 0 for a null handle.
//
// # Safety
// `set` must be null or a live handle.
size_t mfp_training_set_len(const struct MfpTrainingSet *set);

// RSS vector length M, or 0 for a null handle.
//
// # Safety
// `set` must be null or a live handle.
size_t mfp_training_set_dim(const struct MfpTrainingSet *set);

// # Safety
// `set` must be null or a handle not yet freed.
void mfp_training_set_free(struct MfpTrainingSet *set);

struct MfpFitOptions mfp_fit_options_default(void);

// Fits one GP per coordinate. `options` may be null for defaults.
//
// # Safety
// `set` must be a live handle, `options` null or valid, `out` writable.
enum MfpStatus mfp_model_fit(const struct MfpTrainingSet *set,
                             const struct MfpFitOptions *options,
                             struct MfpModel **out);

// Loads a model file written by [`mfp_model_save`] or the CLI.
//
// # Safety
// `path` must be a NUL-terminated string and `out` writable.
enum MfpStatus mfp_model_load(const char *path, struct MfpModel **out);

// # Safety
// `model` must be a live handle and `path` a NUL-terminated string.
enum MfpStatus mfp_model_save(const struct MfpModel *model, const char *path);

// RSS vector length the model expects, or 0 for a null handle.
//
// # Safety
// `model` must be null or a live handle.
size_t mfp_model_dim(const struct MfpModel *model);

// Posterior position for one RSS vector of length `m`.
//
// # Safety
// `model` must be a live handle, `rss` must point to `m` doubles and `out`
// must be writable.
enum MfpStatus mfp_model_predict(const struct MfpModel *model,
                                 const double *rss,
                                 size_t m,
                                 struct MfpPrediction *out);

// # Safety
// `model` must be null or a handle not yet freed.
void mfp_model_free(struct MfpModel *model);

// Weighted kNN position estimate with `kappa` neighbours.
//
// # Safety
// `set` must be a live handle, `rss` must point to `m` doubles and
// `x1` / `x2` must be writable.
enum MfpStatus mfp_knn_locate(const struct MfpTrainingSet *set,
                              const double *rss,
                              size_t m,
                              size_t kappa,
                              double *x1,
                              double *x2);

// Mean path gain (dB) at distance `d` metres under the default
// three-slope urban model.
//
// # Safety
// `out` must be writable.
enum MfpStatus mfp_mean_path_gain_db(double d, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MIMO_FP_H */
