#ifndef DCEVAE_FFI_H
#define DCEVAE_FFI_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum DcevaeStatus {
  DCEVAE_STATUS_OK = 0,
  DCEVAE_STATUS_NULL_POINTER = 1,
  DCEVAE_STATUS_INVALID_ARGUMENT = 2,
  DCEVAE_STATUS_IO = 3,
  DCEVAE_STATUS_PARSE = 4,
  DCEVAE_STATUS_SHAPE = 5,
  DCEVAE_STATUS_NUMERICAL = 6,
  DCEVAE_STATUS_BUFFER_TOO_SMALL = 7,
  DCEVAE_STATUS_PANIC = 8,
} DcevaeStatus;

/**
 * A prepared split (`<stem>.csv` plus its sidecar).
 */
typedef struct DcevaeDataset DcevaeDataset;

/**
 * A trained model together with its configuration and attribute partition.
 */
typedef struct DcevaeModel DcevaeModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` as a
 * NUL-terminated string, truncating to `len` bytes. Returns the length
 * needed including the terminator (1 when there is no error).
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t dcevae_last_error_message(char *buf, size_t len);

/**
 * Loads a checkpoint written by `dcevae train`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable pointer.
 * On success `*out` owns a handle to be released with
 * [`dcevae_model_free`].
 */
enum DcevaeStatus dcevae_model_load(const char *path, struct DcevaeModel **out);

/**
 * # Safety
 * `model` must be null or a handle from [`dcevae_model_load`] that has
 * not been freed.
 */
void dcevae_model_free(struct DcevaeModel *model);

/**
 * Latent dimension of the model, 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t dcevae_model_latent_dim(const struct DcevaeModel *model);

/**
 * Loads `<dir>/<stem>.csv` and its sidecar as written by `dcevae prepare`.
 *
 * # Safety
 * `dir` and `stem` must be NUL-terminated strings and `out` a writable
 * pointer. On success `*out` owns a handle to be released with
 * [`dcevae_dataset_free`].
 */
enum DcevaeStatus dcevae_dataset_load(const char *dir,
                                      const char *stem,
                                      struct DcevaeDataset **out);

/**
 * # Safety
 * `data` must be null or a handle from [`dcevae_dataset_load`] that has
 * not been freed.
 */
void dcevae_dataset_free(struct DcevaeDataset *data);

/**
 * Number of records, 0 for a null handle.
 *
 * # Safety
 * `data` must be null or a live handle.
 */
size_t dcevae_dataset_len(const struct DcevaeDataset *data);

/**
 * Writes `p(y = 1 | a, u)` and `p(y = 1 | ¬a, u)` for every record, with
 * `u` at the posterior mean. Both buffers need `dcevae_dataset_len`
 * entries; `len` is their capacity.
 *
 * # Safety
 * Handles must be live; `y_prob` and `y_prob_cf` must point to `len`
 * writable doubles.
 */
enum DcevaeStatus dcevae_counterfactual_predict(const struct DcevaeModel *model,
                                                const struct DcevaeDataset *data,
                                                double *y_prob,
                                                double *y_prob_cf,
                                                size_t len);

/**
 * Mean over records of `p(y | do(a = 1), u) − p(y | do(a = 0), u)`.
 *
 * # Safety
 * Handles must be live and `out` writable.
 */
enum DcevaeStatus dcevae_total_effect(const struct DcevaeModel *model,
                                      const struct DcevaeDataset *data,
                                      double *out);

/**
 * Mean `|p(y | a, u) − p(y | ¬a, u)|` over records.
 *
 * # Safety
 * Handles must be live and `out` writable.
 */
enum DcevaeStatus dcevae_fairness_gap(const struct DcevaeModel *model,
                                      const struct DcevaeDataset *data,
                                      double *out);

/**
 * Closed-form optimal latent covariance of a linear model given as JSON
 * (the `spec.json` format of `dcevae theory`). Writes the row-major
 * `d × d` matrix, latent order `[u_r, u_d]`, into `out` and `d` into
 * `dim`. `len` is the capacity of `out`; on `BUFFER_TOO_SMALL` `*dim` is
 * still set.
 *
 * # Safety
 * `spec_json` must be a NUL-terminated string, `out` must point to `len`
 * writable doubles and `dim` must be writable.
 */
enum DcevaeStatus dcevae_sigma_star(const char *spec_json, double *out, size_t len, size_t *dim);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DCEVAE_FFI_H */
