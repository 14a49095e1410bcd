#ifndef LOWASC_H
#define LOWASC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LascStatus {
  LASC_STATUS_OK = 0,
  LASC_STATUS_NULL_POINTER = 1,
  LASC_STATUS_INVALID_INPUT = 2,
  LASC_STATUS_INVALID_CONFIG = 3,
  LASC_STATUS_PARSE = 4,
  LASC_STATUS_IO = 5,
  LASC_STATUS_FORMAT = 6,
  LASC_STATUS_RETRYABLE = 7,
  LASC_STATUS_RUNTIME = 8,
  LASC_STATUS_BUFFER_TOO_SMALL = 9,
  LASC_STATUS_PANIC = 10,
} LascStatus;

/**
 * 0 mel, 1 gammatone, 2 constant-Q.
 */
typedef enum LascKind {
  LASC_KIND_MEL = 0,
  LASC_KIND_GAM = 1,
  LASC_KIND_CQT = 2,
} LascKind;

typedef struct LascExtractor LascExtractor;

typedef struct LascModel LascModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * Valid until the next call into this library on the same thread.
 */
const char *lasc_last_error(void);

/**
 * Static, NUL-terminated library version.
 */
const char *lasc_version(void);

/**
 * Front-end with default settings; `kind` is a [`LascKind`] value.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum LascStatus lasc_extractor_new(uint32_t kind, struct LascExtractor **out);

/**
 * # Safety
 * `ex` must come from [`lasc_extractor_new`] and not be used afterwards.
 */
void lasc_extractor_free(struct LascExtractor *ex);

/**
 * Feature tensor for mono audio, written as band-major
 * `(band, frame, channel)` floats. `len` holds the capacity of `out` on
 * entry and the required length on return; pass `out = NULL` to query.
 *
 * # Safety
 * `ex` must be a live handle, `audio` must hold `n` floats, `out` (if not
 * null) must hold `*len` floats, and `dims` must point to three `size_t`.
 */
enum LascStatus lasc_extract(const struct LascExtractor *ex,
                             const float *audio,
                             size_t n,
                             uint32_t sample_rate,
                             float *out,
                             size_t *len,
                             size_t *dims);

/**
 * Load a trained model file (float or int8).
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum LascStatus lasc_model_load(const char *path, struct LascModel **out);

/**
 * # Safety
 * `m` must come from [`lasc_model_load`] and not be used afterwards.
 */
void lasc_model_free(struct LascModel *m);

/**
 * Number of scene classes, 0 for a null handle.
 *
 * # Safety
 * `m` must be null or a live handle.
 */
size_t lasc_model_class_count(const struct LascModel *m);

/**
 * Class name owned by the handle, or null when out of range.
 *
 * # Safety
 * `m` must be null or a live handle.
 */
const char *lasc_model_class_name(const struct LascModel *m, size_t index);

/**
 * Scene probabilities for one recording, using the model's own front-end.
 *
 * # Safety
 * `audio` must hold `n` floats and `probs` must hold `cap` doubles.
 */
enum LascStatus lasc_model_predict(const struct LascModel *m,
                                   const float *audio,
                                   size_t n,
                                   uint32_t sample_rate,
                                   double *probs,
                                   size_t cap);

/**
 * PROD fusion for one clip: `probs` holds `models × classes` rows, each a
 * distribution. `out` receives `classes` unnormalized scores; `label`
 * receives the winning index.
 *
 * # Safety
 * Buffers must have the stated sizes.
 */
enum LascStatus lasc_prod_fuse(const double *probs,
                               size_t models,
                               size_t classes,
                               double *out,
                               size_t *label);

/**
 * Trainable parameters and storage bytes of a named variant
 * (`baseline`, `nri`, `rd128`, `rd64`, `rd32`, `kb120`).
 *
 * # Safety
 * `name` must be a NUL-terminated string; outputs must be writable.
 */
enum LascStatus lasc_variant_complexity(const char *name,
                                        size_t classes,
                                        bool quantized,
                                        uint64_t *params,
                                        uint64_t *bytes);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LOWASC_H */
