#ifndef BRAINEX_H
#define BRAINEX_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum BxStatus {
  BX_STATUS_OK = 0,
  BX_STATUS_INVALID_ARGUMENT = 1,
  BX_STATUS_DIM_MISMATCH = 2,
  BX_STATUS_EMPTY_MASK = 3,
  BX_STATUS_IO = 4,
  BX_STATUS_FORMAT = 5,
  BX_STATUS_UNSUPPORTED = 6,
  BX_STATUS_PREDICTOR = 7,
  BX_STATUS_PROTOCOL = 8,
  BX_STATUS_CONFIG = 9,
  BX_STATUS_NULL_POINTER = 10,
  BX_STATUS_PANIC = 11,
} BxStatus;

typedef enum BxVolumeKind {
  BX_VOLUME_KIND_INTENSITY = 0,
  BX_VOLUME_KIND_LABEL = 1,
  BX_VOLUME_KIND_PROBABILITY = 2,
  BX_VOLUME_KIND_MASK = 3,
} BxVolumeKind;

/**
 * On-disk voxel type for [`bx_volume_write`].
 */
typedef enum BxDataType {
  BX_DATA_TYPE_UINT8 = 2,
  BX_DATA_TYPE_INT16 = 4,
  BX_DATA_TYPE_FLOAT32 = 16,
} BxDataType;

typedef enum BxExtractStatus {
  BX_EXTRACT_STATUS_OK = 0,
  BX_EXTRACT_STATUS_NO_BRAIN_FOUND = 1,
} BxExtractStatus;

/**
 * Opaque extraction result.
 */
typedef struct BxResult BxResult;

/**
 * Opaque volume handle.
 */
typedef struct BxVolume BxVolume;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, a static NUL-terminated string.
 */
const char *bx_version(void);

/**
 * Message of the last failed call on this thread; empty after a success.
 * Valid until the next `bx_*` call on the same thread.
 */
const char *bx_last_error_message(void);

/**
 * Creates a volume. `data` may be null for an all-zero volume; otherwise it
 * must hold `len = dims[0]*dims[1]*dims[2]` values, axis 2 fastest.
 *
 * # Safety
 * `dims` and `spacing` point to 3 values; `data` to `len` floats or null.
 */
enum BxStatus bx_volume_new(const size_t *dims,
                            const double *spacing,
                            enum BxVolumeKind kind,
                            const float *data,
                            size_t len,
                            struct BxVolume **out);

/**
 * Reads a `.nii` or `.nii.gz` file as an intensity volume.
 *
 * # Safety
 * `path` is a NUL-terminated string; `out` is writable.
 */
enum BxStatus bx_volume_read(const char *path, struct BxVolume **out);

/**
 * # Safety
 * `vol` is a live handle; `path` is a NUL-terminated string.
 */
enum BxStatus bx_volume_write(const struct BxVolume *vol,
                              const char *path,
                              enum BxDataType datatype);

/**
 * Releases a volume; null is ignored.
 *
 * # Safety
 * `vol` came from this library and is not used afterwards.
 */
void bx_volume_free(struct BxVolume *vol);

/**
 * # Safety
 * `vol` is a live handle; `dims` and `spacing` (either may be null) hold 3 values.
 */
enum BxStatus bx_volume_shape(const struct BxVolume *vol, size_t *dims, double *spacing);

/**
 * Borrowed pointer to the voxel values; valid while `vol` lives.
 *
 * # Safety
 * `vol` is a live handle; `len` is writable or null.
 */
const float *bx_volume_data(const struct BxVolume *vol, size_t *len);

/**
 * Dice overlap of the nonzero voxels of two same-shape volumes.
 *
 * # Safety
 * `a` and `b` are live handles; `out` is writable.
 */
enum BxStatus bx_dice(const struct BxVolume *a, const struct BxVolume *b, double *out);

/**
 * Number of windows needed to cover a `dims` volume with `window`/`step`.
 *
 * # Safety
 * `dims` holds 3 values; `out` is writable.
 */
enum BxStatus bx_plan_count(const size_t *dims, size_t window, size_t step, size_t *out);

/**
 * Runs the full pipeline on an intensity volume.
 *
 * `config_json` is a pipeline configuration document; relative paths in it
 * resolve against `base_dir` (null means the current directory). `seed`
 * seeds noisy-oracle backends. A missing brain is not an error: check
 * [`bx_result_status`].
 *
 * # Safety
 * `input` is a live handle; strings are NUL-terminated; `out` is writable.
 */
enum BxStatus bx_extract(const struct BxVolume *input,
                         const char *config_json,
                         const char *base_dir,
                         uint64_t seed,
                         struct BxResult **out);

/**
 * # Safety
 * `res` is a live handle; `out` is writable.
 */
enum BxStatus bx_result_status(const struct BxResult *res, enum BxExtractStatus *out);

/**
 * Copies the mask (on the input's grid) into a new volume handle.
 *
 * # Safety
 * `res` is a live handle; `out` is writable.
 */
enum BxStatus bx_result_mask(const struct BxResult *res, struct BxVolume **out);

/**
 * Number of regions in the trace (localization first, then each refinement stage).
 *
 * # Safety
 * `res` is a live handle or null (yields 0).
 */
size_t bx_result_roi_count(const struct BxResult *res);

/**
 * Region `index` of the trace on the conformed grid; `max` is exclusive.
 *
 * # Safety
 * `res` is a live handle; `min` and `max` hold 3 values.
 */
enum BxStatus bx_result_roi(const struct BxResult *res, size_t index, size_t *min, size_t *max);

/**
 * # Safety
 * `res` came from [`bx_extract`] and is not used afterwards; null is ignored.
 */
void bx_result_free(struct BxResult *res);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BRAINEX_H */
