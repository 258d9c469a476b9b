/* Generated by cbindgen from crates/ffi/src; do not edit. */

#ifndef THERMOFUSE_H
#define THERMOFUSE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result code of every fallible call.
 */
typedef enum TfStatus {
  TF_STATUS_OK = 0,
  TF_STATUS_NULL_POINTER = 1,
  TF_STATUS_INVALID_ARGUMENT = 2,
  TF_STATUS_DOMAIN = 3,
  TF_STATUS_SHAPE = 4,
  TF_STATUS_CALIBRATION = 5,
  TF_STATUS_FIT = 6,
  TF_STATUS_CONFIG = 7,
  TF_STATUS_SINGULAR_HOMOGRAPHY = 8,
  TF_STATUS_EMPTY_MASK = 9,
  TF_STATUS_FORMAT = 10,
  TF_STATUS_IO = 11,
  TF_STATUS_JSON = 12,
  TF_STATUS_PANIC = 13,
} TfStatus;

/*
 Registered, normalized burst.
 */
typedef struct TfBurst TfBurst;

/*
 Per-pixel camera coefficients.
 */
typedef struct TfCoefficients TfCoefficients;

/*
 Per-pixel fusion kernels.
 */
typedef struct TfKernels TfKernels;

/*
 Temperature map or gray-level frame.
 */
typedef struct TfMap TfMap;

/*
 Validity mask.
 */
typedef struct TfMask TfMask;

/*
 Offset polynomial.
 */
typedef struct TfOffsetModel TfOffsetModel;

typedef struct TfFlightGeometry {
  double gsd_m_per_px;
  double px_per_frame;
  double frames_per_object;
} TfFlightGeometry;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Library version, static storage.
 */
const char *tf_version(void);

/*
 Message of the last failed call on this thread, empty after a success.
 Valid until the next call on this thread.
 */
const char *tf_last_error_message(void);

/*
 # Safety
 `s` is NULL or a string returned by this library.
 */
void tf_string_free(char *s);

/*
 Copy `rows * cols` values into a new map.

 # Safety
 `data` points to `rows * cols` doubles.
 */
enum TfStatus tf_map_new(const double *data, size_t rows, size_t cols, struct TfMap **out);

/*
 # Safety
 `out` is a valid pointer.
 */
enum TfStatus tf_map_filled(size_t rows, size_t cols, double value, struct TfMap **out);

/*
 # Safety
 Pointers are valid.
 */
enum TfStatus tf_map_shape(const struct TfMap *map, size_t *rows, size_t *cols);

/*
 Copy the map into `out`, which holds exactly `len = rows * cols` values.

 # Safety
 `out` points to `len` writable doubles.
 */
enum TfStatus tf_map_data(const struct TfMap *map, double *out, size_t len);

/*
 Read a raw map (`.f32`/`.f64` with JSON sidecar).

 # Safety
 `path` is a NUL-terminated string.
 */
enum TfStatus tf_map_read_raw(const char *path, struct TfMap **out);

/*
 Write a raw little-endian `f32` map and its sidecar.

 # Safety
 Pointers are valid; `units` is a NUL-terminated string.
 */
enum TfStatus tf_map_write_raw(const struct TfMap *map, const char *path, const char *units);

/*
 # Safety
 `map` is NULL or a handle from this library.
 */
void tf_map_free(struct TfMap *map);

/*
 Nonzero bytes are valid pixels.

 # Safety
 `data` points to `rows * cols` bytes.
 */
enum TfStatus tf_mask_new(const uint8_t *data, size_t rows, size_t cols, struct TfMask **out);

/*
 # Safety
 `out` is a valid pointer.
 */
enum TfStatus tf_mask_all(size_t rows, size_t cols, struct TfMask **out);

/*
 # Safety
 Pointers are valid.
 */
enum TfStatus tf_mask_count(const struct TfMask *mask, size_t *out);

/*
 Copy the mask as 0/1 bytes into `out` of exactly `len` bytes.

 # Safety
 `out` points to `len` writable bytes.
 */
enum TfStatus tf_mask_data(const struct TfMask *mask, uint8_t *out, size_t len);

/*
 # Safety
 `mask` is NULL or a handle from this library.
 */
void tf_mask_free(struct TfMask *mask);

/*
 The built-in reference camera on a `rows × cols` frame.

 # Safety
 `out` is a valid pointer.
 */
enum TfStatus tf_coefficients_reference(size_t rows, size_t cols, struct TfCoefficients **out);

/*
 Every pixel gets the same eight coefficients.

 # Safety
 `coeffs` points to 8 doubles.
 */
enum TfStatus tf_coefficients_uniform(size_t rows,
                                      size_t cols,
                                      const double *coeffs,
                                      struct TfCoefficients **out);

/*
 # Safety
 `path` is a NUL-terminated string.
 */
enum TfStatus tf_coefficients_read(const char *path, struct TfCoefficients **out);

/*
 # Safety
 Pointers are valid.
 */
enum TfStatus tf_coefficients_write(const struct TfCoefficients *c, const char *path);

/*
 # Safety
 Pointers are valid.
 */
enum TfStatus tf_coefficients_shape(const struct TfCoefficients *c, size_t *rows, size_t *cols);

/*
 The eight coefficients of one pixel.

 # Safety
 `out` points to 8 writable doubles.
 */
enum TfStatus tf_coefficients_pixel(const struct TfCoefficients *c,
                                    size_t row,
                                    size_t col,
                                    double *out);

/*
 Fit a radial model of `degree` and return its reconstruction on the
 same frame.

 # Safety
 Pointers are valid.
 */
enum TfStatus tf_coefficients_radial(const struct TfCoefficients *c,
                                     size_t degree,
                                     struct TfCoefficients **out);

/*
 Per-pixel fit from a measurement manifest.

 # Safety
 `manifest` is a NUL-terminated string.
 */
enum TfStatus tf_calibrate(const char *manifest, struct TfCoefficients **out);

/*
 Noiseless gray-level frame of temperature map `x` at ambient `t_amb`.

 # Safety
 Pointers are valid.
 */
enum TfStatus tf_synthesize_frame(const struct TfMap *x,
                                  double t_amb,
                                  const struct TfCoefficients *c,
                                  struct TfMap **out);

/*
 # Safety
 `c` is NULL or a handle from this library.
 */
void tf_coefficients_free(struct TfCoefficients *c);

/*
 Simulate a burst of `x`. `spec_json` is a burst spec in JSON, or NULL
 for the defaults.

 # Safety
 Pointers are valid; `spec_json` is NULL or NUL-terminated.
 */
enum TfStatus tf_burst_make(const struct TfMap *x,
                            double t_amb,
                            const struct TfCoefficients *c,
                            const char *spec_json,
                            struct TfBurst **out);

/*
 Identity-registered burst from `n` gray-level frames. Frames are scaled
 by the default gray range [0, 16383]; temperatures use [0, 70] °C.

 # Safety
 `frames` points to `n` valid map handles.
 */
enum TfStatus tf_burst_stationary(const struct TfMap *const *frames,
                                  size_t n,
                                  double t_amb,
                                  struct TfBurst **out);

/*
 # Safety
 `dir` is a NUL-terminated string.
 */
enum TfStatus tf_burst_load(const char *dir, struct TfBurst **out);

/*
 # Safety
 Pointers are valid.
 */
enum TfStatus tf_burst_save(const struct TfBurst *b, const char *dir);

/*
 # Safety
 Pointers are valid.
 */
enum TfStatus tf_burst_len(const struct TfBurst *b, size_t *out);

/*
 # Safety
 Pointers are valid.
 */
enum TfStatus tf_burst_shape(const struct TfBurst *b, size_t *rows, size_t *cols);

/*
 # Safety
 Pointers are valid.
 */
enum TfStatus tf_burst_pivot(const struct TfBurst *b, size_t *out);

/*
 Overlap of every frame with the pivot; `len` must equal the frame count.

 # Safety
 `out` points to `len` writable doubles.
 */
enum TfStatus tf_burst_overlaps(const struct TfBurst *b, double *out, size_t len);

/*
 Pixels valid in at least one frame.

 # Safety
 Pointers are valid.
 */
enum TfStatus tf_burst_union_mask(const struct TfBurst *b, struct TfMask **out);

/*
 # Safety
 `b` is NULL or a handle from this library.
 */
void tf_burst_free(struct TfBurst *b);

/*
 Kernels for `b`: `"identity"`, `"average"`, `"shifted"` or
 `"file:PATH"`, of odd size `k`.

 # Safety
 Pointers are valid; `kind` is NUL-terminated.
 */
enum TfStatus tf_kernels_for(const struct TfBurst *b,
                             const char *kind,
                             size_t k,
                             struct TfKernels **out);

/*
 # Safety
 `path` is a NUL-terminated string.
 */
enum TfStatus tf_kernels_read(const char *path, struct TfKernels **out);

/*
 # Safety
 Pointers are valid.
 */
enum TfStatus tf_kernels_write(const struct TfKernels *ks, const char *path);

/*
 # Safety
 `ks` is NULL or a handle from this library.
 */
void tf_kernels_free(struct TfKernels *ks);

/*
 Parse `{"nu": .., "delta": [[..], ..]}`.

 # Safety
 `json` is NUL-terminated.
 */
enum TfStatus tf_offset_from_json(const char *json, struct TfOffsetModel **out);

/*
 Serialize to JSON; free the string with [`tf_string_free`].

 # Safety
 Pointers are valid.
 */
enum TfStatus tf_offset_to_json(const struct TfOffsetModel *om, char **out);

/*
 # Safety
 `out` is a valid pointer.
 */
enum TfStatus tf_offset_zeros(size_t nu, struct TfOffsetModel **out);

/*
 Fit on a simulated corpus. `corpus_json` is a corpus spec in JSON or
 NULL for the defaults; `residual_rms` (normalized units) may be NULL.

 # Safety
 Pointers are valid or NULL where allowed.
 */
enum TfStatus tf_offset_fit(const struct TfCoefficients *c,
                            const char *corpus_json,
                            size_t nu,
                            struct TfOffsetModel **out,
                            double *residual_rms);

/*
 Offset for normalized frame means and ambient temperature (°C).

 # Safety
 `means` points to `n` doubles.
 */
enum TfStatus tf_offset_eval(const struct TfOffsetModel *om,
                             const double *means,
                             size_t n,
                             double t_amb,
                             double *out);

/*
 # Safety
 `om` is NULL or a handle from this library.
 */
void tf_offset_free(struct TfOffsetModel *om);

/*
 Kernel fusion plus offset, in °C.

 # Safety
 Pointers are valid.
 */
enum TfStatus tf_fuse(const struct TfBurst *b,
                      const struct TfKernels *ks,
                      const struct TfOffsetModel *om,
                      struct TfMap **out);

/*
 Average of per-frame affine inverses for a camera with scalar gain and
 offset (`I = gain·X + offset`). Pixels seen by no frame are NaN and
 false in `mask_out`, which may be NULL.

 # Safety
 Pointers are valid or NULL where allowed.
 */
enum TfStatus tf_naive_estimate(const struct TfBurst *b,
                                double gain,
                                double offset,
                                struct TfMap **out,
                                struct TfMask **mask_out);

/*
 # Safety
 Pointers are valid.
 */
enum TfStatus tf_mae(const struct TfMap *a,
                     const struct TfMap *b,
                     const struct TfMask *mask,
                     double *out);

/*
 # Safety
 Pointers are valid.
 */
enum TfStatus tf_ssim(const struct TfMap *a,
                      const struct TfMap *b,
                      const struct TfMask *mask,
                      double data_range,
                      double *out);

/*
 Training loss on normalized maps.

 # Safety
 Pointers are valid.
 */
enum TfStatus tf_loss(const struct TfMap *x_hat,
                      const struct TfMap *x,
                      const struct TfMask *mask,
                      double lambda1,
                      double lambda2,
                      double *out);

/*
 Error report (MAE, maximum error, cumulative curve) as JSON; free with
 [`tf_string_free`].

 # Safety
 Pointers are valid.
 */
enum TfStatus tf_error_report_json(const struct TfMap *estimate,
                                   const struct TfMap *truth,
                                   const struct TfMask *mask,
                                   char **out);

/*
 Ground sampling distance, image motion per frame and frames per ground
 point for a nadir flight.

 # Safety
 `out` is a valid pointer.
 */
enum TfStatus tf_flight_geometry(double height_m,
                                 double focal_mm,
                                 double sensor_mm,
                                 double sensor_px,
                                 double speed_mps,
                                 double fps,
                                 struct TfFlightGeometry *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* THERMOFUSE_H */
