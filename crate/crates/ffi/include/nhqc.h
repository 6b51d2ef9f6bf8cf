#ifndef NHQC_H
#define NHQC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum NhqcStatus {
  NHQC_STATUS_OK = 0,
  NHQC_STATUS_NULL_POINTER = 1,
  NHQC_STATUS_INVALID_ARGUMENT = 2,
  NHQC_STATUS_NUMERICAL = 3,
  NHQC_STATUS_IO = 4,
  NHQC_STATUS_PANIC = 5,
} NhqcStatus;

/**
 * Fitting forms for [`nhqc_fit_scaling`].
 */
typedef enum NhqcFitMode {
  /**
   * `S = g L + s0`; coefficients `(g, s0)`.
   */
  NHQC_FIT_MODE_LINEAR = 0,
  /**
   * `S = g ln L + s0`; coefficients `(g, s0)`.
   */
  NHQC_FIT_MODE_LOG = 1,
  /**
   * `S = g ln L + g' L + s0`; coefficients `(g, g', s0)`.
   */
  NHQC_FIT_MODE_COMBINED = 2,
} NhqcFitMode;

/**
 * Opaque model specification.
 */
typedef struct NhqcModel NhqcModel;

/**
 * Opaque eigen-decomposition result.
 */
typedef struct NhqcSpectrum NhqcSpectrum;

typedef struct NhqcSpectralSummary {
  double mean_abs_im;
  double mean_ipr;
  double max_abs_im;
} NhqcSpectralSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates a model with `α` set to the Fibonacci approximant of `l`.
 * `model` is 1 or 2.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum NhqcStatus nhqc_model_new(uint8_t model, double j, double v, size_t l, struct NhqcModel **out);

/**
 * Creates a model with rational `α = p/q`.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum NhqcStatus nhqc_model_new_with_alpha(uint8_t model,
                                          double j,
                                          double v,
                                          uint64_t alpha_p,
                                          uint64_t alpha_q,
                                          size_t l,
                                          struct NhqcModel **out);

/**
 * # Safety
 * `model` must be null or a handle from `nhqc_model_new*` not yet freed.
 */
void nhqc_model_free(struct NhqcModel *model);

/**
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum NhqcStatus nhqc_model_size(const struct NhqcModel *model, size_t *out);

/**
 * Diagonalizes the model Hamiltonian.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum NhqcStatus nhqc_spectrum_compute(const struct NhqcModel *model, struct NhqcSpectrum **out);

/**
 * # Safety
 * `spectrum` must be null or a live handle.
 */
void nhqc_spectrum_free(struct NhqcSpectrum *spectrum);

/**
 * Number of eigenvalues; 0 for a null handle.
 *
 * # Safety
 * `spectrum` must be null or a live handle.
 */
size_t nhqc_spectrum_len(const struct NhqcSpectrum *spectrum);

/**
 * Eigenvalue `index` in ascending `(Re, Im)` order, with its IPR.
 *
 * # Safety
 * `spectrum` must be a live handle; output pointers must be writable.
 */
enum NhqcStatus nhqc_spectrum_eigenvalue(const struct NhqcSpectrum *spectrum,
                                         size_t index,
                                         double *re,
                                         double *im,
                                         double *ipr);

/**
 * # Safety
 * `spectrum` must be a live handle and `out` writable.
 */
enum NhqcStatus nhqc_spectrum_summary(const struct NhqcSpectrum *spectrum,
                                      struct NhqcSpectralSummary *out);

/**
 * Time-averaged entropy of the first `subsystem` sites over `[T/2, T]`
 * after a quench from the charge-density-wave state. `subsystem = 0`
 * selects half the lattice.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum NhqcStatus nhqc_steady_state_entropy(const struct NhqcModel *model,
                                          double total_time,
                                          size_t subsystem,
                                          double *out);

/**
 * Least-squares fit of `ys` against sizes `xs`. Writes the coefficients
 * (2 or 3, see [`NhqcFitMode`]) into `coefficients`, which must hold
 * `capacity >= 3` values.
 *
 * # Safety
 * `xs` and `ys` must point to `n` readable values, `coefficients` to
 * `capacity` writable values, `residual_rms` to one.
 */
enum NhqcStatus nhqc_fit_scaling(enum NhqcFitMode mode,
                                 const double *xs,
                                 const double *ys,
                                 size_t n,
                                 double *coefficients,
                                 size_t capacity,
                                 double *residual_rms);

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *nhqc_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *nhqc_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NHQC_H */
