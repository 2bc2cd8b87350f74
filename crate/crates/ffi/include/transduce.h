#ifndef TRANSDUCE_H
#define TRANSDUCE_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Result of every fallible call.
 */
typedef enum TransduceStatus {
  TRANSDUCE_STATUS_OK = 0,
  TRANSDUCE_STATUS_NULL_POINTER = 1,
  TRANSDUCE_STATUS_INVALID_UTF8 = 2,
  /**
   * Invalid parameters or configuration.
   */
  TRANSDUCE_STATUS_INVALID = 3,
  TRANSDUCE_STATUS_NOT_CONVERGED = 4,
  TRANSDUCE_STATUS_IO = 5,
  TRANSDUCE_STATUS_PANIC = 6,
} TransduceStatus;

/**
 * Device description loaded from a JSON config.
 */
typedef struct TransduceDevice TransduceDevice;

/**
 * Outcome of a parameter fit.
 */
typedef struct TransduceFit TransduceFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *transduce_version(void);

/**
 * Message for the last failure on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *transduce_last_error(void);

/**
 * The shipped device description.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum TransduceStatus transduce_device_reference(struct TransduceDevice **out);

/**
 * Load and validate a config file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum TransduceStatus transduce_device_load(const char *path, struct TransduceDevice **out);

/**
 * Parse and validate a config document held in memory.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` writable.
 */
enum TransduceStatus transduce_device_from_json(const char *json, struct TransduceDevice **out);

/**
 * # Safety
 * `device` must be NULL or a handle returned by this library, not yet freed.
 */
void transduce_device_free(struct TransduceDevice *device);

/**
 * Number of mechanical modes in the device.
 *
 * # Safety
 * `device` must be a live handle and `out` writable.
 */
enum TransduceStatus transduce_device_mode_count(const struct TransduceDevice *device, size_t *out);

/**
 * Efficiency budget at the config's operating point. Stage pointers may be NULL.
 *
 * # Safety
 * `device` must be a live handle; non-NULL out-pointers must be writable.
 */
enum TransduceStatus transduce_budget(const struct TransduceDevice *device,
                                      double *total,
                                      double *electrical,
                                      double *optical);

/**
 * Single-photon and multiphoton cooperativity of a named mode.
 *
 * # Safety
 * `device` must be a live handle, `mode` NUL-terminated; non-NULL out-pointers writable.
 */
enum TransduceStatus transduce_cooperativity(const struct TransduceDevice *device,
                                             const char *mode,
                                             double n_c,
                                             double *c0,
                                             double *c_om);

/**
 * Swap probability of a red-sideband pulse of `energy_j` reaching the device.
 *
 * # Safety
 * `device` must be a live handle, `mode` NUL-terminated and `out` writable.
 */
enum TransduceStatus transduce_swap_probability(const struct TransduceDevice *device,
                                                const char *mode,
                                                double energy_j,
                                                double length_s,
                                                double *out);

/**
 * Modeled electrical-to-mechanical efficiency at a mode frequency. Pass a
 * NaN temperature to use the configured matching inductance as is.
 *
 * # Safety
 * `device` must be a live handle, `mode` NUL-terminated and `out` writable.
 */
enum TransduceStatus transduce_electromechanical_efficiency(const struct TransduceDevice *device,
                                                            const char *mode,
                                                            double temperature_k,
                                                            double *out);

/**
 * Thermal occupation from red and blue sideband count totals.
 *
 * # Safety
 * `n_th` must be writable; `sigma` may be NULL.
 */
enum TransduceStatus transduce_thermal_occupation(double red_counts,
                                                  double blue_counts,
                                                  double *n_th,
                                                  double *sigma);

/**
 * Rotated piezoelectric tensor in Voigt form, written row-major into `out[18]`.
 *
 * # Safety
 * `out` must point to at least 18 writable doubles.
 */
enum TransduceStatus transduce_piezo_tensor(double phi_rad, double e14_si, double *out);

/**
 * Lorentzian fit of `y(x)`; parameters `center`, `fwhm`, `amplitude`, `offset`.
 *
 * # Safety
 * `x` and `y` must each point to `n` doubles; `out` must be writable.
 */
enum TransduceStatus transduce_fit_lorentzian(const double *x,
                                              const double *y,
                                              size_t n,
                                              struct TransduceFit **out);

/**
 * Square-root Lorentzian fit of an amplitude spectrum.
 *
 * # Safety
 * As for [`transduce_fit_lorentzian`].
 */
enum TransduceStatus transduce_fit_sqrt_lorentzian(const double *x,
                                                   const double *y,
                                                   size_t n,
                                                   struct TransduceFit **out);

/**
 * Value and standard error of a named fit parameter. `sigma` may be NULL.
 *
 * # Safety
 * `fit` must be a live handle, `name` NUL-terminated, `value` writable.
 */
enum TransduceStatus transduce_fit_param(const struct TransduceFit *fit,
                                         const char *name,
                                         double *value,
                                         double *sigma);

/**
 * Relative residual norm and convergence flag of a fit. Either pointer may be NULL.
 *
 * # Safety
 * `fit` must be a live handle.
 */
enum TransduceStatus transduce_fit_quality(const struct TransduceFit *fit,
                                           double *residual_norm,
                                           bool *converged);

/**
 * The full fit result as JSON. Release with [`transduce_string_free`].
 *
 * # Safety
 * `fit` must be a live handle and `out` writable.
 */
enum TransduceStatus transduce_fit_to_json(const struct TransduceFit *fit, char **out);

/**
 * # Safety
 * `fit` must be NULL or a live handle.
 */
void transduce_fit_free(struct TransduceFit *fit);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library.
 */
void transduce_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TRANSDUCE_H */
