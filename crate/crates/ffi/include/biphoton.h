#ifndef BIPHOTON_H
#define BIPHOTON_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum BpStatus {
  BP_STATUS_OK = 0,
  BP_STATUS_NULL_POINTER = 1,
  BP_STATUS_INVALID_ARGUMENT = 2,
  BP_STATUS_NOT_PHYSICAL = 3,
  BP_STATUS_NUMERICAL_FAILURE = 4,
  /**
   * The output holds the best iterate found before the budget ran out.
   */
  BP_STATUS_NOT_CONVERGED = 5,
  BP_STATUS_PANIC = 6,
} BpStatus;

typedef enum BpBeatMode {
  /**
   * `½ G₀(τ) (1 - cos δτ)`
   */
  BP_BEAT_MODE_ANTISYMMETRIC = 0,
  /**
   * `⅛ G₀(τ) (1 + cos(δτ - θ))`
   */
  BP_BEAT_MODE_PHASE_SHIFTED = 1,
} BpBeatMode;

/**
 * Two-qubit polarization density matrix in the (HH, HV, VH, VV) basis.
 */
typedef struct BpDensityMatrix BpDensityMatrix;

/**
 * One-sided biphoton envelope.
 */
typedef struct BpEnvelope BpEnvelope;

typedef struct BpChshResult {
  double s_max;
  double s_direct;
  double s_at_angles;
  /**
   * (polar, azimuth) on the Poincaré sphere for a, a', b, b'.
   */
  double angles[8];
} BpChshResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *bp_version(void);

/**
 * Copies the last error message of this thread into `buf` (truncated,
 * always NUL-terminated when `len > 0`) and returns the full message length
 * in bytes excluding the terminator.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t bp_last_error_message(char *buf, size_t len);

/**
 * Builds a density matrix from row-major real and imaginary parts (16
 * entries each). Fails with `BP_STATUS_NOT_PHYSICAL` unless the matrix is
 * Hermitian, unit-trace and positive semidefinite.
 *
 * # Safety
 * `re` and `im` must point to 16 readable doubles; `out` must be writable.
 */
enum BpStatus bp_density_new(const double *re, const double *im, struct BpDensityMatrix **out);

/**
 * The polarization singlet `(|HV> - |VH>)/sqrt(2)`.
 *
 * # Safety
 * `out` must be writable.
 */
enum BpStatus bp_density_singlet(struct BpDensityMatrix **out);

/**
 * Reference partially mixed state near the singlet (singlet fidelity 0.883).
 *
 * # Safety
 * `out` must be writable.
 */
enum BpStatus bp_density_reference(struct BpDensityMatrix **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `rho` must be null or a handle from this library not yet freed.
 */
void bp_density_free(struct BpDensityMatrix *rho);

/**
 * Writes the row-major real and imaginary parts (16 entries each).
 *
 * # Safety
 * `rho` must be a live handle; `re` and `im` must point to 16 writable doubles.
 */
enum BpStatus bp_density_get(const struct BpDensityMatrix *rho, double *re, double *im);

/**
 * Root fidelity `sqrt(<ψ⁻|ρ|ψ⁻>)` against the polarization singlet.
 *
 * # Safety
 * `rho` must be a live handle; `out` must be writable.
 */
enum BpStatus bp_fidelity_singlet(const struct BpDensityMatrix *rho, double *out);

/**
 * Maximal CHSH value: analytic optimum plus a direct search over analyzers.
 *
 * # Safety
 * `rho` must be a live handle; `out` must be writable.
 */
enum BpStatus bp_chsh_optimize(const struct BpDensityMatrix *rho, struct BpChshResult *out);

/**
 * Maximum-likelihood reconstruction from 16 counts taken at the analyzer
 * pairs {H,V,D,R}x{H,V,D,R} in row-major order (HH, HV, HD, HR, VH, ...),
 * all with equal exposure. On `BP_STATUS_NOT_CONVERGED` `out` still
 * receives the best iterate.
 *
 * # Safety
 * `counts` must point to 16 readable doubles; `out` must be writable.
 */
enum BpStatus bp_mle_reconstruct(const double *counts, struct BpDensityMatrix **out);

/**
 * Exponential envelope (`osc_rad_per_ns == 0`) or damped oscillation, unit area.
 *
 * # Safety
 * `out` must be writable.
 */
enum BpStatus bp_envelope_new(double decay_ns,
                              double rise_ns,
                              double osc_rad_per_ns,
                              struct BpEnvelope **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `env` must be null or a handle from this library not yet freed.
 */
void bp_envelope_free(struct BpEnvelope *env);

/**
 * `G₀(τ)` in 1/ns; zero for τ <= 0.
 *
 * # Safety
 * `env` must be a live handle; `out` must be writable.
 */
enum BpStatus bp_envelope_eval(const struct BpEnvelope *env, double tau_ns, double *out);

/**
 * Beating correlation over both time orderings (the envelope mirrored onto τ < 0).
 * `theta` is ignored in antisymmetric mode.
 *
 * # Safety
 * `env` must be a live handle; `out` must be writable.
 */
enum BpStatus bp_beating_g2(const struct BpEnvelope *env,
                            enum BpBeatMode mode,
                            double delta_rad_per_ns,
                            double theta,
                            double tau_ns,
                            double *out);

/**
 * One Poisson draw from substream `(seed, tag, index)`. Identical inputs
 * give identical draws on every platform.
 *
 * # Safety
 * `out` must be writable.
 */
enum BpStatus bp_sample_poisson(double mean,
                                uint64_t seed,
                                uint32_t tag,
                                uint32_t index,
                                uint64_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BIPHOTON_H */
