#ifndef TBC_H
#define TBC_H

/* Generated by cbindgen from crates/tbc-ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum TbcStatus {
  TBC_STATUS_OK = 0,
  // A required pointer was null or a string was not valid UTF-8.
  TBC_STATUS_INVALID_ARGUMENT = 1,
  // The configuration was rejected.
  TBC_STATUS_CONFIG = 2,
  // Non-finite values or a failed numerical kernel.
  TBC_STATUS_NUMERICAL = 3,
  // A linear system could not be factored.
  TBC_STATUS_SINGULAR = 4,
  // A caller buffer has the wrong size.
  TBC_STATUS_DIMENSION = 5,
  // File system failure.
  TBC_STATUS_IO = 6,
  // Unexpected internal failure.
  TBC_STATUS_INTERNAL = 7,
} TbcStatus;

// Time-stepping method selector for [`tbc_cq_weights`].
typedef enum TbcStepper {
  TBC_STEPPER_BDF1 = 0,
  TBC_STEPPER_BDF2 = 1,
  TBC_STEPPER_TR = 2,
} TbcStepper;

// A configured run: solver, discretization and exact reference solution.
typedef struct TbcHandle TbcHandle;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Creates a run from TOML text (null or empty text selects the defaults)
// and stores the new handle in `*out`. The initial profile is projected on
// the grid and the boundary operator is factored.
//
// # Safety
// `config` must be null or a NUL-terminated string; `out` must be valid for
// one pointer write.
enum TbcStatus tbc_handle_new(const char *config, struct TbcHandle **out);

// Releases a handle. Null is accepted and ignored.
//
// # Safety
// `h` must be null or a handle from [`tbc_handle_new`] not yet freed.
void tbc_handle_free(struct TbcHandle *h);

// Advances the run by `n` time steps.
//
// # Safety
// `h` must be a live handle.
enum TbcStatus tbc_handle_step(struct TbcHandle *h, size_t n);

// Number of completed steps.
//
// # Safety
// `h` must be a live handle and `out` valid for a write.
enum TbcStatus tbc_handle_steps(const struct TbcHandle *h, size_t *out);

// Current time.
//
// # Safety
// `h` must be a live handle and `out` valid for a write.
enum TbcStatus tbc_handle_time(const struct TbcHandle *h, double *out);

// Relative L2 error of the current field against the exact solution.
//
// # Safety
// `h` must be a live handle and `out` valid for a write.
enum TbcStatus tbc_handle_relative_error(const struct TbcHandle *h, double *out);

// Number of complex scalars of time-dependent boundary state.
//
// # Safety
// `h` must be a live handle and `out` valid for a write.
enum TbcStatus tbc_handle_state_size(const struct TbcHandle *h, size_t *out);

// Shape `(N1 + 1, N2 + 1)` of the coefficient matrix.
//
// # Safety
// `h` must be a live handle; `rows` and `cols` valid for a write.
enum TbcStatus tbc_handle_field_shape(const struct TbcHandle *h, size_t *rows, size_t *cols);

// Copies the Lobatto coefficients, column-major, into `re` and `im`, each
// of length `len = rows * cols`.
//
// # Safety
// `h` must be a live handle; `re` and `im` valid for `len` writes.
enum TbcStatus tbc_handle_field(const struct TbcHandle *h, double *re, double *im, size_t len);

// Variant label such as `NP30-TR`, owned by the handle.
//
// # Safety
// `h` must be null or a live handle; the string lives as long as the handle.
const char *tbc_handle_label(const struct TbcHandle *h);

// First `n` convolution-quadrature weights of `stepper` for order `nu`
// (`0.5` or `-0.5`), written to `out`.
//
// # Safety
// `out` must be valid for `n` writes.
enum TbcStatus tbc_cq_weights(enum TbcStepper stepper, double nu, size_t n, double dt, double *out);

// Copies the message of the last failure on this thread into `buf`
// (truncated, always NUL-terminated when `len > 0`) and returns the length
// needed including the terminator, or 0 if there is no message.
//
// # Safety
// `buf` must be null or valid for `len` writes.
size_t tbc_last_error(char *buf, size_t len);

// Static name of a status code.
const char *tbc_status_name(enum TbcStatus status);

// Library version.
const char *tbc_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TBC_H */
