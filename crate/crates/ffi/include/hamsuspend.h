#ifndef HAMSUSPEND_H
#define HAMSUSPEND_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every entry point.
typedef enum HsStatus {
  HS_STATUS_OK = 0,
  HS_STATUS_NULL_POINTER = 1,
  HS_STATUS_INVALID_ARGUMENT = 2,
  HS_STATUS_DIMENSION = 3,
  HS_STATUS_CONFIG = 4,
  HS_STATUS_NO_CONVERGENCE = 5,
  HS_STATUS_CONTRACTION = 6,
  HS_STATUS_QUADRATURE = 7,
  HS_STATUS_STIFFNESS = 8,
  HS_STATUS_DOMAIN_EXIT = 9,
  HS_STATUS_NUMERICAL = 10,
  HS_STATUS_PANIC = 11,
} HsStatus;

// Opaque handle: a suspended Hamiltonian with its integrator settings.
typedef struct HsModel HsModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Build a model from the default config.
//
// # Safety
// `out` must be a valid pointer; it receives a handle to free with
// `hs_model_free`.
enum HsStatus hs_model_new_default(struct HsModel **out);

// Build a model from TOML text; missing keys take their defaults.
//
// # Safety
// `toml` must be a NUL-terminated UTF-8 string and `out` a valid pointer.
enum HsStatus hs_model_from_toml(const char *toml, struct HsModel **out);

// # Safety
// `m` must come from a constructor here and not be used afterwards. Null
// is ignored.
void hs_model_free(struct HsModel *m);

// `n`: section points have `2n` coordinates, phase points `2n + 2`.
//
// # Safety
// `m` and `out` must be valid.
enum HsStatus hs_model_half_dim(const struct HsModel *m, size_t *out);

// `g_α(z)`; `z` and `out` hold `2n` values.
//
// # Safety
// `z` must point to `len` values and `out` to room for `len`.
enum HsStatus hs_isotopy_eval(const struct HsModel *m,
                              double alpha,
                              const double *z,
                              size_t len,
                              double *out);

// `g_α⁻¹(z)`.
//
// # Safety
// As for `hs_isotopy_eval`.
enum HsStatus hs_isotopy_inverse(const struct HsModel *m,
                                 double alpha,
                                 const double *z,
                                 size_t len,
                                 double *out);

// The isotopy's vector field `X_α(z)`.
//
// # Safety
// As for `hs_isotopy_eval`.
enum HsStatus hs_isotopy_field(const struct HsModel *m,
                               double alpha,
                               const double *z,
                               size_t len,
                               double *out);

// `K_α(z)` with the quadrature convergence check; writes one value.
//
// # Safety
// `z` must point to `len` values and `out` to one.
enum HsStatus hs_k_value(const struct HsModel *m,
                         double alpha,
                         const double *z,
                         size_t len,
                         double *out);

// The suspended Hamiltonian at a phase point; writes one value.
//
// # Safety
// `z` must point to `len = 2n + 2` values and `out` to one.
enum HsStatus hs_hamiltonian_value(const struct HsModel *m,
                                   const double *z,
                                   size_t len,
                                   double *out);

// Gradient of the suspended Hamiltonian.
//
// # Safety
// `z` must point to `len = 2n + 2` values and `out` to room for `len`.
enum HsStatus hs_hamiltonian_gradient(const struct HsModel *m,
                                      const double *z,
                                      size_t len,
                                      double *out);

// Hamiltonian vector field `J∇H`.
//
// # Safety
// As for `hs_hamiltonian_gradient`.
enum HsStatus hs_hamiltonian_field(const struct HsModel *m,
                                   const double *z,
                                   size_t len,
                                   double *out);

// Time-one section map of a point on the section, `2n` values in and
// out. When `residual` is non-null it receives the distance to `g(z)`.
//
// # Safety
// `z` must point to `len` values, `out` to room for `len`; `residual` may
// be null.
enum HsStatus hs_section_map(const struct HsModel *m,
                             const double *z,
                             size_t len,
                             double *out,
                             double *residual);

// Copy the calling thread's last error message into `buf`, truncated and
// NUL-terminated. Returns the full message length plus one, so a caller
// can size a buffer by passing `cap = 0`.
//
// # Safety
// `buf` must have room for `cap` bytes; it may be null when `cap` is 0.
size_t hs_last_error(char *buf, size_t cap);

// Static, NUL-terminated name of a status code.
const char *hs_status_name(enum HsStatus status);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HAMSUSPEND_H */
