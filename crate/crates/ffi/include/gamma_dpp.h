#ifndef GAMMA_DPP_H
#define GAMMA_DPP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GdppStatus {
  GDPP_STATUS_OK = 0,
  GDPP_STATUS_NULL_POINTER = 1,
  GDPP_STATUS_INVALID_ARGUMENT = 2,
  GDPP_STATUS_NOT_ADMISSIBLE = 3,
  GDPP_STATUS_NUMERICAL = 4,
  GDPP_STATUS_BUFFER_TOO_SMALL = 5,
  GDPP_STATUS_PANIC = 6,
} GdppStatus;

// Finite kernel matrix on a window of lattice sites `x = k + ½`.
typedef struct GdppKernelMatrix GdppKernelMatrix;

// Admissible parameter pair `(z, z')`.
typedef struct GdppParams GdppParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread; empty after a success.
// The pointer stays valid until the next call on the same thread.
const char *gdpp_last_error(void);

// Creates parameters `(z, z')`; fails with `NotAdmissible` outside the admissible set.
//
// # Safety
// `out` must be a valid pointer to writable storage for one handle.
enum GdppStatus gdpp_params_new(double z_re,
                                double z_im,
                                double zp_re,
                                double zp_im,
                                struct GdppParams **out);

// # Safety
// `p` must come from [`gdpp_params_new`] and not have been freed; null is ignored.
void gdpp_params_free(struct GdppParams *p);

// `K(x, y)` for `x = kx + ½`, `y = ky + ½`.
//
// # Safety
// `p` must be a live handle and `out` writable.
enum GdppStatus gdpp_kernel_entry(const struct GdppParams *p, int64_t kx, int64_t ky, double *out);

// Density `ρ₁(x) = K(x, x)` at `x = k + ½`.
//
// # Safety
// `p` must be a live handle and `out` writable.
enum GdppStatus gdpp_rho1(const struct GdppParams *p, int64_t k, double *out);

// The constant `C(z, z')`.
//
// # Safety
// `p` must be a live handle and `out` writable.
enum GdppStatus gdpp_c_constant(const struct GdppParams *p, double *out);

// Gamma kernel truncated to `k ∈ [−radius, radius)`.
//
// # Safety
// `p` must be a live handle and `out` writable.
enum GdppStatus gdpp_kernel_matrix_new(const struct GdppParams *p,
                                       size_t radius,
                                       struct GdppKernelMatrix **out);

// Symmetric kernel from `n × n` row-major entries on sites `k = 0..n`; the
// spectrum must lie in `[0, 1]`.
//
// # Safety
// `entries` must point to `n * n` readable doubles and `out` be writable.
enum GdppStatus gdpp_kernel_matrix_from_entries(size_t n,
                                                const double *entries,
                                                struct GdppKernelMatrix **out);

// Number of sites, or 0 for a null handle.
//
// # Safety
// `m` must be a live handle or null.
size_t gdpp_kernel_matrix_dim(const struct GdppKernelMatrix *m);

// Copies the row-major entries into `buf` (capacity `len`, at least `dim²`).
//
// # Safety
// `m` must be a live handle and `buf` writable for `len` doubles.
enum GdppStatus gdpp_kernel_matrix_copy(const struct GdppKernelMatrix *m, double *buf, size_t len);

// Copies the site labels `k` (site `x = k + ½`) into `buf` (capacity `len`, at least `dim`).
//
// # Safety
// `m` must be a live handle and `buf` writable for `len` integers.
enum GdppStatus gdpp_kernel_matrix_sites(const struct GdppKernelMatrix *m,
                                         int64_t *buf,
                                         size_t len);

// Reduced Palm kernel at site `k` (a particle at `k + ½`), on the window without that site.
//
// # Safety
// `m` must be a live handle and `out` writable.
enum GdppStatus gdpp_kernel_matrix_reduced_palm(const struct GdppKernelMatrix *m,
                                                int64_t k,
                                                struct GdppKernelMatrix **out);

// Kernel conditioned on a hole at site `k`, on the window without that site.
//
// # Safety
// `m` must be a live handle and `out` writable.
enum GdppStatus gdpp_kernel_matrix_hole(const struct GdppKernelMatrix *m,
                                        int64_t k,
                                        struct GdppKernelMatrix **out);

// # Safety
// `m` must come from this library and not have been freed; null is ignored.
void gdpp_kernel_matrix_free(struct GdppKernelMatrix *m);

// Draw number `index` of the stream `seed`; writes occupied site labels to
// `sites` (capacity `cap`) and their number to `count`.
//
// # Safety
// `m` must be a live handle, `sites` writable for `cap` integers, `count` writable.
enum GdppStatus gdpp_sample(const struct GdppKernelMatrix *m,
                            uint64_t seed,
                            uint64_t index,
                            int64_t *sites,
                            size_t cap,
                            size_t *count);

// `E[Π_{x∈ω} a(x)] = det(1 + (a−1)K)` with `a` given per window site (length `dim`).
//
// # Safety
// `m` must be a live handle, `a` readable for `len` doubles and `out` writable.
enum GdppStatus gdpp_expect_multiplicative(const struct GdppKernelMatrix *m,
                                           const double *a,
                                           size_t len,
                                           double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GAMMA_DPP_H */
