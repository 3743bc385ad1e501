/* C interface for the promor reduced order modeling library. */

#ifndef PROMOR_H
#define PROMOR_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Projection rule applied to a trial vector.
typedef enum PromorMethod {
  // Noise-aware estimate: least-squares coefficients shrunk by the
  // per-mode factors sigma2_w_i / (sigma2_w_i + sigma2_eps_T), with
  // sigma2_eps_T determined by a fixed-point iteration on the residual.
  PROMOR_METHOD_GAUSSIAN_PRIOR = 0,
  // Plain least squares onto the basis.
  PROMOR_METHOD_L2 = 1,
} PromorMethod;

// Status code returned by every fallible function. Anything other than
// `Ok` leaves a message readable via `promor_last_error`.
typedef enum PromorStatus {
  // The call succeeded.
  PROMOR_STATUS_OK = 0,
  // A pointer was NULL, a length did not match, or a value was out of
  // its documented range.
  PROMOR_STATUS_INVALID_ARGUMENT = 1,
  // A numerical routine failed to converge.
  PROMOR_STATUS_COMPUTE_FAILED = 2,
  // A file could not be read or written.
  PROMOR_STATUS_IO = 3,
  // A panic was caught at the boundary; this is a library bug.
  PROMOR_STATUS_INTERNAL = 4,
} PromorStatus;

// Opaque trained model. Created by `promor_train`, `promor_select`, or
// `promor_model_load`; released with `promor_model_free`. Handles are
// immutable after creation, so sharing one across threads for reads and
// projections is safe.
typedef struct PromorModel PromorModel;

// Scalar outputs of a projection.
typedef struct PromorProjectionInfo {
  // Estimated trial-noise variance at the solution.
  double sigma2_eps_t;
  // Fixed-point iterations performed; 0 for the least-squares method.
  uintptr_t iterations;
  // False when the iteration cap was reached before the tolerance.
  bool converged;
} PromorProjectionInfo;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string; never freed.
const char *promor_version(void);

// Message from the most recent failing call on this thread, or NULL when
// that call succeeded. The pointer stays valid until the next call on the
// same thread; copy the string if it must outlive that.
const char *promor_last_error(void);

// Fits a model of order `m` to `n` observations of dimension `d`, laid out
// row-major in `data` (observation index varies slowest). Writes a new
// handle to `out_model` on success. Requires n >= 2 and 1 <= m <= d - 1.
//
// # Safety
// `data` must point to n * d readable doubles and `out_model` to a
// writable pointer slot.
enum PromorStatus promor_train(const double *data,
                               uintptr_t n,
                               uintptr_t d,
                               uintptr_t m,
                               struct PromorModel **out_model);

// Like `promor_train`, but picks the model order by scanning orders
// 1..=m_max with the information criterion and keeping the minimizer.
// Pass `m_max = 0` to scan the full range allowed by the data. The chosen
// order is written to `out_selected_m` when that pointer is non-NULL, and
// is also available via `promor_model_order`.
//
// # Safety
// `data` must point to n * d readable doubles; `out_model` must be
// writable; `out_selected_m` may be NULL.
enum PromorStatus promor_select(const double *data,
                                uintptr_t n,
                                uintptr_t d,
                                uintptr_t m_max,
                                struct PromorModel **out_model,
                                uintptr_t *out_selected_m);

// Loads a model document written by `promor_model_save` (or the CLI) and
// writes a new handle to `out_model`.
//
// # Safety
// `path` must be a NUL-terminated string and `out_model` writable.
enum PromorStatus promor_model_load(const char *path, struct PromorModel **out_model);

// Writes the model document for `model` to `path`, creating or replacing
// the file atomically.
//
// # Safety
// `model` must be a live handle and `path` a NUL-terminated string.
enum PromorStatus promor_model_save(const struct PromorModel *model, const char *path);

// Releases a handle. NULL is accepted and ignored. Each handle must be
// freed exactly once.
//
// # Safety
// `model` must be NULL or a pointer returned by this library that has not
// been freed yet.
void promor_model_free(struct PromorModel *model);

// State dimension d, or 0 when the handle is NULL.
//
// # Safety
// `model` must be NULL or a live handle.
uintptr_t promor_model_dim(const struct PromorModel *model);

// Retained order m, or 0 when the handle is NULL.
//
// # Safety
// `model` must be NULL or a live handle.
uintptr_t promor_model_order(const struct PromorModel *model);

// Number of training realizations, or 0 when the handle is NULL.
//
// # Safety
// `model` must be NULL or a live handle.
uintptr_t promor_model_sample_count(const struct PromorModel *model);

// Estimated training-noise variance, or NaN when the handle is NULL.
//
// # Safety
// `model` must be NULL or a live handle.
double promor_model_noise_variance(const struct PromorModel *model);

// Maximized training log-likelihood, or NaN when the handle is NULL. May
// be +infinity for degenerate noise-free fits.
//
// # Safety
// `model` must be NULL or a live handle.
double promor_model_log_likelihood(const struct PromorModel *model);

// Number of stored sample-covariance eigenvalues, or 0 when the handle is
// NULL. Sizes the buffer for `promor_model_eigenvalues`.
//
// # Safety
// `model` must be NULL or a live handle.
uintptr_t promor_model_eigenvalue_count(const struct PromorModel *model);

// Copies the training mean (length d) into `out`.
//
// # Safety
// `model` must be a live handle and `out` writable for `len` doubles.
enum PromorStatus promor_model_mean(const struct PromorModel *model, double *out, uintptr_t len);

// Copies the basis matrix (d rows, m columns, row-major) into `out`;
// `len` must equal d * m.
//
// # Safety
// `model` must be a live handle and `out` writable for `len` doubles.
enum PromorStatus promor_model_basis(const struct PromorModel *model, double *out, uintptr_t len);

// Copies the latent variances (length m, non-increasing) into `out`.
//
// # Safety
// `model` must be a live handle and `out` writable for `len` doubles.
enum PromorStatus promor_model_latent_variances(const struct PromorModel *model,
                                                double *out,
                                                uintptr_t len);

// Copies the stored sample-covariance eigenvalues (descending) into `out`;
// size the buffer with `promor_model_eigenvalue_count`.
//
// # Safety
// `model` must be a live handle and `out` writable for `len` doubles.
enum PromorStatus promor_model_eigenvalues(const struct PromorModel *model,
                                           double *out,
                                           uintptr_t len);

// Projects one trial vector `y` (length d) onto the model and writes the
// latent coefficients (length m) to `out_w`. Pass `tol <= 0` or
// `max_iter == 0` to use the library defaults; both are ignored by the
// least-squares method. `out_reconstruction` (length d) and `out_info` are
// optional; pass NULL to skip them.
//
// # Safety
// Pointers must be NULL or valid for their documented lengths; `method`
// must be one of the declared enum values.
enum PromorStatus promor_project(const struct PromorModel *model,
                                 const double *y,
                                 uintptr_t y_len,
                                 enum PromorMethod method,
                                 double tol,
                                 uintptr_t max_iter,
                                 double *out_w,
                                 uintptr_t w_len,
                                 double *out_reconstruction,
                                 uintptr_t reconstruction_len,
                                 struct PromorProjectionInfo *out_info);

// Maps latent coefficients `w` (length m) back to state space, writing
// basis * w + mean (length d) to `out_y`.
//
// # Safety
// `model` must be a live handle; `w` must hold `w_len` readable doubles
// and `out_y` room for `y_len`.
enum PromorStatus promor_reconstruct(const struct PromorModel *model,
                                     const double *w,
                                     uintptr_t w_len,
                                     double *out_y,
                                     uintptr_t y_len);

// Writes the m per-mode shrinkage factors sigma2_w_i / (sigma2_w_i +
// sigma2_eps_t) applied by the Gaussian-prior method at a given trial
// noise level.
//
// # Safety
// `model` must be a live handle and `out` writable for `len` doubles.
enum PromorStatus promor_shrinkage_factors(const struct PromorModel *model,
                                           double sigma2_eps_t,
                                           double *out,
                                           uintptr_t len);

// Parses a generator spec (JSON, same schema as the CLI) and reports the
// ensemble shape it will produce, so buffers for `promor_generate` can be
// sized: both data and truth hold n * d doubles.
//
// # Safety
// `spec_json` must be a NUL-terminated string; `out_n` and `out_d` must
// be writable.
enum PromorStatus promor_spec_dims(const char *spec_json, uintptr_t *out_n, uintptr_t *out_d);

// Draws the synthetic ensemble described by a generator spec (JSON).
// `out_data` receives the n * d noisy realizations, row-major; the
// optional `out_truth` receives the noise-free counterparts. Output is a
// pure function of the spec, including its seed.
//
// # Safety
// `spec_json` must be a NUL-terminated string; `out_data` must be
// writable for `data_len` doubles; `out_truth` may be NULL, otherwise
// writable for `truth_len` doubles.
enum PromorStatus promor_generate(const char *spec_json,
                                  double *out_data,
                                  uintptr_t data_len,
                                  double *out_truth,
                                  uintptr_t truth_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PROMOR_H */
