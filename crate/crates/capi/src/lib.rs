//! C interface: opaque model handles, integer status codes, caller-owned
//! buffers. Unwinding across the C boundary is undefined behavior, so every
//! entry point catches panics and reports them as [`PromorStatus::Internal`].
//! Failure details are kept per thread and read back with
//! [`promor_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;
use std::slice;

use ndarray::{Array1, Array2};
use promor::io::created_stamp;
use promor::model_doc::{load_model, save_model, Provenance};
use promor::ppca::{self, PpcaModel};
use promor::project::{self, DEFAULT_MAX_ITER, DEFAULT_TOL};
use promor::select::select_model;
use promor::synth::{self, SyntheticSpec};
use promor::Error;

/// Status code returned by every fallible function. Anything other than
/// `Ok` leaves a message readable via `promor_last_error`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PromorStatus {
    /// The call succeeded.
    Ok = 0,
    /// A pointer was NULL, a length did not match, or a value was out of
    /// its documented range.
    InvalidArgument = 1,
    /// A numerical routine failed to converge.
    ComputeFailed = 2,
    /// A file could not be read or written.
    Io = 3,
    /// A panic was caught at the boundary; this is a library bug.
    Internal = 4,
}

/// Projection rule applied to a trial vector.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PromorMethod {
    /// Noise-aware estimate: least-squares coefficients shrunk by the
    /// per-mode factors sigma2_w_i / (sigma2_w_i + sigma2_eps_T), with
    /// sigma2_eps_T determined by a fixed-point iteration on the residual.
    GaussianPrior = 0,
    /// Plain least squares onto the basis.
    L2 = 1,
}

/// Scalar outputs of a projection.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PromorProjectionInfo {
    /// Estimated trial-noise variance at the solution.
    pub sigma2_eps_t: f64,
    /// Fixed-point iterations performed; 0 for the least-squares method.
    pub iterations: usize,
    /// False when the iteration cap was reached before the tolerance.
    pub converged: bool,
}

/// Opaque trained model. Created by `promor_train`, `promor_select`, or
/// `promor_model_load`; released with `promor_model_free`. Handles are
/// immutable after creation, so sharing one across threads for reads and
/// projections is safe.
pub struct PromorModel {
    inner: PpcaModel,
    provenance: Provenance,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    // Interior NULs cannot come from our error types, but truncate rather
    // than lose the message entirely if one ever appears.
    let sanitized = message.split('\0').next().unwrap_or("").to_owned();
    let text = CString::new(sanitized).expect("NUL-free by construction");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(text));
}

fn clear_last_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

fn fail(status: PromorStatus, message: impl Into<String>) -> PromorStatus {
    set_last_error(message.into());
    status
}

fn fail_with(err: Error) -> PromorStatus {
    let status = match &err {
        Error::Io(_) | Error::Csv(_) => PromorStatus::Io,
        Error::EigenNoConvergence { .. } => PromorStatus::ComputeFailed,
        _ => PromorStatus::InvalidArgument,
    };
    set_last_error(err.to_string());
    status
}

/// Runs an entry point body with the panic fence in place. The body reports
/// its own failures through `fail`; only a caught panic maps to `Internal`.
fn guarded<F: FnOnce() -> PromorStatus>(body: F) -> PromorStatus {
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => fail(
            PromorStatus::Internal,
            "panic caught at the C boundary; please report this",
        ),
    }
}

unsafe fn str_arg<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, PromorStatus> {
    if ptr.is_null() {
        return Err(fail(PromorStatus::InvalidArgument, format!("{name} is NULL")));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| fail(PromorStatus::InvalidArgument, format!("{name} is not valid UTF-8")))
}

unsafe fn model_arg<'a>(model: *const PromorModel) -> Result<&'a PromorModel, PromorStatus> {
    model
        .as_ref()
        .ok_or_else(|| fail(PromorStatus::InvalidArgument, "model handle is NULL"))
}

unsafe fn matrix_arg(
    data: *const f64,
    n: usize,
    d: usize,
    name: &str,
) -> Result<Array2<f64>, PromorStatus> {
    if data.is_null() {
        return Err(fail(PromorStatus::InvalidArgument, format!("{name} is NULL")));
    }
    let len = n.checked_mul(d).ok_or_else(|| {
        fail(PromorStatus::InvalidArgument, format!("{name}: n * d overflows"))
    })?;
    if len == 0 {
        return Err(fail(
            PromorStatus::InvalidArgument,
            format!("{name}: n and d must be positive"),
        ));
    }
    let values = slice::from_raw_parts(data, len).to_vec();
    Array2::from_shape_vec((n, d), values)
        .map_err(|e| fail(PromorStatus::InvalidArgument, format!("{name}: {e}")))
}

/// Copies exactly `expected` values into `out`; the caller must pass
/// `len == expected` so silent truncation is impossible.
unsafe fn fill_out(
    out: *mut f64,
    len: usize,
    expected: usize,
    name: &str,
    values: impl Iterator<Item = f64>,
) -> Result<(), PromorStatus> {
    if out.is_null() {
        return Err(fail(PromorStatus::InvalidArgument, format!("{name} is NULL")));
    }
    if len != expected {
        return Err(fail(
            PromorStatus::InvalidArgument,
            format!("{name}: length {len} does not match required {expected}"),
        ));
    }
    let dst = slice::from_raw_parts_mut(out, len);
    for (slot, value) in dst.iter_mut().zip(values) {
        *slot = value;
    }
    Ok(())
}

unsafe fn store_model(
    out_model: *mut *mut PromorModel,
    model: PpcaModel,
    provenance: Provenance,
) -> PromorStatus {
    *out_model = Box::into_raw(Box::new(PromorModel { inner: model, provenance }));
    PromorStatus::Ok
}

fn fresh_provenance() -> Provenance {
    Provenance { seed: None, generator_spec: None, created: created_stamp() }
}

/// Library version as a static NUL-terminated string; never freed.
#[no_mangle]
pub extern "C" fn promor_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message from the most recent failing call on this thread, or NULL when
/// that call succeeded. The pointer stays valid until the next call on the
/// same thread; copy the string if it must outlive that.
#[no_mangle]
pub extern "C" fn promor_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Fits a model of order `m` to `n` observations of dimension `d`, laid out
/// row-major in `data` (observation index varies slowest). Writes a new
/// handle to `out_model` on success. Requires n >= 2 and 1 <= m <= d - 1.
///
/// # Safety
/// `data` must point to n * d readable doubles and `out_model` to a
/// writable pointer slot.
#[no_mangle]
pub unsafe extern "C" fn promor_train(
    data: *const f64,
    n: usize,
    d: usize,
    m: usize,
    out_model: *mut *mut PromorModel,
) -> PromorStatus {
    guarded(|| {
        if out_model.is_null() {
            return fail(PromorStatus::InvalidArgument, "out_model is NULL");
        }
        let matrix = match matrix_arg(data, n, d, "data") {
            Ok(v) => v,
            Err(status) => return status,
        };
        match ppca::fit(&matrix, m) {
            Ok(outcome) => store_model(out_model, outcome.model, fresh_provenance()),
            Err(e) => fail_with(e),
        }
    })
}

/// Like `promor_train`, but picks the model order by scanning orders
/// 1..=m_max with the information criterion and keeping the minimizer.
/// Pass `m_max = 0` to scan the full range allowed by the data. The chosen
/// order is written to `out_selected_m` when that pointer is non-NULL, and
/// is also available via `promor_model_order`.
///
/// # Safety
/// `data` must point to n * d readable doubles; `out_model` must be
/// writable; `out_selected_m` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn promor_select(
    data: *const f64,
    n: usize,
    d: usize,
    m_max: usize,
    out_model: *mut *mut PromorModel,
    out_selected_m: *mut usize,
) -> PromorStatus {
    guarded(|| {
        if out_model.is_null() {
            return fail(PromorStatus::InvalidArgument, "out_model is NULL");
        }
        let matrix = match matrix_arg(data, n, d, "data") {
            Ok(v) => v,
            Err(status) => return status,
        };
        let cap = if m_max == 0 { None } else { Some(m_max) };
        match select_model(&matrix, cap) {
            Ok((outcome, _table)) => {
                if !out_selected_m.is_null() {
                    *out_selected_m = outcome.model.m;
                }
                store_model(out_model, outcome.model, fresh_provenance())
            }
            Err(e) => fail_with(e),
        }
    })
}

/// Loads a model document written by `promor_model_save` (or the CLI) and
/// writes a new handle to `out_model`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out_model` writable.
#[no_mangle]
pub unsafe extern "C" fn promor_model_load(
    path: *const c_char,
    out_model: *mut *mut PromorModel,
) -> PromorStatus {
    guarded(|| {
        if out_model.is_null() {
            return fail(PromorStatus::InvalidArgument, "out_model is NULL");
        }
        let path = match str_arg(path, "path") {
            Ok(s) => PathBuf::from(s),
            Err(status) => return status,
        };
        match load_model(&path) {
            Ok((model, provenance)) => store_model(out_model, model, provenance),
            Err(e) => fail_with(e),
        }
    })
}

/// Writes the model document for `model` to `path`, creating or replacing
/// the file atomically.
///
/// # Safety
/// `model` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn promor_model_save(
    model: *const PromorModel,
    path: *const c_char,
) -> PromorStatus {
    guarded(|| {
        let handle = match model_arg(model) {
            Ok(h) => h,
            Err(status) => return status,
        };
        let path = match str_arg(path, "path") {
            Ok(s) => PathBuf::from(s),
            Err(status) => return status,
        };
        match save_model(&path, &handle.inner, handle.provenance.clone()) {
            Ok(()) => PromorStatus::Ok,
            Err(e) => fail_with(e),
        }
    })
}

/// Releases a handle. NULL is accepted and ignored. Each handle must be
/// freed exactly once.
///
/// # Safety
/// `model` must be NULL or a pointer returned by this library that has not
/// been freed yet.
#[no_mangle]
pub unsafe extern "C" fn promor_model_free(model: *mut PromorModel) {
    if model.is_null() {
        return;
    }
    // Dropping plain owned arrays cannot panic; the fence is belt and
    // braces for the boundary rule.
    let _ = catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(model))));
}

/// State dimension d, or 0 when the handle is NULL.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn promor_model_dim(model: *const PromorModel) -> usize {
    model.as_ref().map_or(0, |h| h.inner.d)
}

/// Retained order m, or 0 when the handle is NULL.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn promor_model_order(model: *const PromorModel) -> usize {
    model.as_ref().map_or(0, |h| h.inner.m)
}

/// Number of training realizations, or 0 when the handle is NULL.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn promor_model_sample_count(model: *const PromorModel) -> usize {
    model.as_ref().map_or(0, |h| h.inner.n)
}

/// Estimated training-noise variance, or NaN when the handle is NULL.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn promor_model_noise_variance(model: *const PromorModel) -> f64 {
    model.as_ref().map_or(f64::NAN, |h| h.inner.sigma2_eps)
}

/// Maximized training log-likelihood, or NaN when the handle is NULL. May
/// be +infinity for degenerate noise-free fits.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn promor_model_log_likelihood(model: *const PromorModel) -> f64 {
    model.as_ref().map_or(f64::NAN, |h| h.inner.log_likelihood)
}

/// Number of stored sample-covariance eigenvalues, or 0 when the handle is
/// NULL. Sizes the buffer for `promor_model_eigenvalues`.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn promor_model_eigenvalue_count(model: *const PromorModel) -> usize {
    model.as_ref().map_or(0, |h| h.inner.eigenvalues.len())
}

/// Copies the training mean (length d) into `out`.
///
/// # Safety
/// `model` must be a live handle and `out` writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn promor_model_mean(
    model: *const PromorModel,
    out: *mut f64,
    len: usize,
) -> PromorStatus {
    guarded(|| {
        let handle = match model_arg(model) {
            Ok(h) => h,
            Err(status) => return status,
        };
        let mu = &handle.inner.mu;
        match fill_out(out, len, mu.len(), "out", mu.iter().copied()) {
            Ok(()) => PromorStatus::Ok,
            Err(status) => status,
        }
    })
}

/// Copies the basis matrix (d rows, m columns, row-major) into `out`;
/// `len` must equal d * m.
///
/// # Safety
/// `model` must be a live handle and `out` writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn promor_model_basis(
    model: *const PromorModel,
    out: *mut f64,
    len: usize,
) -> PromorStatus {
    guarded(|| {
        let handle = match model_arg(model) {
            Ok(h) => h,
            Err(status) => return status,
        };
        let phi = &handle.inner.phi;
        let expected = phi.nrows() * phi.ncols();
        // Array2::iter walks in logical row-major order whatever the layout.
        match fill_out(out, len, expected, "out", phi.iter().copied()) {
            Ok(()) => PromorStatus::Ok,
            Err(status) => status,
        }
    })
}

/// Copies the latent variances (length m, non-increasing) into `out`.
///
/// # Safety
/// `model` must be a live handle and `out` writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn promor_model_latent_variances(
    model: *const PromorModel,
    out: *mut f64,
    len: usize,
) -> PromorStatus {
    guarded(|| {
        let handle = match model_arg(model) {
            Ok(h) => h,
            Err(status) => return status,
        };
        let sw = &handle.inner.sigma2_w;
        match fill_out(out, len, sw.len(), "out", sw.iter().copied()) {
            Ok(()) => PromorStatus::Ok,
            Err(status) => status,
        }
    })
}

/// Copies the stored sample-covariance eigenvalues (descending) into `out`;
/// size the buffer with `promor_model_eigenvalue_count`.
///
/// # Safety
/// `model` must be a live handle and `out` writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn promor_model_eigenvalues(
    model: *const PromorModel,
    out: *mut f64,
    len: usize,
) -> PromorStatus {
    guarded(|| {
        let handle = match model_arg(model) {
            Ok(h) => h,
            Err(status) => return status,
        };
        let ev = &handle.inner.eigenvalues;
        match fill_out(out, len, ev.len(), "out", ev.iter().copied()) {
            Ok(()) => PromorStatus::Ok,
            Err(status) => status,
        }
    })
}

/// Projects one trial vector `y` (length d) onto the model and writes the
/// latent coefficients (length m) to `out_w`. Pass `tol <= 0` or
/// `max_iter == 0` to use the library defaults; both are ignored by the
/// least-squares method. `out_reconstruction` (length d) and `out_info` are
/// optional; pass NULL to skip them.
///
/// # Safety
/// Pointers must be NULL or valid for their documented lengths; `method`
/// must be one of the declared enum values.
#[no_mangle]
pub unsafe extern "C" fn promor_project(
    model: *const PromorModel,
    y: *const f64,
    y_len: usize,
    method: PromorMethod,
    tol: f64,
    max_iter: usize,
    out_w: *mut f64,
    w_len: usize,
    out_reconstruction: *mut f64,
    reconstruction_len: usize,
    out_info: *mut PromorProjectionInfo,
) -> PromorStatus {
    guarded(|| {
        let handle = match model_arg(model) {
            Ok(h) => h,
            Err(status) => return status,
        };
        if y.is_null() {
            return fail(PromorStatus::InvalidArgument, "y is NULL");
        }
        if y_len != handle.inner.d {
            return fail(
                PromorStatus::InvalidArgument,
                format!("y: length {y_len} does not match model dimension {}", handle.inner.d),
            );
        }
        let trial = Array1::from(slice::from_raw_parts(y, y_len).to_vec());
        let tol = if tol <= 0.0 { DEFAULT_TOL } else { tol };
        let max_iter = if max_iter == 0 { DEFAULT_MAX_ITER } else { max_iter };
        let result = match method {
            PromorMethod::GaussianPrior => {
                project::gaussian_project(&handle.inner, &trial, tol, max_iter)
            }
            PromorMethod::L2 => project::l2_project(&handle.inner, &trial),
        };
        let result = match result {
            Ok(r) => r,
            Err(e) => return fail_with(e),
        };
        if let Err(status) =
            fill_out(out_w, w_len, result.w_map.len(), "out_w", result.w_map.iter().copied())
        {
            return status;
        }
        if !out_reconstruction.is_null() {
            if let Err(status) = fill_out(
                out_reconstruction,
                reconstruction_len,
                result.reconstruction.len(),
                "out_reconstruction",
                result.reconstruction.iter().copied(),
            ) {
                return status;
            }
        }
        if !out_info.is_null() {
            *out_info = PromorProjectionInfo {
                sigma2_eps_t: result.sigma2_eps_t,
                iterations: result.iterations,
                converged: result.converged,
            };
        }
        PromorStatus::Ok
    })
}

/// Maps latent coefficients `w` (length m) back to state space, writing
/// basis * w + mean (length d) to `out_y`.
///
/// # Safety
/// `model` must be a live handle; `w` must hold `w_len` readable doubles
/// and `out_y` room for `y_len`.
#[no_mangle]
pub unsafe extern "C" fn promor_reconstruct(
    model: *const PromorModel,
    w: *const f64,
    w_len: usize,
    out_y: *mut f64,
    y_len: usize,
) -> PromorStatus {
    guarded(|| {
        let handle = match model_arg(model) {
            Ok(h) => h,
            Err(status) => return status,
        };
        if w.is_null() {
            return fail(PromorStatus::InvalidArgument, "w is NULL");
        }
        if w_len != handle.inner.m {
            return fail(
                PromorStatus::InvalidArgument,
                format!("w: length {w_len} does not match model order {}", handle.inner.m),
            );
        }
        let coeffs = Array1::from(slice::from_raw_parts(w, w_len).to_vec());
        let y = match handle.inner.reconstruct(&coeffs) {
            Ok(v) => v,
            Err(e) => return fail_with(e),
        };
        match fill_out(out_y, y_len, y.len(), "out_y", y.iter().copied()) {
            Ok(()) => PromorStatus::Ok,
            Err(status) => status,
        }
    })
}

/// Writes the m per-mode shrinkage factors sigma2_w_i / (sigma2_w_i +
/// sigma2_eps_t) applied by the Gaussian-prior method at a given trial
/// noise level.
///
/// # Safety
/// `model` must be a live handle and `out` writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn promor_shrinkage_factors(
    model: *const PromorModel,
    sigma2_eps_t: f64,
    out: *mut f64,
    len: usize,
) -> PromorStatus {
    guarded(|| {
        let handle = match model_arg(model) {
            Ok(h) => h,
            Err(status) => return status,
        };
        if !(sigma2_eps_t.is_finite() && sigma2_eps_t >= 0.0) {
            return fail(
                PromorStatus::InvalidArgument,
                format!("sigma2_eps_t must be finite and non-negative, got {sigma2_eps_t}"),
            );
        }
        let factors = project::shrinkage_factors(&handle.inner, sigma2_eps_t);
        match fill_out(out, len, factors.len(), "out", factors.iter().copied()) {
            Ok(()) => PromorStatus::Ok,
            Err(status) => status,
        }
    })
}

/// Parses a generator spec (JSON, same schema as the CLI) and reports the
/// ensemble shape it will produce, so buffers for `promor_generate` can be
/// sized: both data and truth hold n * d doubles.
///
/// # Safety
/// `spec_json` must be a NUL-terminated string; `out_n` and `out_d` must
/// be writable.
#[no_mangle]
pub unsafe extern "C" fn promor_spec_dims(
    spec_json: *const c_char,
    out_n: *mut usize,
    out_d: *mut usize,
) -> PromorStatus {
    guarded(|| {
        if out_n.is_null() || out_d.is_null() {
            return fail(PromorStatus::InvalidArgument, "out_n and out_d must not be NULL");
        }
        let text = match str_arg(spec_json, "spec_json") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let spec: SyntheticSpec = match serde_json::from_str(text) {
            Ok(s) => s,
            Err(e) => return fail_with(Error::InvalidSpec(e.to_string())),
        };
        if let Err(e) = spec.validate() {
            return fail_with(e);
        }
        *out_n = spec.n;
        *out_d = spec.d;
        PromorStatus::Ok
    })
}

/// Draws the synthetic ensemble described by a generator spec (JSON).
/// `out_data` receives the n * d noisy realizations, row-major; the
/// optional `out_truth` receives the noise-free counterparts. Output is a
/// pure function of the spec, including its seed.
///
/// # Safety
/// `spec_json` must be a NUL-terminated string; `out_data` must be
/// writable for `data_len` doubles; `out_truth` may be NULL, otherwise
/// writable for `truth_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn promor_generate(
    spec_json: *const c_char,
    out_data: *mut f64,
    data_len: usize,
    out_truth: *mut f64,
    truth_len: usize,
) -> PromorStatus {
    guarded(|| {
        let text = match str_arg(spec_json, "spec_json") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let spec: SyntheticSpec = match serde_json::from_str(text) {
            Ok(s) => s,
            Err(e) => return fail_with(Error::InvalidSpec(e.to_string())),
        };
        let ensemble = match synth::generate(&spec) {
            Ok(e) => e,
            Err(e) => return fail_with(e),
        };
        let total = ensemble.n() * ensemble.d();
        if let Err(status) = fill_out(
            out_data,
            data_len,
            total,
            "out_data",
            ensemble.realizations().iter().copied(),
        ) {
            return status;
        }
        if !out_truth.is_null() {
            let truth = match ensemble.truth() {
                Some(t) => t,
                None => {
                    return fail(
                        PromorStatus::Internal,
                        "generator produced no truth ensemble",
                    )
                }
            };
            if let Err(status) =
                fill_out(out_truth, truth_len, total, "out_truth", truth.iter().copied())
            {
                return status;
            }
        }
        PromorStatus::Ok
    })
}
