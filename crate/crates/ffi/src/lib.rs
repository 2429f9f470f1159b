//! C ABI for `gamma-dpp`.
//!
//! Objects are opaque handles created by `*_new` functions and released with the
//! matching `*_free`. Every fallible call returns a [`GdppStatus`]; on failure
//! [`gdpp_last_error`] describes the cause for the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use gamma_dpp::finite_dpp::{expect_multiplicative, KernelMatrix, Sampler, Window};
use gamma_dpp::gamma_kernel::{c_constant, make_params, AdmissibleParams, GammaKernel, LatticePoint};
use gamma_dpp::palm::{hole_kernel, reduced_palm_kernel};
use gamma_dpp::specfun::Complex;
use gamma_dpp::Error;
use nalgebra::DMatrix;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GdppStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NotAdmissible = 3,
    Numerical = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

/// Admissible parameter pair `(z, z')`.
pub struct GdppParams(AdmissibleParams);

/// Finite kernel matrix on a window of lattice sites `x = k + ½`.
pub struct GdppKernelMatrix(KernelMatrix);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> GdppStatus {
    match e {
        Error::NotAdmissible(_) => GdppStatus::NotAdmissible,
        Error::Dimension(_)
        | Error::DuplicatePoint(_)
        | Error::SubsetViolation(_)
        | Error::WindowTooLarge { .. }
        | Error::NonPositiveWeight { .. }
        | Error::EvaluatedAtP
        | Error::ZeroDensityAtP(_)
        | Error::FullDensityAtP(_) => GdppStatus::InvalidArgument,
        _ => GdppStatus::Numerical,
    }
}

fn guard<F: FnOnce() -> Result<(), (GdppStatus, String)>>(f: F) -> GdppStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            GdppStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            GdppStatus::Panic
        }
    }
}

fn lift<T>(r: gamma_dpp::Result<T>) -> Result<T, (GdppStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (GdppStatus, String) {
    (GdppStatus::NullPointer, format!("{what} is null"))
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn gdpp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Creates parameters `(z, z')`; fails with `NotAdmissible` outside the admissible set.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn gdpp_params_new(
    z_re: f64,
    z_im: f64,
    zp_re: f64,
    zp_im: f64,
    out: *mut *mut GdppParams,
) -> GdppStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let p = lift(make_params(Complex::new(z_re, z_im), Complex::new(zp_re, zp_im)))?;
        *out = Box::into_raw(Box::new(GdppParams(p)));
        Ok(())
    })
}

/// # Safety
/// `p` must come from [`gdpp_params_new`] and not have been freed; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn gdpp_params_free(p: *mut GdppParams) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// `K(x, y)` for `x = kx + ½`, `y = ky + ½`.
///
/// # Safety
/// `p` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gdpp_kernel_entry(p: *const GdppParams, kx: i64, ky: i64, out: *mut f64) -> GdppStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("params"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = lift(GammaKernel::new(p.0).entry(LatticePoint(kx), LatticePoint(ky)))?;
        Ok(())
    })
}

/// Density `ρ₁(x) = K(x, x)` at `x = k + ½`.
///
/// # Safety
/// `p` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gdpp_rho1(p: *const GdppParams, k: i64, out: *mut f64) -> GdppStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("params"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = lift(GammaKernel::new(p.0).rho1(LatticePoint(k)))?;
        Ok(())
    })
}

/// The constant `C(z, z')`.
///
/// # Safety
/// `p` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gdpp_c_constant(p: *const GdppParams, out: *mut f64) -> GdppStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("params"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = c_constant(&p.0);
        Ok(())
    })
}

fn boxed(m: KernelMatrix) -> *mut GdppKernelMatrix {
    Box::into_raw(Box::new(GdppKernelMatrix(m)))
}

/// Gamma kernel truncated to `k ∈ [−radius, radius)`.
///
/// # Safety
/// `p` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gdpp_kernel_matrix_new(
    p: *const GdppParams,
    radius: usize,
    out: *mut *mut GdppKernelMatrix,
) -> GdppStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("params"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        if radius == 0 {
            return Err((GdppStatus::InvalidArgument, "radius must be positive".into()));
        }
        *out = boxed(lift(GammaKernel::new(p.0).truncate(&Window::symmetric(radius)))?);
        Ok(())
    })
}

/// Symmetric kernel from `n × n` row-major entries on sites `k = 0..n`; the
/// spectrum must lie in `[0, 1]`.
///
/// # Safety
/// `entries` must point to `n * n` readable doubles and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn gdpp_kernel_matrix_from_entries(
    n: usize,
    entries: *const f64,
    out: *mut *mut GdppKernelMatrix,
) -> GdppStatus {
    guard(|| {
        if entries.is_null() {
            return Err(null("entries"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        if n == 0 {
            return Err((GdppStatus::InvalidArgument, "n must be positive".into()));
        }
        let data = std::slice::from_raw_parts(entries, n * n);
        let m = lift(KernelMatrix::new(Window::labels(n), DMatrix::from_row_slice(n, n, data)))?;
        *out = boxed(m);
        Ok(())
    })
}

/// Number of sites, or 0 for a null handle.
///
/// # Safety
/// `m` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn gdpp_kernel_matrix_dim(m: *const GdppKernelMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.0.dim())
}

/// Copies the row-major entries into `buf` (capacity `len`, at least `dim²`).
///
/// # Safety
/// `m` must be a live handle and `buf` writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn gdpp_kernel_matrix_copy(m: *const GdppKernelMatrix, buf: *mut f64, len: usize) -> GdppStatus {
    guard(|| {
        let m = m.as_ref().ok_or_else(|| null("matrix"))?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let n = m.0.dim();
        if len < n * n {
            return Err((GdppStatus::BufferTooSmall, format!("need {} doubles, got {len}", n * n)));
        }
        let out = std::slice::from_raw_parts_mut(buf, n * n);
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = m.0.matrix()[(i, j)];
            }
        }
        Ok(())
    })
}

/// Copies the site labels `k` (site `x = k + ½`) into `buf` (capacity `len`, at least `dim`).
///
/// # Safety
/// `m` must be a live handle and `buf` writable for `len` integers.
#[no_mangle]
pub unsafe extern "C" fn gdpp_kernel_matrix_sites(m: *const GdppKernelMatrix, buf: *mut i64, len: usize) -> GdppStatus {
    guard(|| {
        let m = m.as_ref().ok_or_else(|| null("matrix"))?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let sites = m.0.window().sites();
        if len < sites.len() {
            return Err((GdppStatus::BufferTooSmall, format!("need {} entries, got {len}", sites.len())));
        }
        for (i, s) in sites.iter().enumerate() {
            *buf.add(i) = s.0;
        }
        Ok(())
    })
}

unsafe fn conditioned(
    m: *const GdppKernelMatrix,
    k: i64,
    out: *mut *mut GdppKernelMatrix,
    f: fn(&KernelMatrix, LatticePoint) -> gamma_dpp::Result<KernelMatrix>,
) -> GdppStatus {
    guard(|| {
        let m = m.as_ref().ok_or_else(|| null("matrix"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = boxed(lift(f(&m.0, LatticePoint(k)))?);
        Ok(())
    })
}

/// Reduced Palm kernel at site `k` (a particle at `k + ½`), on the window without that site.
///
/// # Safety
/// `m` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gdpp_kernel_matrix_reduced_palm(
    m: *const GdppKernelMatrix,
    k: i64,
    out: *mut *mut GdppKernelMatrix,
) -> GdppStatus {
    conditioned(m, k, out, reduced_palm_kernel)
}

/// Kernel conditioned on a hole at site `k`, on the window without that site.
///
/// # Safety
/// `m` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gdpp_kernel_matrix_hole(
    m: *const GdppKernelMatrix,
    k: i64,
    out: *mut *mut GdppKernelMatrix,
) -> GdppStatus {
    conditioned(m, k, out, hole_kernel)
}

/// # Safety
/// `m` must come from this library and not have been freed; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn gdpp_kernel_matrix_free(m: *mut GdppKernelMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Draw number `index` of the stream `seed`; writes occupied site labels to
/// `sites` (capacity `cap`) and their number to `count`.
///
/// # Safety
/// `m` must be a live handle, `sites` writable for `cap` integers, `count` writable.
#[no_mangle]
pub unsafe extern "C" fn gdpp_sample(
    m: *const GdppKernelMatrix,
    seed: u64,
    index: u64,
    sites: *mut i64,
    cap: usize,
    count: *mut usize,
) -> GdppStatus {
    guard(|| {
        let m = m.as_ref().ok_or_else(|| null("matrix"))?;
        let count = count.as_mut().ok_or_else(|| null("count"))?;
        let omega = lift(Sampler::new(&m.0))?.sample(seed, index);
        *count = omega.len();
        if omega.len() > cap {
            return Err((GdppStatus::BufferTooSmall, format!("need {} entries, got {cap}", omega.len())));
        }
        if !omega.is_empty() && sites.is_null() {
            return Err(null("sites"));
        }
        for (i, x) in omega.occupied().iter().enumerate() {
            *sites.add(i) = x.0;
        }
        Ok(())
    })
}

/// `E[Π_{x∈ω} a(x)] = det(1 + (a−1)K)` with `a` given per window site (length `dim`).
///
/// # Safety
/// `m` must be a live handle, `a` readable for `len` doubles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gdpp_expect_multiplicative(
    m: *const GdppKernelMatrix,
    a: *const f64,
    len: usize,
    out: *mut f64,
) -> GdppStatus {
    guard(|| {
        let m = m.as_ref().ok_or_else(|| null("matrix"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        if a.is_null() {
            return Err(null("a"));
        }
        if len != m.0.dim() {
            return Err((GdppStatus::InvalidArgument, format!("{len} weights for {} sites", m.0.dim())));
        }
        let w = std::slice::from_raw_parts(a, len);
        let window = m.0.window();
        *out = expect_multiplicative(&m.0, |x| w[window.index_of(x).expect("site of window")]);
        Ok(())
    })
}
