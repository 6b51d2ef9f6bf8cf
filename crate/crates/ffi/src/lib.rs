//! C ABI over the `nhqc` library.
//!
//! Objects are opaque handles created by `*_new`/`*_compute` functions and
//! released with the matching `*_free`. Every fallible call returns an
//! [`NhqcStatus`]; on failure the message is available from
//! [`nhqc_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nhqc::entanglement::{bipartition, steady_state_for, EvolutionConfig};
use nhqc::fit::{fit_scaling, FitMode};
use nhqc::lattice::{Alpha, ModelSpec, Variant};
use nhqc::spectral::{analyze, SpectralReport};
use nhqc::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NhqcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Numerical = 3,
    Io = 4,
    Panic = 5,
}

/// Fitting forms for [`nhqc_fit_scaling`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NhqcFitMode {
    /// `S = g L + s0`; coefficients `(g, s0)`.
    Linear = 0,
    /// `S = g ln L + s0`; coefficients `(g, s0)`.
    Log = 1,
    /// `S = g ln L + g' L + s0`; coefficients `(g, g', s0)`.
    Combined = 2,
}

/// Opaque model specification.
pub struct NhqcModel {
    spec: ModelSpec,
}

/// Opaque eigen-decomposition result.
pub struct NhqcSpectrum {
    report: SpectralReport,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NhqcSpectralSummary {
    pub mean_abs_im: f64,
    pub mean_ipr: f64,
    pub max_abs_im: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let text = CString::new(message.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(text));
}

fn status_of(err: &Error) -> NhqcStatus {
    match err.exit_code() {
        2 => NhqcStatus::InvalidArgument,
        3 => NhqcStatus::Numerical,
        _ => NhqcStatus::Io,
    }
}

/// Runs `body`, converting errors and panics into status codes.
fn guard(body: impl FnOnce() -> Result<(), NhqcStatusError>) -> NhqcStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => NhqcStatus::Ok,
        Ok(Err(NhqcStatusError(status, message))) => {
            set_last_error(message);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            NhqcStatus::Panic
        }
    }
}

struct NhqcStatusError(NhqcStatus, String);

impl From<Error> for NhqcStatusError {
    fn from(e: Error) -> Self {
        NhqcStatusError(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> NhqcStatusError {
    NhqcStatusError(NhqcStatus::NullPointer, format!("{what} is null"))
}

fn variant(model: u8) -> Result<Variant, NhqcStatusError> {
    Ok(Variant::from_index(model)?)
}

fn store<T>(out: *mut *mut T, value: T) {
    // SAFETY: callers have checked `out` for null.
    unsafe { *out = Box::into_raw(Box::new(value)) };
}

/// Creates a model with `α` set to the Fibonacci approximant of `l`.
/// `model` is 1 or 2.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn nhqc_model_new(model: u8, j: f64, v: f64, l: usize, out: *mut *mut NhqcModel) -> NhqcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let spec = ModelSpec::fibonacci(variant(model)?, j, v, l)?;
        store(out, NhqcModel { spec });
        Ok(())
    })
}

/// Creates a model with rational `α = p/q`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn nhqc_model_new_with_alpha(
    model: u8,
    j: f64,
    v: f64,
    alpha_p: u64,
    alpha_q: u64,
    l: usize,
    out: *mut *mut NhqcModel,
) -> NhqcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let alpha = Alpha::Rational { p: alpha_p, q: alpha_q };
        let spec = ModelSpec::with_alpha(variant(model)?, j, v, alpha, l)?;
        store(out, NhqcModel { spec });
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from `nhqc_model_new*` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nhqc_model_free(model: *mut NhqcModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nhqc_model_size(model: *const NhqcModel, out: *mut usize) -> NhqcStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = model.spec.l;
        Ok(())
    })
}

/// Diagonalizes the model Hamiltonian.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nhqc_spectrum_compute(model: *const NhqcModel, out: *mut *mut NhqcSpectrum) -> NhqcStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let report = analyze(&model.spec)?;
        store(out, NhqcSpectrum { report });
        Ok(())
    })
}

/// # Safety
/// `spectrum` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nhqc_spectrum_free(spectrum: *mut NhqcSpectrum) {
    if !spectrum.is_null() {
        drop(Box::from_raw(spectrum));
    }
}

/// Number of eigenvalues; 0 for a null handle.
///
/// # Safety
/// `spectrum` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nhqc_spectrum_len(spectrum: *const NhqcSpectrum) -> usize {
    spectrum.as_ref().map_or(0, |s| s.report.eigenvalues.len())
}

/// Eigenvalue `index` in ascending `(Re, Im)` order, with its IPR.
///
/// # Safety
/// `spectrum` must be a live handle; output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn nhqc_spectrum_eigenvalue(
    spectrum: *const NhqcSpectrum,
    index: usize,
    re: *mut f64,
    im: *mut f64,
    ipr: *mut f64,
) -> NhqcStatus {
    guard(|| {
        let s = spectrum.as_ref().ok_or_else(|| null("spectrum"))?;
        let (re, im, ipr) = match (re.as_mut(), im.as_mut(), ipr.as_mut()) {
            (Some(a), Some(b), Some(c)) => (a, b, c),
            _ => return Err(null("output")),
        };
        let n = s.report.eigenvalues.len();
        if index >= n {
            return Err(NhqcStatusError(
                NhqcStatus::InvalidArgument,
                format!("eigenvalue index {index} out of range 0..{n}"),
            ));
        }
        let e = s.report.eigenvalues[index];
        *re = e.re;
        *im = e.im;
        *ipr = s.report.ipr[index];
        Ok(())
    })
}

/// # Safety
/// `spectrum` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nhqc_spectrum_summary(spectrum: *const NhqcSpectrum, out: *mut NhqcSpectralSummary) -> NhqcStatus {
    guard(|| {
        let s = spectrum.as_ref().ok_or_else(|| null("spectrum"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let summary = s.report.summary();
        *out = NhqcSpectralSummary {
            mean_abs_im: summary.mean_abs_im,
            mean_ipr: summary.mean_ipr,
            max_abs_im: summary.max_abs_im,
        };
        Ok(())
    })
}

/// Time-averaged entropy of the first `subsystem` sites over `[T/2, T]`
/// after a quench from the charge-density-wave state. `subsystem = 0`
/// selects half the lattice.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nhqc_steady_state_entropy(
    model: *const NhqcModel,
    total_time: f64,
    subsystem: usize,
    out: *mut f64,
) -> NhqcStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let l = if subsystem == 0 {
            bipartition(model.spec.l)
        } else {
            subsystem
        };
        let config = EvolutionConfig::with_total_time(total_time);
        *out = steady_state_for(&model.spec, &config, l)?.value;
        Ok(())
    })
}

/// Least-squares fit of `ys` against sizes `xs`. Writes the coefficients
/// (2 or 3, see [`NhqcFitMode`]) into `coefficients`, which must hold
/// `capacity >= 3` values.
///
/// # Safety
/// `xs` and `ys` must point to `n` readable values, `coefficients` to
/// `capacity` writable values, `residual_rms` to one.
#[no_mangle]
pub unsafe extern "C" fn nhqc_fit_scaling(
    mode: NhqcFitMode,
    xs: *const f64,
    ys: *const f64,
    n: usize,
    coefficients: *mut f64,
    capacity: usize,
    residual_rms: *mut f64,
) -> NhqcStatus {
    guard(|| {
        if xs.is_null() || ys.is_null() || coefficients.is_null() || residual_rms.is_null() {
            return Err(null("array argument"));
        }
        if capacity < 3 {
            return Err(NhqcStatusError(
                NhqcStatus::InvalidArgument,
                format!("coefficient buffer holds {capacity} values, need 3"),
            ));
        }
        let xs = std::slice::from_raw_parts(xs, n);
        let ys = std::slice::from_raw_parts(ys, n);
        let points: Vec<(f64, f64)> = xs.iter().copied().zip(ys.iter().copied()).collect();
        let mode = match mode {
            NhqcFitMode::Linear => FitMode::Linear,
            NhqcFitMode::Log => FitMode::Log,
            NhqcFitMode::Combined => FitMode::Combined,
        };
        let fit = fit_scaling(&points, mode)?;
        let dest = std::slice::from_raw_parts_mut(coefficients, capacity);
        dest.fill(f64::NAN);
        dest[..fit.coefficients.len()].copy_from_slice(&fit.coefficients);
        *residual_rms = fit.residual_rms;
        Ok(())
    })
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn nhqc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn nhqc_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version string has an interior nul"),
    };
    VERSION.as_ptr()
}
