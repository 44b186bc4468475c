//! C ABI over the `tbc-core` solvers.
//!
//! A run is created from the same TOML text accepted by the `tbc` command
//! line tool and is owned by C through an opaque [`TbcHandle`]. Every fallible
//! function returns a [`TbcStatus`]; on failure a description can be fetched
//! with [`tbc_last_error`]. Panics never cross the boundary: they are caught
//! and reported as [`TbcStatus::Internal`].
//!
//! Handles are not thread-safe. Distinct handles may be used from distinct
//! threads.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use tbc_core::exact::ProfileSpec;
use tbc_core::harness::{project, relative_error, RunConfig, Solver};
use tbc_core::rational::{cq_weights, Stepper};
use tbc_core::spectral::Discretization;
use tbc_core::{Error, Evolution};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TbcStatus {
    Ok = 0,
    /// A required pointer was null or a string was not valid UTF-8.
    InvalidArgument = 1,
    /// The configuration was rejected.
    Config = 2,
    /// Non-finite values or a failed numerical kernel.
    Numerical = 3,
    /// A linear system could not be factored.
    Singular = 4,
    /// A caller buffer has the wrong size.
    Dimension = 5,
    /// File system failure.
    Io = 6,
    /// Unexpected internal failure.
    Internal = 7,
}

/// Time-stepping method selector for [`tbc_cq_weights`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TbcStepper {
    Bdf1 = 0,
    Bdf2 = 1,
    Tr = 2,
}

impl From<TbcStepper> for Stepper {
    fn from(s: TbcStepper) -> Self {
        match s {
            TbcStepper::Bdf1 => Stepper::Bdf1,
            TbcStepper::Bdf2 => Stepper::Bdf2,
            TbcStepper::Tr => Stepper::Tr,
        }
    }
}

/// A configured run: solver, discretization and exact reference solution.
pub struct TbcHandle {
    solver: Solver,
    disc: Discretization,
    spec: ProfileSpec,
    norm0: f64,
    label: CString,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(TbcStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Config(_) | Error::SizeGuard(_) => TbcStatus::Config,
            Error::Singular { .. } => TbcStatus::Singular,
            Error::Dimension(_) => TbcStatus::Dimension,
            Error::Io(_) => TbcStatus::Io,
            Error::History { .. } => TbcStatus::Internal,
            Error::Quadrature { .. } | Error::Pole { .. } | Error::Eigen(_) | Error::Numerical(_) => {
                TbcStatus::Numerical
            }
        };
        Failure(status, e.to_string())
    }
}

fn invalid(what: &str) -> Failure {
    Failure(TbcStatus::InvalidArgument, what.to_string())
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> TbcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TbcStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("panic inside the solver library".into());
            TbcStatus::Internal
        }
    }
}

fn handle_ref<'a>(h: *const TbcHandle) -> Result<&'a TbcHandle, Failure> {
    // SAFETY: callers pass a pointer obtained from `tbc_handle_new` or null.
    unsafe { h.as_ref() }.ok_or_else(|| invalid("null handle"))
}

fn handle_mut<'a>(h: *mut TbcHandle) -> Result<&'a mut TbcHandle, Failure> {
    // SAFETY: callers pass a pointer obtained from `tbc_handle_new` or null.
    unsafe { h.as_mut() }.ok_or_else(|| invalid("null handle"))
}

fn write_out<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(invalid("null output pointer"));
    }
    // SAFETY: non-null and, by contract, valid for a write of `T`.
    unsafe { out.write(value) };
    Ok(())
}

/// Creates a run from TOML text (null or empty text selects the defaults)
/// and stores the new handle in `*out`. The initial profile is projected on
/// the grid and the boundary operator is factored.
///
/// # Safety
/// `config` must be null or a NUL-terminated string; `out` must be valid for
/// one pointer write.
#[no_mangle]
pub unsafe extern "C" fn tbc_handle_new(config: *const c_char, out: *mut *mut TbcHandle) -> TbcStatus {
    guard(|| {
        if out.is_null() {
            return Err(invalid("null output pointer"));
        }
        let text = if config.is_null() {
            ""
        } else {
            // SAFETY: non-null and NUL-terminated by contract.
            unsafe { CStr::from_ptr(config) }
                .to_str()
                .map_err(|_| invalid("config is not valid UTF-8"))?
        };
        let cfg = RunConfig::from_toml(text, &[])?;
        let disc = cfg.discretization()?;
        let spec = cfg.profile_spec();
        let exact0 = disc.sample(|x1, x2| spec.eval(x1, x2, 0.0));
        let norm0 = disc.nodal_l2(&exact0);
        let u0 = project(&disc, &spec, 0.0)?;
        let solver = Solver::new(&cfg, &disc, u0)?;
        let label = CString::new(cfg.label()).unwrap_or_default();
        let handle = Box::new(TbcHandle {
            solver,
            disc,
            spec,
            norm0,
            label,
        });
        write_out(out, Box::into_raw(handle))
    })
}

/// Releases a handle. Null is accepted and ignored.
///
/// # Safety
/// `h` must be null or a handle from [`tbc_handle_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tbc_handle_free(h: *mut TbcHandle) {
    if !h.is_null() {
        // SAFETY: ownership returns to Rust exactly once by contract.
        drop(unsafe { Box::from_raw(h) });
    }
}

/// Advances the run by `n` time steps.
///
/// # Safety
/// `h` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn tbc_handle_step(h: *mut TbcHandle, n: usize) -> TbcStatus {
    guard(|| {
        let h = handle_mut(h)?;
        for _ in 0..n {
            h.solver.step()?;
        }
        Ok(())
    })
}

/// Number of completed steps.
///
/// # Safety
/// `h` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn tbc_handle_steps(h: *const TbcHandle, out: *mut usize) -> TbcStatus {
    guard(|| write_out(out, handle_ref(h)?.solver.steps()))
}

/// Current time.
///
/// # Safety
/// `h` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn tbc_handle_time(h: *const TbcHandle, out: *mut f64) -> TbcStatus {
    guard(|| write_out(out, handle_ref(h)?.solver.time()))
}

/// Relative L2 error of the current field against the exact solution.
///
/// # Safety
/// `h` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn tbc_handle_relative_error(h: *const TbcHandle, out: *mut f64) -> TbcStatus {
    guard(|| {
        let h = handle_ref(h)?;
        let t = h.solver.time();
        let exact = h.disc.sample(|x1, x2| h.spec.eval(x1, x2, t));
        let num = h.disc.nodal_values(h.solver.field());
        write_out(out, relative_error(&h.disc, &exact, &num, h.norm0))
    })
}

/// Number of complex scalars of time-dependent boundary state.
///
/// # Safety
/// `h` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn tbc_handle_state_size(h: *const TbcHandle, out: *mut usize) -> TbcStatus {
    guard(|| write_out(out, handle_ref(h)?.solver.state_size()))
}

/// Shape `(N1 + 1, N2 + 1)` of the coefficient matrix.
///
/// # Safety
/// `h` must be a live handle; `rows` and `cols` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn tbc_handle_field_shape(
    h: *const TbcHandle,
    rows: *mut usize,
    cols: *mut usize,
) -> TbcStatus {
    guard(|| {
        let f = handle_ref(h)?.solver.field();
        write_out(rows, f.nrows())?;
        write_out(cols, f.ncols())
    })
}

/// Copies the Lobatto coefficients, column-major, into `re` and `im`, each
/// of length `len = rows * cols`.
///
/// # Safety
/// `h` must be a live handle; `re` and `im` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn tbc_handle_field(h: *const TbcHandle, re: *mut f64, im: *mut f64, len: usize) -> TbcStatus {
    guard(|| {
        let f = handle_ref(h)?.solver.field();
        if re.is_null() || im.is_null() {
            return Err(invalid("null output buffer"));
        }
        if len != f.len() {
            return Err(Failure(
                TbcStatus::Dimension,
                format!("buffer length {len}, field has {} entries", f.len()),
            ));
        }
        // SAFETY: both buffers hold `len` doubles by contract.
        let (re, im) = unsafe { (std::slice::from_raw_parts_mut(re, len), std::slice::from_raw_parts_mut(im, len)) };
        for ((r, i), v) in re.iter_mut().zip(im.iter_mut()).zip(f.iter()) {
            *r = v.re;
            *i = v.im;
        }
        Ok(())
    })
}

/// Variant label such as `NP30-TR`, owned by the handle.
///
/// # Safety
/// `h` must be null or a live handle; the string lives as long as the handle.
#[no_mangle]
pub unsafe extern "C" fn tbc_handle_label(h: *const TbcHandle) -> *const c_char {
    // SAFETY: null or a live handle by contract.
    unsafe { h.as_ref() }.map_or(ptr::null(), |h| h.label.as_ptr())
}

/// First `n` convolution-quadrature weights of `stepper` for order `nu`
/// (`0.5` or `-0.5`), written to `out`.
///
/// # Safety
/// `out` must be valid for `n` writes.
#[no_mangle]
pub unsafe extern "C" fn tbc_cq_weights(stepper: TbcStepper, nu: f64, n: usize, dt: f64, out: *mut f64) -> TbcStatus {
    guard(|| {
        if out.is_null() {
            return Err(invalid("null output buffer"));
        }
        let w = cq_weights(stepper.into(), nu, n, dt)?;
        // SAFETY: `out` holds `n` doubles by contract.
        unsafe { std::slice::from_raw_parts_mut(out, n) }.copy_from_slice(&w.omega);
        Ok(())
    })
}

/// Copies the message of the last failure on this thread into `buf`
/// (truncated, always NUL-terminated when `len > 0`) and returns the length
/// needed including the terminator, or 0 if there is no message.
///
/// # Safety
/// `buf` must be null or valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn tbc_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else {
            return 0;
        };
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len);
            // SAFETY: `buf` holds `len >= n` bytes by contract.
            unsafe {
                ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
                *buf.add(n - 1) = 0;
            }
        }
        bytes.len()
    })
}

/// Static name of a status code.
#[no_mangle]
pub extern "C" fn tbc_status_name(status: TbcStatus) -> *const c_char {
    let s: &'static CStr = match status {
        TbcStatus::Ok => c"ok",
        TbcStatus::InvalidArgument => c"invalid argument",
        TbcStatus::Config => c"configuration error",
        TbcStatus::Numerical => c"numerical failure",
        TbcStatus::Singular => c"singular system",
        TbcStatus::Dimension => c"dimension mismatch",
        TbcStatus::Io => c"i/o failure",
        TbcStatus::Internal => c"internal error",
    };
    s.as_ptr()
}

/// Library version.
#[no_mangle]
pub extern "C" fn tbc_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => c"unknown",
    };
    VERSION.as_ptr()
}
