//! C ABI for the eaptop optimizer.
//!
//! Handles are opaque pointers created by `eap_*_new`/`eap_run` and released
//! with the matching `*_free`. Every fallible call returns an [`EapStatus`];
//! the message of the most recent failure on the calling thread is available
//! from [`eap_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use eaptop::driver::{emit_outputs, run, Direction, ProblemConfig, RunOptions, RunOutcome, StopReason};
use eaptop::Error;

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EapStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    InvalidParameter = 4,
    Mesh = 5,
    NonConvergence = 6,
    LinearSolver = 7,
    Io = 8,
    OutOfRange = 9,
    Panic = 10,
}

/// Opaque run configuration.
pub struct EapConfig {
    inner: ProblemConfig,
}

/// Opaque result of a finished optimization run.
pub struct EapRun {
    outcome: RunOutcome,
    phi_p: f64,
}

/// Final values of a run.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EapSummary {
    /// 1 when stopped by the convergence rule, 0 at the iteration cap.
    pub converged: i32,
    pub iterations: usize,
    /// Output port displacement, mm.
    pub g0: f64,
    pub g1: f64,
    pub g2: f64,
    pub v1: f64,
    pub v2: f64,
}

/// One row of the iteration history.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EapHistoryRow {
    pub iteration: usize,
    pub g0: f64,
    pub g0_hat: f64,
    pub g0_bar: f64,
    pub g1: f64,
    pub g2: f64,
    pub beta: f64,
    pub alpha: f64,
    pub a_d: f64,
    pub newton_iters: usize,
    pub wall_time_s: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).ok());
}

fn status_of(e: &Error) -> EapStatus {
    match e {
        Error::Config(_) => EapStatus::Config,
        Error::InvalidParameter(_) | Error::DimensionMismatch { .. } | Error::ConflictingConstraint { .. } => {
            EapStatus::InvalidParameter
        }
        Error::InvalidMeshSpec(_)
        | Error::DegenerateElement { .. }
        | Error::EmptySelection(_)
        | Error::DuplicateBoundary(_)
        | Error::UnknownBoundary(_) => EapStatus::Mesh,
        Error::NonConvergence { .. } | Error::InvertedElement { .. } | Error::NonPositiveJacobian(_) => {
            EapStatus::NonConvergence
        }
        Error::LinearSolver(_) => EapStatus::LinearSolver,
        Error::Io { .. } => EapStatus::Io,
    }
}

/// Runs `f`, recording errors and converting panics.
fn guard(f: impl FnOnce() -> Result<(), (EapStatus, String)>) -> EapStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            EapStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            EapStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (EapStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (EapStatus, String) {
    (EapStatus::NullPointer, format!("{what} is null"))
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (EapStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (EapStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

/// Message of the last failure on this thread, or null. Valid until the
/// next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn eap_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Default configuration (200x200 design mesh, vertical actuator).
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn eap_config_new(out: *mut *mut EapConfig) -> EapStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = Box::into_raw(Box::new(EapConfig {
            inner: ProblemConfig::default(),
        }));
        Ok(())
    })
}

/// Configuration parsed from TOML text; absent keys take their defaults.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn eap_config_from_toml(text: *const c_char, out: *mut *mut EapConfig) -> EapStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let s = read_str(text, "text")?;
        let inner = ProblemConfig::from_toml_str(s).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(EapConfig { inner }));
        Ok(())
    })
}

/// # Safety
/// `config` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn eap_config_free(config: *mut EapConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Design mesh resolution.
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn eap_config_set_design_mesh(config: *mut EapConfig, nx: usize, ny: usize) -> EapStatus {
    guard(|| {
        let c = config.as_mut().ok_or_else(|| null("config"))?;
        let mut next = c.inner.clone();
        next.mesh.design_nx = nx;
        next.mesh.design_ny = ny;
        next.validate().map_err(lib_err)?;
        c.inner = next;
        Ok(())
    })
}

/// Iteration cap.
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn eap_config_set_max_iters(config: *mut EapConfig, max_iters: usize) -> EapStatus {
    guard(|| {
        let c = config.as_mut().ok_or_else(|| null("config"))?;
        if max_iters == 0 {
            return Err((EapStatus::OutOfRange, "max_iters must be at least 1".into()));
        }
        c.inner.max_iters = max_iters;
        Ok(())
    })
}

/// 0 optimizes the vertical, 1 the horizontal port displacement.
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn eap_config_set_direction(config: *mut EapConfig, direction: i32) -> EapStatus {
    guard(|| {
        let c = config.as_mut().ok_or_else(|| null("config"))?;
        c.inner.direction = match direction {
            0 => Direction::Vertical,
            1 => Direction::Horizontal,
            d => return Err((EapStatus::OutOfRange, format!("direction {d} is neither 0 nor 1"))),
        };
        Ok(())
    })
}

/// Runs the optimization to convergence or the iteration cap.
///
/// # Safety
/// `config` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn eap_run(config: *const EapConfig, out: *mut *mut EapRun) -> EapStatus {
    guard(|| {
        let c = config.as_ref().ok_or_else(|| null("config"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let outcome = run(&c.inner, &RunOptions::default()).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(EapRun {
            outcome,
            phi_p: c.inner.phi_p,
        }));
        Ok(())
    })
}

/// # Safety
/// `run` must come from [`eap_run`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn eap_run_free(run: *mut EapRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// # Safety
/// `run` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn eap_run_summary(run: *const EapRun, out: *mut EapSummary) -> EapStatus {
    guard(|| {
        let r = run.as_ref().ok_or_else(|| null("run"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let o = &r.outcome;
        let v = &o.last.volumes;
        *out = EapSummary {
            converged: (o.stop == StopReason::Converged) as i32,
            iterations: o.record.rows.len(),
            g0: o.last.g0,
            g1: v.g1,
            g2: v.g2,
            v1: v.v1,
            v2: v.v2,
        };
        Ok(())
    })
}

/// Number of rows in the iteration history.
///
/// # Safety
/// `run` must be a live handle and `len` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn eap_run_history_len(run: *const EapRun, len: *mut usize) -> EapStatus {
    guard(|| {
        let r = run.as_ref().ok_or_else(|| null("run"))?;
        let len = len.as_mut().ok_or_else(|| null("len"))?;
        *len = r.outcome.record.rows.len();
        Ok(())
    })
}

/// # Safety
/// `run` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn eap_run_history_row(run: *const EapRun, index: usize, out: *mut EapHistoryRow) -> EapStatus {
    guard(|| {
        let r = run.as_ref().ok_or_else(|| null("run"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let rows = &r.outcome.record.rows;
        let row = rows
            .get(index)
            .ok_or_else(|| (EapStatus::OutOfRange, format!("row {index} of {}", rows.len())))?;
        *out = EapHistoryRow {
            iteration: row.iteration,
            g0: row.g0,
            g0_hat: row.g0_hat,
            g0_bar: row.g0_bar,
            g1: row.g1,
            g2: row.g2,
            beta: row.beta,
            alpha: row.alpha,
            a_d: row.a_d,
            newton_iters: row.newton_iters,
            wall_time_s: row.wall_time_s,
        };
        Ok(())
    })
}

/// Copies the final raw design variables of field 1 or 2 into `buf`, which
/// must hold exactly the number of design elements (see `len` on
/// `EAP_STATUS_OUT_OF_RANGE`, which is always written).
///
/// # Safety
/// `run` must be a live handle; `buf` must be valid for `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn eap_run_design(
    run: *const EapRun,
    field: i32,
    buf: *mut f64,
    capacity: usize,
    len: *mut usize,
) -> EapStatus {
    guard(|| {
        let r = run.as_ref().ok_or_else(|| null("run"))?;
        let data = match field {
            1 => &r.outcome.rho1,
            2 => &r.outcome.rho2,
            f => return Err((EapStatus::OutOfRange, format!("field {f} is neither 1 nor 2"))),
        };
        if let Some(l) = len.as_mut() {
            *l = data.len();
        }
        if capacity != data.len() {
            return Err((
                EapStatus::OutOfRange,
                format!("buffer holds {capacity} values, design has {}", data.len()),
            ));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        std::slice::from_raw_parts_mut(buf, capacity).copy_from_slice(data);
        Ok(())
    })
}

/// Writes VTK, CSV history and summary files into `dir`.
///
/// # Safety
/// `run` must be a live handle and `dir` a NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn eap_run_write_outputs(run: *const EapRun, dir: *const c_char) -> EapStatus {
    guard(|| {
        let r = run.as_ref().ok_or_else(|| null("run"))?;
        let d = read_str(dir, "dir")?;
        emit_outputs(&r.outcome, r.phi_p, Path::new(d)).map_err(lib_err)?;
        Ok(())
    })
}

/// Runs the built-in self-checks; `failed` receives the number of failures.
///
/// # Safety
/// `failed` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn eap_verify(failed: *mut usize) -> EapStatus {
    guard(|| {
        let failed = failed.as_mut().ok_or_else(|| null("failed"))?;
        *failed = eaptop::verify::run_all().iter().filter(|c| !c.passed).count();
        Ok(())
    })
}
