//! C ABI over `bellcert`.
//!
//! Objects cross the boundary as opaque handles owned by the caller and
//! released with the matching `*_free`. Every fallible call returns a
//! `BcStatus`; on failure `bc_last_error` describes what went wrong on the
//! calling thread. Strings returned by the library are freed with
//! `bc_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use bellcert::bell::{builtin_expression, classical_bound, BellExpression};
use bellcert::entanglement::certify_entanglement;
use bellcert::experiments::io::{parse_correlation, parse_expression, parse_nondegeneracy_certificate};
use bellcert::experiments::to_json;
use bellcert::nondegeneracy::{certify_nondegeneracy, NondegeneracyCertificate};
use bellcert::tsirelson::{seesaw, SeesawConfig};
use bellcert::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BcStatus {
    Ok = 0,
    /// Malformed or out-of-range input.
    InvalidInput = 1,
    /// The computation itself failed.
    Numerical = 2,
    NullPointer = 3,
    /// A Rust panic was caught at the boundary.
    Panic = 4,
}

pub struct BcExpression(BellExpression);

pub struct BcCertificate(NondegeneracyCertificate);

/// Seesaw settings; `bc_seesaw_config_default` gives the library defaults.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct BcSeesawConfig {
    pub restarts: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub inner_iters: usize,
    pub seed: u64,
}

impl From<BcSeesawConfig> for SeesawConfig {
    fn from(c: BcSeesawConfig) -> Self {
        SeesawConfig {
            restarts: c.restarts,
            max_iters: c.max_iters,
            tol: c.tol,
            inner_iters: c.inner_iters,
            seed: c.seed,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

enum Fail {
    Lib(Error),
    Null(&'static str),
    Utf8(&'static str),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> BcStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BcStatus::Ok,
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            if e.is_input_error() {
                BcStatus::InvalidInput
            } else {
                BcStatus::Numerical
            }
        }
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            BcStatus::NullPointer
        }
        Ok(Err(Fail::Utf8(what))) => {
            set_error(format!("{what} is not valid UTF-8"));
            BcStatus::InvalidInput
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            BcStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail::Utf8(what))
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

fn owned_string(s: String) -> *mut c_char {
    CString::new(s).map(CString::into_raw).unwrap_or(ptr::null_mut())
}

/// Message for the last failed call on this thread, or null. Valid until
/// the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn bc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `s` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn bc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[no_mangle]
pub extern "C" fn bc_seesaw_config_default() -> BcSeesawConfig {
    let c = SeesawConfig::default();
    BcSeesawConfig {
        restarts: c.restarts,
        max_iters: c.max_iters,
        tol: c.tol,
        inner_iters: c.inner_iters,
        seed: c.seed,
    }
}

/// # Safety
/// `name` must be a NUL-terminated string; `out_expr` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bc_expression_builtin(name: *const c_char, out_expr: *mut *mut BcExpression) -> BcStatus {
    guard(|| {
        let slot = out(out_expr, "out_expr")?;
        let e = builtin_expression(text(name, "name")?)?;
        *slot = Box::into_raw(Box::new(BcExpression(e)));
        Ok(())
    })
}

/// # Safety
/// `json` must be a NUL-terminated string; `out_expr` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bc_expression_from_json(json: *const c_char, out_expr: *mut *mut BcExpression) -> BcStatus {
    guard(|| {
        let slot = out(out_expr, "out_expr")?;
        let e = parse_expression(text(json, "json")?)?;
        *slot = Box::into_raw(Box::new(BcExpression(e)));
        Ok(())
    })
}

/// # Safety
/// `expr` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn bc_expression_free(expr: *mut BcExpression) {
    if !expr.is_null() {
        drop(Box::from_raw(expr));
    }
}

/// Exact local bound by enumeration.
///
/// # Safety
/// `expr` must be a live handle; `out_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bc_classical_bound(expr: *const BcExpression, out_value: *mut f64) -> BcStatus {
    guard(|| {
        let slot = out(out_value, "out_value")?;
        *slot = classical_bound(&deref(expr, "expr")?.0)?.value;
        Ok(())
    })
}

/// Seesaw lower estimate of `C(I, dim, top)`.
///
/// # Safety
/// `expr` must be a live handle; `out_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bc_seesaw(
    expr: *const BcExpression,
    dim: usize,
    top: usize,
    config: BcSeesawConfig,
    out_value: *mut f64,
) -> BcStatus {
    guard(|| {
        let slot = out(out_value, "out_value")?;
        *slot = seesaw(&deref(expr, "expr")?.0, dim, top, &config.into())?.value;
        Ok(())
    })
}

/// # Safety
/// `expr` must be a live handle; `out_cert` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bc_certify(
    expr: *const BcExpression,
    dim: usize,
    config: BcSeesawConfig,
    out_cert: *mut *mut BcCertificate,
) -> BcStatus {
    guard(|| {
        let slot = out(out_cert, "out_cert")?;
        let cert = certify_nondegeneracy(&deref(expr, "expr")?.0, dim, &config.into())?;
        *slot = Box::into_raw(Box::new(BcCertificate(cert)));
        Ok(())
    })
}

/// # Safety
/// `json` must be a NUL-terminated string; `out_cert` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bc_certificate_from_json(json: *const c_char, out_cert: *mut *mut BcCertificate) -> BcStatus {
    guard(|| {
        let slot = out(out_cert, "out_cert")?;
        let cert = parse_nondegeneracy_certificate(text(json, "json")?)?;
        *slot = Box::into_raw(Box::new(BcCertificate(cert)));
        Ok(())
    })
}

/// # Safety
/// `cert` must be a live handle; `out_json` must be writable. The string is
/// freed with `bc_string_free`.
#[no_mangle]
pub unsafe extern "C" fn bc_certificate_to_json(cert: *const BcCertificate, out_json: *mut *mut c_char) -> BcStatus {
    guard(|| {
        let slot = out(out_json, "out_json")?;
        *slot = owned_string(to_json(&deref(cert, "cert")?.0)?);
        Ok(())
    })
}

/// # Safety
/// `cert` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn bc_certificate_is_nondegenerate(cert: *const BcCertificate, out_flag: *mut bool) -> BcStatus {
    guard(|| {
        let slot = out(out_flag, "out_flag")?;
        *slot = deref(cert, "cert")?.0.nondegenerate;
        Ok(())
    })
}

/// # Safety
/// `cert` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn bc_certificate_eps1_max(cert: *const BcCertificate, out_value: *mut f64) -> BcStatus {
    guard(|| {
        let slot = out(out_value, "out_value")?;
        *slot = deref(cert, "cert")?.0.eps1_max;
        Ok(())
    })
}

/// # Safety
/// `cert` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn bc_certificate_free(cert: *mut BcCertificate) {
    if !cert.is_null() {
        drop(Box::from_raw(cert));
    }
}

/// Entanglement certificate JSON for a correlation given as JSON. A
/// violation outside the certified range is a success whose JSON carries
/// null bounds.
///
/// # Safety
/// Handles must be live, `correlation_json` NUL-terminated and `out_json`
/// writable. The string is freed with `bc_string_free`.
#[no_mangle]
pub unsafe extern "C" fn bc_bound(
    expr: *const BcExpression,
    cert: *const BcCertificate,
    correlation_json: *const c_char,
    dim: usize,
    out_json: *mut *mut c_char,
) -> BcStatus {
    guard(|| {
        let slot = out(out_json, "out_json")?;
        let c = parse_correlation(text(correlation_json, "correlation_json")?)?;
        let ent = certify_entanglement(&c, &deref(expr, "expr")?.0, &deref(cert, "cert")?.0, dim)?;
        *slot = owned_string(to_json(&ent)?);
        Ok(())
    })
}
