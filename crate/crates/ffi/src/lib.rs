//! C interface to `loopgroup`.
//!
//! Loops and real forms are opaque handles owned by the caller and released
//! with `lg_loop_free` / `lg_form_free`. Every fallible call returns an
//! `LgStatus`; on failure `lg_last_error_message` describes the error for the
//! calling thread. Strings returned through out-parameters are released with
//! `lg_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use loopgroup::birkhoff::{birkhoff_factor, factor_in_form};
use loopgroup::involutions::{builtin_form, RealFormSpec};
use loopgroup::io::{loop_from_json, loop_to_json};
use loopgroup::iwasawa::iwasawa_factor;
use loopgroup::linalg::C64;
use loopgroup::loops::LaurentLoop;
use loopgroup::Error;

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    /// The loop is outside the big cell.
    NotInBigCell = 4,
    /// The constant obstruction has no real logarithm.
    LogBranchFailure = 5,
    /// Input or factors are not fixed by the real form.
    FormViolation = 6,
    /// Singular samples, residuals over tolerance, failed certificates.
    Numerical = 7,
    Panic = 8,
}

/// A matrix-valued Laurent polynomial.
pub struct LgLoop(LaurentLoop);

/// A real form: first-kind involutions plus an optional second-kind partner.
pub struct LgForm(RealFormSpec);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> LgStatus {
    match e {
        Error::NotInBigCell(_) => LgStatus::NotInBigCell,
        Error::LogBranchFailure { .. } => LgStatus::LogBranchFailure,
        Error::BirkhoffSingular(inner) | Error::AtGridPoint { source: inner, .. } => status_of(inner),
        Error::FormViolation { .. } | Error::FactorFormViolation { .. } | Error::WrongSidedInput => {
            LgStatus::FormViolation
        }
        Error::InvalidArgument(_) | Error::SizeMismatch(..) | Error::ParameterViolation(_) | Error::NonCommuting(_) => {
            LgStatus::InvalidArgument
        }
        Error::Parse(_) | Error::Io(_) => LgStatus::Parse,
        _ => LgStatus::Numerical,
    }
}

struct Failure(LgStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(LgStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(LgStatus::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> LgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            LgStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            LgStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(LgStatus::Parse, format!("{what} is not UTF-8")))
}

unsafe fn emit<T>(out: *mut *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message for the last failed call on this thread, or null after a success.
/// Valid until the next `lg_` call on the same thread.
#[no_mangle]
pub extern "C" fn lg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses a loop from its JSON text.
///
/// # Safety
/// `json` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lg_loop_from_json(json: *const c_char, out: *mut *mut LgLoop) -> LgStatus {
    guard(|| {
        let x = loop_from_json(text(json, "json")?)?;
        emit(out, LgLoop(x), "out")
    })
}

/// Serializes a loop. Free the result with `lg_string_free`.
///
/// # Safety
/// `x` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lg_loop_to_json(x: *const LgLoop, out: *mut *mut c_char) -> LgStatus {
    guard(|| {
        let x = borrow(x, "loop")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = CString::new(loop_to_json(&x.0)).expect("json has no nul").into_raw();
        Ok(())
    })
}

/// Matrix size of a loop, or 0 for a null handle.
///
/// # Safety
/// `x` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lg_loop_size(x: *const LgLoop) -> usize {
    x.as_ref().map_or(0, |x| x.0.size())
}

/// Lowest and highest stored degree.
///
/// # Safety
/// `x` must be a live handle; `min` and `max` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lg_loop_window(x: *const LgLoop, min: *mut i64, max: *mut i64) -> LgStatus {
    guard(|| {
        let w = borrow(x, "loop")?.0.window();
        if min.is_null() || max.is_null() {
            return Err(null("window output"));
        }
        *min = w.min;
        *max = w.max;
        Ok(())
    })
}

/// # Safety
/// `x` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lg_loop_free(x: *mut LgLoop) {
    if !x.is_null() {
        drop(Box::from_raw(x));
    }
}

/// # Safety
/// `s` must be null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Catalog form by name: `un(n,eps)`, `so-curved-flat(n,k)`, `glr(n)`.
///
/// # Safety
/// `name` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lg_form_builtin(name: *const c_char, out: *mut *mut LgForm) -> LgStatus {
    guard(|| {
        let form = builtin_form(text(name, "name")?, None, None)?;
        emit(out, LgForm(form), "out")
    })
}

/// Matrix size of loops in the form, or 0 for a null handle.
///
/// # Safety
/// `form` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lg_form_size(form: *const LgForm) -> usize {
    form.as_ref().map_or(0, |f| f.0.size())
}

/// # Safety
/// `form` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lg_form_free(form: *mut LgForm) {
    if !form.is_null() {
        drop(Box::from_raw(form));
    }
}

/// Seeded random loop fixed by the form, with degrees in [-degree, degree].
///
/// # Safety
/// `form` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lg_random_loop(
    form: *const LgForm,
    degree: i64,
    amplitude: f64,
    seed: u64,
    out: *mut *mut LgLoop,
) -> LgStatus {
    guard(|| {
        let x = borrow(form, "form")?.0.random_loop(degree, amplitude, seed)?;
        emit(out, LgLoop(x), "out")
    })
}

/// Splits `x = minus * plus` with `minus(inf) = I`. With a non-null `form`
/// the input and both factors are checked against it.
///
/// # Safety
/// `x` must be a live handle, `form` null or live; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn lg_birkhoff_factor(
    form: *const LgForm,
    x: *const LgLoop,
    truncation: usize,
    tol: f64,
    out_minus: *mut *mut LgLoop,
    out_plus: *mut *mut LgLoop,
) -> LgStatus {
    guard(|| {
        let x = &borrow(x, "loop")?.0;
        if out_minus.is_null() || out_plus.is_null() {
            return Err(null("factor output"));
        }
        let f = match form.as_ref() {
            Some(form) => factor_in_form(&form.0, x, truncation, tol)?,
            None => birkhoff_factor(x, truncation, tol)?,
        };
        emit(out_minus, LgLoop(f.x_minus), "out_minus")?;
        emit(out_plus, LgLoop(f.x_plus), "out_plus")
    })
}

/// Splits `x = z * y` with `z` fixed by the form's partner involution and
/// `y` in the positive subgroup. The form must have a partner.
///
/// # Safety
/// `form` and `x` must be live handles; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn lg_iwasawa_factor(
    form: *const LgForm,
    x: *const LgLoop,
    truncation: usize,
    tol: f64,
    out_z: *mut *mut LgLoop,
    out_y: *mut *mut LgLoop,
) -> LgStatus {
    guard(|| {
        let form = &borrow(form, "form")?.0;
        let x = &borrow(x, "loop")?.0;
        if out_z.is_null() || out_y.is_null() {
            return Err(null("factor output"));
        }
        let tau = form
            .tau()
            .ok_or_else(|| invalid(format!("form {} has no second-kind involution", form.name())))?;
        let f = iwasawa_factor(form, tau, x, truncation, tol)?;
        emit(out_z, LgLoop(f.z_tau), "out_z")?;
        emit(out_y, LgLoop(f.y_plus), "out_y")
    })
}

/// Winding number of `det x` around the unit circle.
///
/// # Safety
/// `x` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lg_winding_det(x: *const LgLoop, out: *mut i64) -> LgStatus {
    guard(|| {
        let w = borrow(x, "loop")?.0.winding_det()?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = w;
        Ok(())
    })
}

/// Evaluates `x(re + i im)` into `out` as row-major interleaved
/// `[re, im]` pairs; `len` must be at least `2 n n`.
///
/// # Safety
/// `x` must be a live handle; `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn lg_loop_eval(x: *const LgLoop, re: f64, im: f64, out: *mut f64, len: usize) -> LgStatus {
    guard(|| {
        let x = &borrow(x, "loop")?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        let n = x.size();
        if len < 2 * n * n {
            return Err(invalid(format!("buffer holds {len} doubles, need {}", 2 * n * n)));
        }
        let lambda = C64::new(re, im);
        if lambda.norm() == 0.0 || !lambda.is_finite() {
            return Err(invalid("evaluation point must be finite and nonzero"));
        }
        let m = x.eval(lambda);
        let buf = std::slice::from_raw_parts_mut(out, 2 * n * n);
        for i in 0..n {
            for j in 0..n {
                let v = m[(i, j)];
                buf[2 * (i * n + j)] = v.re;
                buf[2 * (i * n + j) + 1] = v.im;
            }
        }
        Ok(())
    })
}
