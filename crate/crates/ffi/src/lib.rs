//! C interface to polynorm. Objects cross the boundary as opaque handles
//! created and destroyed by this library; every call returns a `PnStatus`
//! and `pn_last_error` describes the most recent failure on the thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use polynorm::approx::{self, TargetNorm};
use polynorm::certify::{self, CertifyOptions, Outcome};
use polynorm::error::Error;
use polynorm::forms::Form;
use polynorm::jsr::{self, JsrOptions, MatrixFamily};
use nalgebra::DMatrix;
use polynorm::sos::{self, Verdict};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Parse = 3,
    Solver = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PnVerdict {
    Sos = 0,
    NotSos = 1,
    Undecided = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PnOutcome {
    Certified = 0,
    NotCertified = 1,
    Refuted = 2,
}

/// A homogeneous polynomial.
pub struct PnForm {
    form: Form,
}

/// A finite set of square matrices.
pub struct PnFamily {
    family: MatrixFamily,
}

/// The result of a certification run, kept as JSON plus its outcome.
pub struct PnReport {
    outcome: PnOutcome,
    json: String,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> PnStatus {
    match e {
        Error::Parse { .. } | Error::Json(_) => PnStatus::Parse,
        Error::Solver(_) | Error::NoConvergence | Error::Quadrature(_) => PnStatus::Solver,
        _ => PnStatus::InvalidInput,
    }
}

/// Runs `body`, turning errors and panics into status codes.
fn guard(body: impl FnOnce() -> Result<(), (PnStatus, String)>) -> PnStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => PnStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            PnStatus::Panic
        }
    }
}

fn lib<T>(r: polynorm::error::Result<T>) -> Result<T, (PnStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (PnStatus, String) {
    (PnStatus::NullPointer, format!("{what} is null"))
}

unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, (PnStatus, String)> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| (PnStatus::InvalidInput, format!("{what} is not UTF-8")))
}

unsafe fn put<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

fn to_c_string(s: String) -> *mut c_char {
    CString::new(s).map_or(ptr::null_mut(), CString::into_raw)
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pn_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn pn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Frees a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn pn_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a form from its JSON representation.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pn_form_from_json(json: *const c_char, out: *mut *mut PnForm) -> PnStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let s = read_str(json, "json")?;
        let form = lib(Form::from_json_str(s))?;
        put(out, PnForm { form });
        Ok(())
    })
}

/// Builds a form from `n_terms` terms; `exponents` holds `n_terms * n_vars`
/// entries, row by row.
///
/// # Safety
/// The arrays must hold the stated number of elements and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn pn_form_new(
    n_vars: usize,
    degree: u32,
    exponents: *const u32,
    coeffs: *const f64,
    n_terms: usize,
    out: *mut *mut PnForm,
) -> PnStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if n_terms > 0 && (exponents.is_null() || coeffs.is_null()) {
            return Err(null("term arrays"));
        }
        let terms = (0..n_terms).map(|t| {
            let e = std::slice::from_raw_parts(exponents.add(t * n_vars), n_vars).to_vec();
            (e, *coeffs.add(t))
        });
        let form = lib(Form::from_terms(n_vars, degree, terms))?;
        put(out, PnForm { form });
        Ok(())
    })
}

/// # Safety
/// `form` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn pn_form_free(form: *mut PnForm) {
    if !form.is_null() {
        drop(Box::from_raw(form));
    }
}

/// # Safety
/// `form` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn pn_form_n_vars(form: *const PnForm) -> usize {
    form.as_ref().map_or(0, |f| f.form.n_vars())
}

/// # Safety
/// `form` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn pn_form_degree(form: *const PnForm) -> u32 {
    form.as_ref().map_or(0, |f| f.form.degree())
}

/// Evaluates the form at `x`, which holds `n` coordinates.
///
/// # Safety
/// `x` must hold `n` doubles and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn pn_form_eval(
    form: *const PnForm,
    x: *const f64,
    n: usize,
    out: *mut f64,
) -> PnStatus {
    guard(|| {
        let f = form.as_ref().ok_or_else(|| null("form"))?;
        if x.is_null() || out.is_null() {
            return Err(null("x or out"));
        }
        if n != f.form.n_vars() {
            return Err((
                PnStatus::InvalidInput,
                format!("expected {} coordinates, got {n}", f.form.n_vars()),
            ));
        }
        *out = f.form.eval(std::slice::from_raw_parts(x, n));
        Ok(())
    })
}

/// JSON text of the form; free it with `pn_string_free`.
///
/// # Safety
/// `form` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pn_form_to_json(form: *const PnForm, out: *mut *mut c_char) -> PnStatus {
    guard(|| {
        let f = form.as_ref().ok_or_else(|| null("form"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = to_c_string(f.form.to_json_string());
        Ok(())
    })
}

/// SOS test of `(Σx²)^r f`, or of its sos-convexity when `convex` is
/// nonzero.
///
/// # Safety
/// `form` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pn_is_sos(
    form: *const PnForm,
    r: u32,
    convex: i32,
    out: *mut PnVerdict,
) -> PnStatus {
    guard(|| {
        let f = form.as_ref().ok_or_else(|| null("form"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let res = if convex != 0 {
            lib(sos::is_r_sos_convex(&f.form, r))?
        } else {
            lib(sos::is_r_sos(&f.form, r))?
        };
        *out = match res.verdict {
            Verdict::Sos => PnVerdict::Sos,
            Verdict::NotSos => PnVerdict::NotSos,
            Verdict::Undecided => PnVerdict::Undecided,
        };
        Ok(())
    })
}

fn outcome_of<C>(o: &Outcome<C>) -> PnOutcome {
    match o {
        Outcome::Certified(_) => PnOutcome::Certified,
        Outcome::NotCertified => PnOutcome::NotCertified,
        Outcome::Refuted(_) => PnOutcome::Refuted,
    }
}

/// Certifies that `f^{1/d}` is a norm (`hessian == 0`) or that `f` has a
/// positive definite Hessian (`hessian != 0`).
///
/// # Safety
/// `form` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pn_certify(
    form: *const PnForm,
    hessian: i32,
    r_max: u32,
    deg_q: u32,
    seed: u64,
    out: *mut *mut PnReport,
) -> PnStatus {
    guard(|| {
        let f = form.as_ref().ok_or_else(|| null("form"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let opts = CertifyOptions {
            r_max,
            deg_q,
            seed,
            ..CertifyOptions::default()
        };
        let report = if hessian != 0 {
            let rep = lib(certify::certify_pd_hessian(&f.form, &opts))?;
            PnReport {
                outcome: outcome_of(&rep.outcome),
                json: lib(serde_json::to_string(&rep).map_err(Error::from))?,
            }
        } else {
            let rep = lib(certify::certify_polynomial_norm(&f.form, &opts))?;
            PnReport {
                outcome: outcome_of(&rep.outcome),
                json: lib(serde_json::to_string(&rep).map_err(Error::from))?,
            }
        };
        put(out, report);
        Ok(())
    })
}

/// # Safety
/// `report` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn pn_report_outcome(report: *const PnReport) -> PnOutcome {
    report.as_ref().map_or(PnOutcome::NotCertified, |r| r.outcome)
}

/// JSON text of the report; free it with `pn_string_free`.
///
/// # Safety
/// `report` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pn_report_to_json(report: *const PnReport, out: *mut *mut c_char) -> PnStatus {
    guard(|| {
        let r = report.as_ref().ok_or_else(|| null("report"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = to_c_string(r.json.clone());
        Ok(())
    })
}

/// # Safety
/// `report` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn pn_report_free(report: *mut PnReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Builds a family of `count` matrices of size `n × n` from `data`, which
/// holds them one after another in row-major order.
///
/// # Safety
/// `data` must hold `count * n * n` doubles and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn pn_family_new(
    n: usize,
    count: usize,
    data: *const f64,
    out: *mut *mut PnFamily,
) -> PnStatus {
    guard(|| {
        if out.is_null() || data.is_null() {
            return Err(null("data or out"));
        }
        let all = std::slice::from_raw_parts(data, count * n * n);
        let mats = all
            .chunks(n * n)
            .map(|c| DMatrix::from_row_slice(n, n, c))
            .collect();
        let family = lib(MatrixFamily::new(mats))?;
        put(out, PnFamily { family });
        Ok(())
    })
}

/// # Safety
/// `family` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn pn_family_free(family: *mut PnFamily) {
    if !family.is_null() {
        drop(Box::from_raw(family));
    }
}

/// Largest `ρ(product)^{1/k}` over products of length `k ≤ max_len`.
///
/// # Safety
/// `family` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pn_jsr_lower_bound(
    family: *const PnFamily,
    max_len: usize,
    out: *mut f64,
) -> PnStatus {
    guard(|| {
        let fam = family.as_ref().ok_or_else(|| null("family"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = lib(jsr::jsr_lower_bound(&fam.family, max_len))?;
        Ok(())
    })
}

/// Searches the given even degrees for a contracting polynomial norm.
///
/// # Safety
/// `degrees` must hold `n_degrees` entries and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn pn_jsr_certify(
    family: *const PnFamily,
    degrees: *const u32,
    n_degrees: usize,
    out: *mut *mut PnReport,
) -> PnStatus {
    guard(|| {
        let fam = family.as_ref().ok_or_else(|| null("family"))?;
        if out.is_null() || (n_degrees > 0 && degrees.is_null()) {
            return Err(null("degrees or out"));
        }
        let ds = if n_degrees == 0 {
            &[][..]
        } else {
            std::slice::from_raw_parts(degrees, n_degrees)
        };
        let rep = lib(jsr::jsr_certify(&fam.family, ds, &JsrOptions::default()))?;
        let outcome = if rep.is_certified() {
            PnOutcome::Certified
        } else {
            PnOutcome::NotCertified
        };
        let json = lib(serde_json::to_string(&rep).map_err(Error::from))?;
        put(out, PnReport { outcome, json });
        Ok(())
    })
}

/// Moment form of degree `d` for the `p`-norm on `R^n` (`p` may be
/// infinite).
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pn_moment_form_pnorm(
    p: f64,
    n: usize,
    d: u32,
    out: *mut *mut PnForm,
) -> PnStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let target = lib(TargetNorm::p_norm(p))?;
        let form = lib(approx::moment_form(&target, n, d))?;
        put(out, PnForm { form });
        Ok(())
    })
}

/// Worst-case ratio guarantee `d/(n+d) · (n/(n+d))^{n/d}` for moment forms.
#[no_mangle]
pub extern "C" fn pn_approx_factor(n: usize, d: u32) -> f64 {
    approx::approx_factor(n, d)
}
