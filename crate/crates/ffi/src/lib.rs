//! C ABI for `mlq`.
//!
//! Objects are opaque handles created by `mlq_*_new`/`mlq_*_from_json` and
//! released with the matching `mlq_*_free`. Every fallible call returns an
//! `MlqStatus`; on failure the message is available from
//! `mlq_last_error_message` on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use mlq::cli::{self, RunConfig};
use mlq::closedform::cylinder_closing;
use mlq::frames::{psi_so4, SurfaceEvaluator, SurfaceOptions};
use mlq::loops::{Mat2C, Window};
use mlq::potentials::{make_potential, Potential, PotentialSpec};
use mlq::verify::pipeline_report;
use mlq::Error;
use num_complex::Complex64;

/// Status codes. Values 2 and 3 match the CLI exit classes.
#[repr(i32)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MlqStatus {
    Ok = 0,
    /// A required pointer was null or a string was not UTF-8.
    InvalidArgument = 1,
    /// Bad parameters, configuration or domain error.
    Usage = 2,
    /// Integration or factorization failure.
    Numerical = 3,
    /// A Rust panic was caught at the boundary.
    Internal = 4,
}

/// Surface data at one point.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct MlqSample {
    /// Q₂ lift, interleaved (re, im) for 4 coordinates.
    pub q2: [f64; 8],
    /// S³ pair (f_min, N) as quaternion coordinates.
    pub fmin: [f64; 4],
    pub n: [f64; 4],
    /// S²×S² pair.
    pub phi: [f64; 3],
    pub psi: [f64; 3],
    pub tail_norm: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct MlqClosing {
    pub mu1: f64,
    pub mu2: f64,
    pub closes_q2: bool,
    pub closes_s3: bool,
}

/// Opaque holomorphic potential.
pub struct MlqPotential {
    inner: Potential,
}

/// Opaque surface evaluator bound to one potential and spectral value.
pub struct MlqEvaluator {
    inner: SurfaceEvaluator,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(e: &Error) -> MlqStatus {
    set_last_error(&e.to_string());
    if e.is_numerical() {
        MlqStatus::Numerical
    } else {
        MlqStatus::Usage
    }
}

fn invalid(msg: &str) -> MlqStatus {
    set_last_error(msg);
    MlqStatus::InvalidArgument
}

/// Runs `f`, converting panics into `Internal`.
fn guard(f: impl FnOnce() -> MlqStatus) -> MlqStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(&format!("internal error: {msg}"));
            MlqStatus::Internal
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, MlqStatus> {
    if p.is_null() {
        return Err(invalid(&format!("{name} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| invalid(&format!("{name} is not UTF-8")))
}

fn owned_string(s: String, out: *mut *mut c_char) -> MlqStatus {
    match CString::new(s) {
        Ok(c) => {
            unsafe { *out = c.into_raw() };
            MlqStatus::Ok
        }
        Err(_) => invalid("output contains a NUL byte"),
    }
}

fn mat_from(p: *const f64) -> Mat2C {
    let v = unsafe { std::slice::from_raw_parts(p, 8) };
    Mat2C::new(
        Complex64::new(v[0], v[1]),
        Complex64::new(v[2], v[3]),
        Complex64::new(v[4], v[5]),
        Complex64::new(v[6], v[7]),
    )
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mlq_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mlq_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from an `mlq_*` function returning an owned string.
#[no_mangle]
pub unsafe extern "C" fn mlq_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a potential description, e.g. `{"family": "torus"}`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mlq_potential_from_json(json: *const c_char, out: *mut *mut MlqPotential) -> MlqStatus {
    guard(|| {
        if out.is_null() {
            return invalid("out is null");
        }
        let text = match str_arg(json, "json") {
            Ok(t) => t,
            Err(s) => return s,
        };
        let spec: PotentialSpec = match serde_json::from_str(text) {
            Ok(s) => s,
            Err(e) => return fail(&Error::Config(e.to_string())),
        };
        match make_potential(spec) {
            Ok(p) => {
                *out = Box::into_raw(Box::new(MlqPotential { inner: p }));
                MlqStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// # Safety
/// `p` must be null or a handle from `mlq_potential_from_json`, freed once.
#[no_mangle]
pub unsafe extern "C" fn mlq_potential_free(p: *mut MlqPotential) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Coefficient matrix of ξ at (z, λ), row-major with interleaved (re, im):
/// 8 doubles written to `out`.
///
/// # Safety
/// `p` must be a live handle and `out` must hold 8 doubles.
#[no_mangle]
pub unsafe extern "C" fn mlq_potential_xi(
    p: *const MlqPotential,
    z_re: f64,
    z_im: f64,
    lambda_re: f64,
    lambda_im: f64,
    out: *mut f64,
) -> MlqStatus {
    guard(|| {
        if p.is_null() || out.is_null() {
            return invalid("null argument");
        }
        match (*p).inner.xi_at_lambda(Complex64::new(z_re, z_im), Complex64::new(lambda_re, lambda_im)) {
            Ok(m) => {
                let o = std::slice::from_raw_parts_mut(out, 8);
                for i in 0..2 {
                    for j in 0..2 {
                        let v = m.get(i, j);
                        o[4 * i + 2 * j] = v.re;
                        o[4 * i + 2 * j + 1] = v.im;
                    }
                }
                MlqStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Creates an evaluator at spectral value λ₀ (|λ₀| = 1) with truncation
/// window [−N, N]. The potential is copied; it may be freed afterwards.
///
/// # Safety
/// `p` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mlq_evaluator_new(
    p: *const MlqPotential,
    lambda0_re: f64,
    lambda0_im: f64,
    truncation_n: i32,
    out: *mut *mut MlqEvaluator,
) -> MlqStatus {
    guard(|| {
        if p.is_null() || out.is_null() {
            return invalid("null argument");
        }
        if truncation_n < 1 {
            return fail(&Error::Validation("truncation_n must be positive".into()));
        }
        let mut opts = SurfaceOptions::default();
        opts.ode.window = Window::symmetric(truncation_n);
        match SurfaceEvaluator::new((*p).inner.clone(), Complex64::new(lambda0_re, lambda0_im), opts) {
            Ok(ev) => {
                *out = Box::into_raw(Box::new(MlqEvaluator { inner: ev }));
                MlqStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// # Safety
/// `ev` must be null or a handle from `mlq_evaluator_new`, freed once.
#[no_mangle]
pub unsafe extern "C" fn mlq_evaluator_free(ev: *mut MlqEvaluator) {
    if !ev.is_null() {
        drop(Box::from_raw(ev));
    }
}

/// Evaluates the surface at z. Safe to call concurrently on one handle.
///
/// # Safety
/// `ev` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mlq_evaluator_sample(ev: *const MlqEvaluator, z_re: f64, z_im: f64, out: *mut MlqSample) -> MlqStatus {
    guard(|| {
        if ev.is_null() || out.is_null() {
            return invalid("null argument");
        }
        match (*ev).inner.sample(Complex64::new(z_re, z_im)) {
            Ok(s) => {
                let mut r = MlqSample { tail_norm: s.tail_norm, ..Default::default() };
                for (k, c) in s.q2_hom.iter().enumerate() {
                    r.q2[2 * k] = c.re;
                    r.q2[2 * k + 1] = c.im;
                }
                r.fmin = s.s3_pair.0;
                r.n = s.s3_pair.1;
                r.phi = s.s2_pair.0;
                r.psi = s.s2_pair.1;
                *out = r;
                MlqStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Finite-difference residual report at z (step h) as a JSON string.
/// Release it with `mlq_string_free`.
///
/// # Safety
/// `ev` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mlq_evaluator_report_json(
    ev: *const MlqEvaluator,
    z_re: f64,
    z_im: f64,
    h: f64,
    out: *mut *mut c_char,
) -> MlqStatus {
    guard(|| {
        if ev.is_null() || out.is_null() {
            return invalid("null argument");
        }
        if !(h > 0.0) {
            return fail(&Error::Validation("h must be positive".into()));
        }
        match pipeline_report(&(*ev).inner, Complex64::new(z_re, z_im), h) {
            Ok(r) => match serde_json::to_string(&r) {
                Ok(s) => owned_string(s, out),
                Err(e) => fail(&Error::Io(e.to_string())),
            },
            Err(e) => fail(&e),
        }
    })
}

/// Closing prediction for the equivariant family (a, b, c) at λ₀.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mlq_cylinder_closing(
    a: f64,
    b: f64,
    c: f64,
    lambda0_re: f64,
    lambda0_im: f64,
    out: *mut MlqClosing,
) -> MlqStatus {
    guard(|| {
        if out.is_null() {
            return invalid("out is null");
        }
        let r = cylinder_closing(a, b, c, Complex64::new(lambda0_re, lambda0_im));
        *out = MlqClosing { mu1: r.mu1, mu2: r.mu2, closes_q2: r.closes_q2, closes_s3: r.closes_s3 };
        MlqStatus::Ok
    })
}

/// The SO(4) matrix of (p, q) ∈ SU(2)×SU(2). Inputs are 2×2 complex
/// matrices (8 doubles, row-major, interleaved); output is 16 doubles,
/// row-major.
///
/// # Safety
/// `p`, `q` must hold 8 doubles each and `out` 16.
#[no_mangle]
pub unsafe extern "C" fn mlq_psi_so4(p: *const f64, q: *const f64, out: *mut f64) -> MlqStatus {
    guard(|| {
        if p.is_null() || q.is_null() || out.is_null() {
            return invalid("null argument");
        }
        match psi_so4(&mat_from(p), &mat_from(q)) {
            Ok(m) => {
                let o = std::slice::from_raw_parts_mut(out, 16);
                for i in 0..4 {
                    o[4 * i..4 * i + 4].copy_from_slice(&m[i]);
                }
                MlqStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Runs a CLI command ("generate", "verify", "closing" or "family") on a
/// config file. `out_dir` may be null; `jobs` = 0 selects the default.
/// Returns the CLI exit code (0 pass, 1 checks failed, 2 usage, 3
/// numerical), or -1 for invalid arguments.
///
/// # Safety
/// String arguments must be NUL-terminated (or null where allowed).
#[no_mangle]
pub unsafe extern "C" fn mlq_run_command(
    command: *const c_char,
    config_path: *const c_char,
    out_dir: *const c_char,
    jobs: u32,
) -> i32 {
    let r = catch_unwind(AssertUnwindSafe(|| -> i32 {
        let (cmd, cfg_path) = match (str_arg(command, "command"), str_arg(config_path, "config_path")) {
            (Ok(a), Ok(b)) => (a, b),
            _ => return -1,
        };
        let out = if out_dir.is_null() {
            None
        } else {
            match str_arg(out_dir, "out_dir") {
                Ok(s) => Some(Path::new(s)),
                Err(_) => return -1,
            }
        };
        let run = match cmd {
            "generate" => cli::cmd_generate,
            "verify" => cli::cmd_verify,
            "closing" => cli::cmd_closing,
            "family" => cli::cmd_family,
            other => {
                set_last_error(&format!("unknown command '{other}'"));
                return cli::EXIT_USAGE;
            }
        };
        let res = cli::resolve_jobs(if jobs == 0 { None } else { Some(jobs as usize) })
            .and_then(|j| RunConfig::load(Path::new(cfg_path)).map(|c| (j, c)))
            .and_then(|(j, c)| run(&c, out, j));
        match res {
            Ok(o) => {
                if o.exit != 0 {
                    set_last_error(&o.summary);
                }
                o.exit
            }
            Err(e) => {
                set_last_error(&e.to_string());
                cli::exit_code(&e)
            }
        }
    }));
    r.unwrap_or_else(|_| {
        set_last_error("internal error: panic");
        MlqStatus::Internal as i32
    })
}
