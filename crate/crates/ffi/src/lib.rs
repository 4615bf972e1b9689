//! C ABI for the `htstep` crate.
//!
//! Every fallible function returns an `HtstepStatus`; on failure the message
//! is available from [`htstep_last_error`] on the same thread. Objects are
//! opaque handles released with their `_free` function. Dense data is
//! column-major with mode 0 varying fastest.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use htstep::fokker_planck::FpProblem;
use htstep::integrators::{
    integrate, threshold_schedule, IntegrateOptions, MidpointConstants, SchemeKind, SchemeSpec, ThresholdPolicy,
};
use htstep::{DenseTensor, DimensionTree, Error, HTensor, TreeShape, TruncationControl};

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HtstepStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Config = 3,
    Numerical = 4,
    Io = 5,
    Format = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// An HT tensor.
pub struct HtstepTensor(HTensor);

/// A Fokker–Planck problem preset.
pub struct HtstepProblem(FpProblem);

/// Summary of an [`htstep_integrate`] run.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct HtstepRunStats {
    pub steps: usize,
    pub max_rank: usize,
    pub final_mass: f64,
    /// Steps whose truncation error estimate exceeded its tolerance.
    pub threshold_violations: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> HtstepStatus {
    match e {
        Error::InvalidInput(_) | Error::DimensionMismatch { .. } | Error::TreeMismatch | Error::BudgetExceeded { .. } => {
            HtstepStatus::InvalidInput
        }
        Error::Config(_) => HtstepStatus::Config,
        Error::Numerical(_) | Error::Timeout { .. } | Error::DegenerateSpectrum { .. } | Error::IllConditioned { .. } => {
            HtstepStatus::Numerical
        }
        Error::Io(_) => HtstepStatus::Io,
        Error::Format(_) => HtstepStatus::Format,
    }
}

struct Fail(HtstepStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(HtstepStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> HtstepStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            HtstepStatus::Ok
        }
        Ok(Err(Fail(code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal panic".into());
            HtstepStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(HtstepStatus::InvalidInput, format!("{what} is not UTF-8")))
}

unsafe fn put<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `cap`) and returns the full message length in bytes.
#[no_mangle]
pub unsafe extern "C" fn htstep_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && cap > 0 {
            let n = msg.len().min(cap - 1);
            ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn htstep_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Builds the preset `name` (`fp2d-paper`, `fp4d-paper`) on an `n`-point
/// grid; `n = 0` selects the preset's default.
#[no_mangle]
pub unsafe extern "C" fn htstep_problem_preset(name: *const c_char, n: usize, out: *mut *mut HtstepProblem) -> HtstepStatus {
    guard(|| {
        let name = str_arg(name, "name")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let p = FpProblem::preset(name, (n > 0).then_some(n), TreeShape::Balanced)?;
        put(out, HtstepProblem(p));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn htstep_problem_free(p: *mut HtstepProblem) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Number of modes and grid points per mode.
#[no_mangle]
pub unsafe extern "C" fn htstep_problem_shape(p: *const HtstepProblem, order: *mut usize, n: *mut usize) -> HtstepStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("problem"))?;
        if order.is_null() || n.is_null() {
            return Err(null("output"));
        }
        *order = p.0.d();
        *n = p.0.grid.n();
        Ok(())
    })
}

/// A copy of the problem's initial state.
#[no_mangle]
pub unsafe extern "C" fn htstep_problem_initial(p: *const HtstepProblem, out: *mut *mut HtstepTensor) -> HtstepStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("problem"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        put(out, HtstepTensor(p.0.f0.clone()));
        Ok(())
    })
}

/// Compresses a dense tensor with absolute Frobenius tolerance `tol` on the
/// balanced tree.
#[no_mangle]
pub unsafe extern "C" fn htstep_tensor_from_dense(
    data: *const f64,
    dims: *const usize,
    order: usize,
    tol: f64,
    out: *mut *mut HtstepTensor,
) -> HtstepStatus {
    guard(|| {
        if data.is_null() || dims.is_null() || out.is_null() {
            return Err(null("argument"));
        }
        let dims = std::slice::from_raw_parts(dims, order).to_vec();
        let len = dims.iter().try_fold(1usize, |a, &b| a.checked_mul(b)).ok_or_else(|| {
            Fail(HtstepStatus::InvalidInput, "dimension product overflows".into())
        })?;
        let t = DenseTensor::from_vec(&dims, std::slice::from_raw_parts(data, len).to_vec())?;
        let tree = DimensionTree::balanced(order)?;
        let (h, _) = HTensor::from_dense(&t, &tree, &TruncationControl::Tolerance(tol))?;
        put(out, HtstepTensor(h));
        Ok(())
    })
}

/// Truncates to absolute tolerance `tol`; `err_est` (may be null) receives
/// the error estimate.
#[no_mangle]
pub unsafe extern "C" fn htstep_tensor_truncate(
    t: *const HtstepTensor,
    tol: f64,
    out: *mut *mut HtstepTensor,
    err_est: *mut f64,
) -> HtstepStatus {
    truncate_with(t, out, err_est, TruncationControl::Tolerance(tol))
}

/// Truncates to rank at most `rank` at every node.
#[no_mangle]
pub unsafe extern "C" fn htstep_tensor_truncate_rank(
    t: *const HtstepTensor,
    rank: usize,
    out: *mut *mut HtstepTensor,
    err_est: *mut f64,
) -> HtstepStatus {
    let tree_len = t.as_ref().map_or(0, |h| h.0.tree().len());
    truncate_with(t, out, err_est, TruncationControl::FixedRank(vec![rank; tree_len]))
}

unsafe fn truncate_with(
    t: *const HtstepTensor,
    out: *mut *mut HtstepTensor,
    err_est: *mut f64,
    ctrl: TruncationControl,
) -> HtstepStatus {
    guard(|| {
        let h = t.as_ref().ok_or_else(|| null("tensor"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let tr = h.0.truncate(&ctrl)?;
        if !err_est.is_null() {
            *err_est = tr.err_est;
        }
        put(out, HtstepTensor(tr.tensor));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn htstep_tensor_free(t: *mut HtstepTensor) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Number of modes, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn htstep_tensor_order(t: *const HtstepTensor) -> usize {
    t.as_ref().map_or(0, |h| h.0.order())
}

/// Frobenius norm, or NaN for a null handle.
#[no_mangle]
pub unsafe extern "C" fn htstep_tensor_norm(t: *const HtstepTensor) -> f64 {
    t.as_ref().map_or(f64::NAN, |h| h.0.norm())
}

unsafe fn copy_out<T: Copy>(src: &[T], out: *mut T, cap: usize, len: *mut usize) -> Result<(), Fail> {
    if !len.is_null() {
        *len = src.len();
    }
    if out.is_null() && cap == 0 {
        return Ok(());
    }
    if out.is_null() {
        return Err(null("out"));
    }
    if cap < src.len() {
        return Err(Fail(HtstepStatus::BufferTooSmall, format!("need {} elements, got {cap}", src.len())));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
    Ok(())
}

/// Mode sizes. Pass `out = NULL, cap = 0` to query the count in `len`.
#[no_mangle]
pub unsafe extern "C" fn htstep_tensor_dims(t: *const HtstepTensor, out: *mut usize, cap: usize, len: *mut usize) -> HtstepStatus {
    guard(|| copy_out(t.as_ref().ok_or_else(|| null("tensor"))?.0.dims(), out, cap, len))
}

/// Node ranks in tree preorder (root first).
#[no_mangle]
pub unsafe extern "C" fn htstep_tensor_ranks(t: *const HtstepTensor, out: *mut usize, cap: usize, len: *mut usize) -> HtstepStatus {
    guard(|| copy_out(&t.as_ref().ok_or_else(|| null("tensor"))?.0.ranks(), out, cap, len))
}

/// Full tensor entries (column-major).
#[no_mangle]
pub unsafe extern "C" fn htstep_tensor_to_dense(t: *const HtstepTensor, out: *mut f64, cap: usize, len: *mut usize) -> HtstepStatus {
    guard(|| {
        let h = t.as_ref().ok_or_else(|| null("tensor"))?;
        let n: usize = h.0.dims().iter().product();
        if out.is_null() && cap == 0 {
            if !len.is_null() {
                *len = n;
            }
            return Ok(());
        }
        copy_out(h.0.to_dense()?.data(), out, cap, len)
    })
}

#[no_mangle]
pub unsafe extern "C" fn htstep_tensor_write(t: *const HtstepTensor, path: *const c_char) -> HtstepStatus {
    guard(|| {
        let h = t.as_ref().ok_or_else(|| null("tensor"))?;
        let path = str_arg(path, "path")?;
        let mut w = BufWriter::new(File::create(path).map_err(Error::from)?);
        h.0.write_to(&mut w)?;
        w.flush().map_err(Error::from)?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn htstep_tensor_read(path: *const c_char, out: *mut *mut HtstepTensor) -> HtstepStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let h = HTensor::read_from(BufReader::new(File::open(path).map_err(Error::from)?))?;
        put(out, HtstepTensor(h));
        Ok(())
    })
}

/// Builds a threshold policy from `constants` (`[m1, m2]` for Euler,
/// `[a, b, g]` otherwise, with the start-up steps of multistep schemes using
/// the same `a, b, g`). A null pointer selects the defaults `M₁ = M₂ = 10²`,
/// `A = B = 10³`, `G = 10²`.
unsafe fn policy(scheme: &SchemeSpec, constants: *const f64, n: usize) -> Result<ThresholdPolicy, Fail> {
    if constants.is_null() {
        return Ok(ThresholdPolicy::paper_small(scheme));
    }
    let c = std::slice::from_raw_parts(constants, n);
    let want = if scheme.kind == SchemeKind::Euler { 2 } else { 3 };
    if c.len() != want {
        return Err(Fail(HtstepStatus::InvalidInput, format!("scheme {} takes {want} constants", scheme.name())));
    }
    let p = match scheme.kind {
        SchemeKind::Euler => ThresholdPolicy::Euler { m1: c[0], m2: c[1] },
        SchemeKind::Midpoint => ThresholdPolicy::Midpoint(MidpointConstants { a: c[0], b: c[1], g: c[2] }),
        SchemeKind::AdamsBashforth(s) => ThresholdPolicy::AdamsBashforth {
            a: c[0],
            b: c[1],
            g: vec![c[2]; s],
            startup: MidpointConstants { a: c[0], b: c[1], g: c[2] },
        },
    };
    p.validate()?;
    Ok(p)
}

unsafe fn scheme_arg(s: *const c_char) -> Result<SchemeSpec, Fail> {
    Ok(str_arg(s, "scheme")?.parse::<SchemeSpec>()?)
}

/// Per-step tolerances `[ε_α, ε_β, ε_γ...]` of `scheme` at step `dt`.
#[no_mangle]
pub unsafe extern "C" fn htstep_threshold_schedule(
    scheme: *const c_char,
    dt: f64,
    constants: *const f64,
    n_constants: usize,
    out: *mut f64,
    cap: usize,
    len: *mut usize,
) -> HtstepStatus {
    guard(|| {
        let s = scheme_arg(scheme)?;
        let th = threshold_schedule(&s, dt, &policy(&s, constants, n_constants)?)?;
        let mut v = vec![th.alpha, th.beta];
        v.extend(th.gamma);
        copy_out(&v, out, cap, len)
    })
}

/// Integrates the problem from its initial state to `t_final` with the
/// rank-adaptive scheme and returns the final state.
#[no_mangle]
pub unsafe extern "C" fn htstep_integrate(
    p: *const HtstepProblem,
    scheme: *const c_char,
    dt: f64,
    t_final: f64,
    constants: *const f64,
    n_constants: usize,
    out: *mut *mut HtstepTensor,
    stats: *mut HtstepRunStats,
) -> HtstepStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("problem"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let s = scheme_arg(scheme)?;
        let pol = policy(&s, constants, n_constants)?;
        let opts = IntegrateOptions {
            cell_volume: p.0.grid.cell_volume(p.0.d()),
            deterministic: true,
            ..Default::default()
        };
        let res = integrate(&p.0.operator, &p.0.f0, &s, dt, t_final, &pol, &opts, &mut (), None)?;
        let records = &res.records;
        if !stats.is_null() {
            let last = records.last().expect("initial record");
            *stats = HtstepRunStats {
                steps: last.k,
                max_rank: records.iter().map(|r| r.max_rank).max().unwrap_or(0),
                final_mass: last.mass,
                threshold_violations: records.iter().filter(|r| !r.compliant()).count(),
            };
        }
        put(out, HtstepTensor(res.final_state));
        Ok(())
    })
}
