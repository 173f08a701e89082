//! C ABI for robrel.
//!
//! Problems and reports are opaque handles created and freed by this library.
//! Every fallible call returns a [`RobrelStatus`]; on failure the message is
//! available from [`robrel_last_error`] on the same thread until the next call.
//! Outputs are written only on success.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use robrel::oracle::{grid_extrema, RewardGrid, DEFAULT_GRID_CAP};
use robrel::report::{solve_summary, SolveSummary};
use robrel::solver::{rob_rel, worst_case_loss, Hyperparams, SolveReport};
use robrel::specfile::{HyperOverrides, LoadedProblem, SpecFile};
use robrel::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RobrelStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// The problem spec is malformed or references something missing.
    InvalidSpec = 3,
    InvalidArgument = 4,
    /// No feasible reward on the oracle grid.
    Infeasible = 5,
    Unsupported = 6,
    Io = 7,
    /// A bug: the library panicked. The handle arguments are still valid.
    Panic = 8,
}

/// Which extreme of the policy gap.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RobrelDirection {
    Min = 0,
    Max = 1,
}

/// A validated problem spec, ready to solve.
pub struct RobrelProblem {
    loaded: LoadedProblem,
}

/// The outcome of [`robrel_solve`].
pub struct RobrelReport {
    report: SolveReport,
    summary: SolveSummary,
}

enum Failure {
    Null(&'static str),
    Utf8(&'static str),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn status(&self) -> RobrelStatus {
        match self {
            Failure::Null(_) => RobrelStatus::NullPointer,
            Failure::Utf8(_) => RobrelStatus::InvalidUtf8,
            Failure::Core(e) => match e {
                Error::Spec { .. }
                | Error::Json(_)
                | Error::MissingDataset { .. }
                | Error::EmptyDataset => RobrelStatus::InvalidSpec,
                Error::EmptyFeasibleGrid { .. } => RobrelStatus::Infeasible,
                Error::GridTooLarge { .. } | Error::Unsupported(_) => RobrelStatus::Unsupported,
                Error::Io(_) | Error::Csv(_) => RobrelStatus::Io,
                _ => RobrelStatus::InvalidArgument,
            },
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Null(arg) => format!("`{arg}` is null"),
            Failure::Utf8(arg) => format!("`{arg}` is not valid UTF-8"),
            Failure::Core(e) => e.to_string(),
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior NULs replaced");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> RobrelStatus {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => RobrelStatus::Ok,
        Ok(Err(f)) => {
            set_last_error(f.message());
            f.status()
        }
        Err(panic) => {
            let what = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("internal error: {what}"));
            RobrelStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure::Utf8(name))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(name))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(name))
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn robrel_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next library call on this thread.
#[no_mangle]
pub extern "C" fn robrel_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses and validates a problem spec given as JSON text. Dataset paths in the
/// spec resolve against `base_dir`, or the working directory when it is NULL.
///
/// # Safety
/// `json` and a non-NULL `base_dir` must be NUL-terminated strings; `out` must
/// be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn robrel_problem_from_json(
    json: *const c_char,
    base_dir: *const c_char,
    out: *mut *mut RobrelProblem,
) -> RobrelStatus {
    guard(|| {
        let text = str_arg(json, "json")?;
        let base = if base_dir.is_null() {
            "."
        } else {
            str_arg(base_dir, "base_dir")?
        };
        let out = out_arg(out, "out")?;
        let loaded =
            SpecFile::from_json(text)?.build(Path::new(base), &HyperOverrides::default())?;
        *out = Box::into_raw(Box::new(RobrelProblem { loaded }));
        Ok(())
    })
}

/// Loads a problem spec file; dataset paths resolve against its directory.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn robrel_problem_from_file(
    path: *const c_char,
    out: *mut *mut RobrelProblem,
) -> RobrelStatus {
    guard(|| {
        let path = Path::new(str_arg(path, "path")?);
        let out = out_arg(out, "out")?;
        let base = path.parent().unwrap_or(Path::new("."));
        let loaded = SpecFile::load(path)?.build(base, &HyperOverrides::default())?;
        *out = Box::into_raw(Box::new(RobrelProblem { loaded }));
        Ok(())
    })
}

/// # Safety
/// `problem` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn robrel_problem_free(problem: *mut RobrelProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Number of reward parameters (features, or `S*A*H` in tabular mode) and of constraints.
///
/// # Safety
/// `problem` must be a live handle; the outputs must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn robrel_problem_dims(
    problem: *const RobrelProblem,
    parameters: *mut usize,
    constraints: *mut usize,
) -> RobrelStatus {
    guard(|| {
        let p = &ref_arg(problem, "problem")?.loaded.problem;
        let parameters = out_arg(parameters, "parameters")?;
        let constraints = out_arg(constraints, "constraints")?;
        *parameters = p.space().dim();
        *constraints = p.constraints().len();
        Ok(())
    })
}

/// Hyperparameters the next solve will use.
///
/// # Safety
/// `problem` must be a live handle; the outputs must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn robrel_problem_hyper(
    problem: *const RobrelProblem,
    iters: *mut usize,
    alpha: *mut f64,
    dual_radius: *mut f64,
) -> RobrelStatus {
    guard(|| {
        let h = ref_arg(problem, "problem")?.loaded.problem.hyper();
        let (iters, alpha, dual_radius) = (
            out_arg(iters, "iters")?,
            out_arg(alpha, "alpha")?,
            out_arg(dual_radius, "dual_radius")?,
        );
        *iters = h.iters;
        *alpha = h.alpha;
        *dual_radius = h.dual_radius;
        Ok(())
    })
}

/// Replaces the iteration count, step size and dual radius.
///
/// # Safety
/// `problem` must be a live handle not used concurrently.
#[no_mangle]
pub unsafe extern "C" fn robrel_problem_set_hyper(
    problem: *mut RobrelProblem,
    iters: usize,
    alpha: f64,
    dual_radius: f64,
) -> RobrelStatus {
    guard(|| {
        let p = out_arg(problem, "problem")?;
        p.loaded.problem = p.loaded.problem.with_hyper(Hyperparams {
            iters,
            alpha,
            dual_radius,
        })?;
        Ok(())
    })
}

/// Runs both extremum solves.
///
/// # Safety
/// `problem` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn robrel_solve(
    problem: *const RobrelProblem,
    out: *mut *mut RobrelReport,
) -> RobrelStatus {
    guard(|| {
        let loaded = &ref_arg(problem, "problem")?.loaded;
        let out = out_arg(out, "out")?;
        let report = rob_rel(&loaded.problem)?;
        let summary = solve_summary(loaded, &report)?;
        *out = Box::into_raw(Box::new(RobrelReport { report, summary }));
        Ok(())
    })
}

/// # Safety
/// `report` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn robrel_report_free(report: *mut RobrelReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Estimated extremes `m̂`, `M̂` and the robust prediction with its worst-case error.
///
/// # Safety
/// `report` must be a live handle; non-NULL outputs must be valid for writes.
/// NULL outputs are skipped.
#[no_mangle]
pub unsafe extern "C" fn robrel_report_values(
    report: *const RobrelReport,
    min: *mut f64,
    max: *mut f64,
    prediction: *mut f64,
    uninformativeness: *mut f64,
) -> RobrelStatus {
    guard(|| {
        let r = &ref_arg(report, "report")?.report;
        for (p, v) in [
            (min, r.min.value),
            (max, r.max.value),
            (prediction, r.prediction),
            (uninformativeness, r.uninformativeness),
        ] {
            if let Some(p) = p.as_mut() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Copies the averaged reward parameters of one extreme into `buf` (up to
/// `len` values) and stores the full count in `needed`. Call with `len = 0`
/// to query the size.
///
/// # Safety
/// `report` must be a live handle, `buf` valid for `len` writes (may be NULL
/// when `len` is 0) and `needed` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn robrel_report_reward(
    report: *const RobrelReport,
    direction: RobrelDirection,
    buf: *mut f64,
    len: usize,
    needed: *mut usize,
) -> RobrelStatus {
    guard(|| {
        let r = &ref_arg(report, "report")?.report;
        let needed = out_arg(needed, "needed")?;
        let e = match direction {
            RobrelDirection::Min => &r.min,
            RobrelDirection::Max => &r.max,
        };
        let params = e
            .reward
            .theta()
            .unwrap_or_else(|| e.reward.values().as_slice());
        if len > 0 {
            if buf.is_null() {
                return Err(Failure::Null("buf"));
            }
            let n = len.min(params.len());
            ptr::copy_nonoverlapping(params.as_ptr(), buf, n);
        }
        *needed = params.len();
        Ok(())
    })
}

/// The report as JSON; free the string with [`robrel_string_free`].
///
/// # Safety
/// `report` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn robrel_report_json(
    report: *const RobrelReport,
    out: *mut *mut c_char,
) -> RobrelStatus {
    guard(|| {
        let summary = &ref_arg(report, "report")?.summary;
        let out = out_arg(out, "out")?;
        let text = serde_json::to_string_pretty(summary).map_err(Error::from)?;
        *out = CString::new(text).expect("JSON has no NUL").into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must be NULL or a string returned by this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn robrel_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Exact extremes over the grid-feasible rewards at spacing `resolution`.
///
/// # Safety
/// `problem` must be a live handle; the outputs must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn robrel_oracle(
    problem: *const RobrelProblem,
    resolution: f64,
    min: *mut f64,
    max: *mut f64,
) -> RobrelStatus {
    guard(|| {
        let loaded = &ref_arg(problem, "problem")?.loaded;
        let (min, max) = (out_arg(min, "min")?, out_arg(max, "max")?);
        let space = loaded.problem.space();
        let grid = RewardGrid::for_space(space, resolution)?;
        let e = grid_extrema(
            &loaded.exact_constraints,
            &loaded.exact_objective,
            space,
            &grid,
            DEFAULT_GRID_CAP,
        )?;
        *min = e.min;
        *max = e.max;
        Ok(())
    })
}

/// `max(x - min, max - x)`.
///
/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn robrel_worst_case_loss(
    x: f64,
    min: f64,
    max: f64,
    out: *mut f64,
) -> RobrelStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = worst_case_loss(x, min, max)?;
        Ok(())
    })
}
