//! C ABI for the robust-l1 estimators.
//!
//! Every function returns an [`RlStatus`]; results are written through out
//! pointers and are left untouched on failure. The message of the most recent
//! failure on the calling thread is available from [`rl_last_error_message`].
//! Datasets are opaque handles created by `rl_dataset_*` and released with
//! [`rl_dataset_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use robust_l1::catoni::{catoni_estimate, CatoniConfig};
use robust_l1::data::{Dataset, Domain};
use robust_l1::objectives::{truncated_l1_value, MinMaxSpec, TruncatedL1Spec};
use robust_l1::solvers::{solve_erm_l1, solve_erm_l2, solve_minmax_l2, solve_truncated_l1, SolverConfig};
use robust_l1::truncation::{psi, psi_derivative, TruncationKind};
use robust_l1::tuning::{default_alpha_regression, erm_bound, theorem1_bound, BoundInputs};
use robust_l1::Error;

/// Status codes returned by every function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RlStatus {
    Ok = 0,
    InvalidArgument = 1,
    DimensionMismatch = 2,
    Unsupported = 3,
    Io = 4,
    Parse = 5,
    NullPointer = 6,
    Internal = 7,
    Panic = 8,
}

/// Truncation function selector.
pub const RL_TRUNCATION_SATURATING: i32 = 0;
pub const RL_TRUNCATION_LOGQUAD: i32 = 1;

/// Estimator selector for `rl_fit`.
pub const RL_ESTIMATOR_TRUNC_L1: i32 = 0;
pub const RL_ESTIMATOR_ERM_L1: i32 = 1;
pub const RL_ESTIMATOR_MINMAX_L2: i32 = 2;
pub const RL_ESTIMATOR_ERM_L2: i32 = 3;

/// Opaque dataset handle.
pub struct RlDataset(Dataset);

/// Solver settings; obtain defaults from `rl_solver_config_default`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RlSolverConfig {
    pub iterations: usize,
    pub restarts: usize,
    /// Non-positive selects the ball radius.
    pub step_scale: f64,
    pub seed: u64,
    pub polish: bool,
    pub elemental_starts: usize,
}

/// Inputs of the truncated-estimator bound. Non-positive `epsilon` selects `1/n`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RlBoundInputs {
    pub n: usize,
    pub d: usize,
    pub radius: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub mean_norm: f64,
    pub mean_sq_norm: f64,
    pub sup_l2_risk: f64,
}

/// Summary of a fit; the weights go to a caller-provided buffer.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct RlFitResult {
    pub objective_value: f64,
    /// Scale used, or NaN for estimators without one.
    pub alpha: f64,
    pub saturation_fraction: f64,
    pub saturation_warning: bool,
    pub starts_tried: usize,
    pub best_start_index: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Vec<u8>> = const { RefCell::new(Vec::new()) };
}

fn set_error(msg: &str) {
    LAST_ERROR.with(|e| {
        let mut buf = e.borrow_mut();
        buf.clear();
        buf.extend(msg.bytes().filter(|b| *b != 0));
    });
}

fn status_of(err: &Error) -> RlStatus {
    match err {
        Error::InvalidArgument(_) => RlStatus::InvalidArgument,
        Error::DimensionMismatch { .. } => RlStatus::DimensionMismatch,
        Error::UnsupportedDimension(_) | Error::UnsupportedMethod(_) => RlStatus::Unsupported,
        Error::Io { .. } => RlStatus::Io,
        Error::Parse { .. } => RlStatus::Parse,
        _ => RlStatus::Internal,
    }
}

struct Failure(RlStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(RlStatus::InvalidArgument, msg.into())
}

fn null(name: &str) -> Failure {
    Failure(RlStatus::NullPointer, format!("{name} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> RlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            RlStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            RlStatus::Panic
        }
    }
}

fn kind_of(kind: i32) -> Result<TruncationKind, Failure> {
    match kind {
        RL_TRUNCATION_SATURATING => Ok(TruncationKind::SaturatingOdd),
        RL_TRUNCATION_LOGQUAD => Ok(TruncationKind::LogQuadratic),
        other => Err(invalid(format!("unknown truncation kind {other}"))),
    }
}

unsafe fn out<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(name))
}

unsafe fn slice<'a>(p: *const f64, len: usize, name: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn handle<'a>(p: *const RlDataset) -> Result<&'a Dataset, Failure> {
    p.as_ref().map(|d| &d.0).ok_or_else(|| null("dataset"))
}

/// Copies the last error message of this thread, NUL-terminated and truncated
/// to `capacity`, into `buffer`. Returns the full message length excluding
/// the terminator; pass a null buffer to query it.
///
/// # Safety
/// `buffer` must be null or valid for `capacity` bytes.
#[no_mangle]
pub unsafe extern "C" fn rl_last_error_message(buffer: *mut c_char, capacity: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buffer.is_null() && capacity > 0 {
            let k = msg.len().min(capacity - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buffer.cast::<u8>(), k);
            *buffer.add(k) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `out_value` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rl_psi(kind: i32, x: f64, out_value: *mut f64) -> RlStatus {
    guard(|| {
        let v = psi(kind_of(kind)?, x)?;
        *out(out_value, "out_value")? = v;
        Ok(())
    })
}

/// # Safety
/// `out_value` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rl_psi_derivative(kind: i32, x: f64, out_value: *mut f64) -> RlStatus {
    guard(|| {
        let v = psi_derivative(kind_of(kind)?, x)?;
        *out(out_value, "out_value")? = v;
        Ok(())
    })
}

/// Catoni mean of `len` values. A non-positive or NaN `alpha` selects
/// `sqrt(2 / (n nu))` with the sample variance for `nu`.
///
/// # Safety
/// `values` must be valid for `len` reads; `out_value` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rl_catoni_mean(values: *const f64, len: usize, kind: i32, alpha: f64, out_value: *mut f64) -> RlStatus {
    guard(|| {
        let values = slice(values, len, "values")?;
        let config = if alpha > 0.0 { CatoniConfig::with_alpha(alpha) } else { CatoniConfig::default() };
        let v = catoni_estimate(values, kind_of(kind)?, &config)?;
        *out(out_value, "out_value")? = v;
        Ok(())
    })
}

/// Builds a dataset from `n` row-major feature rows of width `d` and `n` responses.
///
/// # Safety
/// `x` must be valid for `n * d` reads, `y` for `n` reads, `out_dataset` for writes.
#[no_mangle]
pub unsafe extern "C" fn rl_dataset_new(
    d: usize,
    n: usize,
    x: *const f64,
    y: *const f64,
    out_dataset: *mut *mut RlDataset,
) -> RlStatus {
    guard(|| {
        let len = n.checked_mul(d).ok_or_else(|| invalid("n * d overflows"))?;
        let x = slice(x, len, "x")?.to_vec();
        let y = slice(y, n, "y")?.to_vec();
        let target = out(out_dataset, "out_dataset")?;
        let data = Dataset::new(d, x, y)?;
        *target = Box::into_raw(Box::new(RlDataset(data)));
        Ok(())
    })
}

/// Reads a dataset from a CSV file: `d` feature columns, then the response.
///
/// # Safety
/// `path` must be a valid NUL-terminated string; `out_dataset` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rl_dataset_read_csv(path: *const c_char, has_header: bool, out_dataset: *mut *mut RlDataset) -> RlStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        let path = CStr::from_ptr(path).to_str().map_err(|_| invalid("path is not UTF-8"))?;
        let target = out(out_dataset, "out_dataset")?;
        let data = Dataset::read_csv(path, has_header)?;
        *target = Box::into_raw(Box::new(RlDataset(data)));
        Ok(())
    })
}

/// Releases a dataset; null is ignored.
///
/// # Safety
/// `dataset` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rl_dataset_free(dataset: *mut RlDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Number of samples, or 0 for a null handle.
///
/// # Safety
/// `dataset` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rl_dataset_n(dataset: *const RlDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.0.n())
}

/// Feature dimension, or 0 for a null handle.
///
/// # Safety
/// `dataset` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rl_dataset_dim(dataset: *const RlDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.0.dim())
}

/// # Safety
/// `out_config` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rl_solver_config_default(out_config: *mut RlSolverConfig) -> RlStatus {
    guard(|| {
        let c = SolverConfig::default();
        *out(out_config, "out_config")? = RlSolverConfig {
            iterations: c.iterations,
            restarts: c.restarts,
            step_scale: c.step_scale.unwrap_or(0.0),
            seed: c.seed,
            polish: c.polish,
            elemental_starts: c.elemental_starts,
        };
        Ok(())
    })
}

fn solver_config(c: &RlSolverConfig) -> SolverConfig {
    SolverConfig {
        iterations: c.iterations,
        restarts: c.restarts,
        step_scale: (c.step_scale > 0.0).then_some(c.step_scale),
        seed: c.seed,
        record_trajectory: false,
        polish: c.polish,
        elemental_starts: c.elemental_starts,
    }
}

/// Truncated l1 objective at `w`.
///
/// # Safety
/// `dataset` must be a live handle, `w` valid for `w_len` reads, `out_value` for writes.
#[no_mangle]
pub unsafe extern "C" fn rl_truncated_l1_value(
    dataset: *const RlDataset,
    w: *const f64,
    w_len: usize,
    alpha: f64,
    kind: i32,
    out_value: *mut f64,
) -> RlStatus {
    guard(|| {
        let data = handle(dataset)?;
        let w = slice(w, w_len, "w")?;
        let spec = TruncatedL1Spec::new(alpha, kind_of(kind)?)?;
        let v = truncated_l1_value(data, w, &spec)?;
        *out(out_value, "out_value")? = v;
        Ok(())
    })
}

/// Fits an estimator over the ball of radius `radius`.
///
/// `alpha` is used by the truncated and min-max estimators; a non-positive or
/// NaN value selects `sqrt((d log(6 radius n) + 2 log(1/delta)) / n)`.
/// `lambda` is used by the min-max estimator only. A null `config` selects
/// the defaults. `weights` must hold the dataset dimension.
///
/// # Safety
/// Pointers must be valid for the documented extents; `config` may be null.
#[no_mangle]
pub unsafe extern "C" fn rl_fit(
    dataset: *const RlDataset,
    estimator: i32,
    radius: f64,
    alpha: f64,
    delta: f64,
    kind: i32,
    lambda: f64,
    config: *const RlSolverConfig,
    weights: *mut f64,
    weights_len: usize,
    out_result: *mut RlFitResult,
) -> RlStatus {
    guard(|| {
        let data = handle(dataset)?;
        let config = config.as_ref().map_or_else(SolverConfig::default, solver_config);
        let d = data.dim();
        if weights.is_null() {
            return Err(null("weights"));
        }
        if weights_len != d {
            return Err(Error::DimensionMismatch { expected: d, got: weights_len }.into());
        }
        let result = out(out_result, "out_result")?;
        let domain = Domain::new(d, radius)?;
        let resolve_alpha = || -> Result<f64, Failure> {
            if alpha > 0.0 {
                return Ok(alpha);
            }
            let inputs = BoundInputs {
                n: data.n(),
                d,
                radius,
                delta,
                epsilon: None,
                mean_norm: 0.0,
                mean_sq_norm: 0.0,
                sup_l2_risk: 0.0,
            };
            Ok(default_alpha_regression(&inputs)?)
        };
        let (report, used_alpha) = match estimator {
            RL_ESTIMATOR_TRUNC_L1 => {
                let a = resolve_alpha()?;
                (solve_truncated_l1(data, &domain, &TruncatedL1Spec::new(a, kind_of(kind)?)?, &config)?, a)
            }
            RL_ESTIMATOR_ERM_L1 => (solve_erm_l1(data, &domain, &config)?, f64::NAN),
            RL_ESTIMATOR_MINMAX_L2 => {
                let a = resolve_alpha()?;
                (solve_minmax_l2(data, &domain, &MinMaxSpec::new(lambda, a)?, &config)?.w, a)
            }
            RL_ESTIMATOR_ERM_L2 => (solve_erm_l2(data, &domain)?, f64::NAN),
            other => return Err(invalid(format!("unknown estimator {other}"))),
        };
        std::slice::from_raw_parts_mut(weights, d).copy_from_slice(&report.weights);
        *result = RlFitResult {
            objective_value: report.objective_value,
            alpha: used_alpha,
            saturation_fraction: report.saturation_fraction,
            saturation_warning: report.saturation_warning,
            starts_tried: report.starts_tried,
            best_start_index: report.best_start_index,
        };
        Ok(())
    })
}

fn bound_inputs(b: &RlBoundInputs) -> BoundInputs {
    BoundInputs {
        n: b.n,
        d: b.d,
        radius: b.radius,
        delta: b.delta,
        epsilon: (b.epsilon > 0.0).then_some(b.epsilon),
        mean_norm: b.mean_norm,
        mean_sq_norm: b.mean_sq_norm,
        sup_l2_risk: b.sup_l2_risk,
    }
}

/// Scale minimising the truncated-estimator bound.
///
/// # Safety
/// `inputs` must be valid for reads and `out_value` for writes.
#[no_mangle]
pub unsafe extern "C" fn rl_default_alpha(inputs: *const RlBoundInputs, out_value: *mut f64) -> RlStatus {
    guard(|| {
        let inputs = inputs.as_ref().ok_or_else(|| null("inputs"))?;
        let v = default_alpha_regression(&bound_inputs(inputs))?;
        *out(out_value, "out_value")? = v;
        Ok(())
    })
}

/// Excess-risk bound of the truncated estimator at the default scale.
///
/// # Safety
/// `inputs` must be valid for reads and `out_value` for writes.
#[no_mangle]
pub unsafe extern "C" fn rl_theorem1_bound(inputs: *const RlBoundInputs, out_value: *mut f64) -> RlStatus {
    guard(|| {
        let inputs = inputs.as_ref().ok_or_else(|| null("inputs"))?;
        let v = theorem1_bound(&bound_inputs(inputs))?;
        *out(out_value, "out_value")? = v;
        Ok(())
    })
}

/// Excess-risk bound of l1 ERM for inputs with `|x| <= max_input_norm`.
///
/// # Safety
/// `out_value` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rl_erm_bound(radius: f64, max_input_norm: f64, n: usize, delta: f64, out_value: *mut f64) -> RlStatus {
    guard(|| {
        let v = erm_bound(radius, max_input_norm, n, delta)?;
        *out(out_value, "out_value")? = v;
        Ok(())
    })
}
