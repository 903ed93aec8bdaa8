//! Monte Carlo harness: excess-risk scaling, bound coverage and estimator
//! comparisons on synthetic tasks.
//!
//! Every `(n, trial)` cell draws its data, solver restarts and risk samples
//! from seeds derived from `(base_seed, n, trial)` alone, so results do not
//! depend on how many worker threads run them.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Domain;
use crate::error::{Error, Result};
use crate::objectives::{MinMaxSpec, TruncatedL1Spec};
use crate::solvers::{solve_erm_l1, solve_erm_l2, solve_minmax_l2, solve_truncated_l1, SolverConfig};
use crate::synth::{excess_l1_risk, generate, InputDist, RiskMethod, TaskMoments, TaskSpec};
use crate::truncation::TruncationKind;
use crate::tuning::{default_alpha_regression, erm_bound, theorem1_bound, theorem1_bound_at_alpha, BoundInputs};

/// How the scale `alpha` of a truncated estimator is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum AlphaMode {
    /// `sqrt((d log(6Bn) + 2 log(1/delta)) / n)`, the bound-minimising choice.
    #[default]
    Corollary1,
    Fixed { alpha: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum EstimatorSpec {
    TruncatedL1 {
        #[serde(default)]
        truncation: TruncationKind,
        #[serde(default)]
        alpha_mode: AlphaMode,
    },
    ErmL1,
    MinMaxL2 {
        lambda: f64,
        #[serde(default)]
        alpha_mode: AlphaMode,
    },
    ErmL2,
}

impl EstimatorSpec {
    pub fn id(&self) -> String {
        let alpha_suffix = |mode: &AlphaMode| match mode {
            AlphaMode::Corollary1 => String::new(),
            AlphaMode::Fixed { alpha } => format!(":alpha={alpha}"),
        };
        match self {
            EstimatorSpec::TruncatedL1 { truncation, alpha_mode } => {
                format!("trunc-l1:{}{}", truncation.name(), alpha_suffix(alpha_mode))
            }
            EstimatorSpec::ErmL1 => "erm-l1".into(),
            EstimatorSpec::MinMaxL2 { lambda, alpha_mode } => format!("minmax-l2:lambda={lambda}{}", alpha_suffix(alpha_mode)),
            EstimatorSpec::ErmL2 => "erm-l2".into(),
        }
    }

    fn validate(&self) -> Result<()> {
        let check_mode = |mode: &AlphaMode| match *mode {
            AlphaMode::Fixed { alpha } if !(alpha > 0.0 && alpha.is_finite()) => {
                Err(Error::invalid(format!("fixed alpha must be positive, got {alpha}")))
            }
            _ => Ok(()),
        };
        match self {
            EstimatorSpec::TruncatedL1 { alpha_mode, .. } => check_mode(alpha_mode),
            EstimatorSpec::MinMaxL2 { lambda, alpha_mode } => {
                if !(*lambda >= 0.0 && lambda.is_finite()) {
                    return Err(Error::invalid(format!("lambda must be non-negative, got {lambda}")));
                }
                check_mode(alpha_mode)
            }
            _ => Ok(()),
        }
    }
}

/// Risk evaluation used by the harness; Monte Carlo seeds are derived per trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum RiskSpec {
    Analytic,
    MonteCarlo { samples: usize },
}

impl Default for RiskSpec {
    fn default() -> Self {
        RiskSpec::MonteCarlo { samples: 1_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub task: TaskSpec,
    pub estimators: Vec<EstimatorSpec>,
    pub n_grid: Vec<usize>,
    pub trials: usize,
    pub delta: f64,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub risk_method: RiskSpec,
    /// Solver settings for every estimator; the per-trial seed overrides `seed`.
    #[serde(default)]
    pub solver: Option<SolverConfig>,
    /// Record wall-clock time per fit. Off by default so that output is reproducible.
    #[serde(default)]
    pub record_timing: bool,
}

const MAX_TRIALS: usize = 1 << 24;
const MAX_N: usize = 1 << 40;

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        self.task.validate()?;
        if self.estimators.is_empty() {
            return Err(Error::invalid("at least one estimator is required"));
        }
        for e in &self.estimators {
            e.validate()?;
        }
        if self.n_grid.is_empty() {
            return Err(Error::invalid("n_grid must not be empty"));
        }
        if self.n_grid[0] == 0 || self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("n_grid must be positive and strictly increasing"));
        }
        if *self.n_grid.last().unwrap() >= MAX_N {
            return Err(Error::invalid("n_grid entries are too large"));
        }
        if self.trials == 0 || self.trials >= MAX_TRIALS {
            return Err(Error::invalid(format!("trials must lie in [1, {MAX_TRIALS}), got {}", self.trials)));
        }
        if !(self.delta > 0.0 && self.delta < 0.5) {
            return Err(Error::invalid(format!("delta must lie in (0, 1/2), got {}", self.delta)));
        }
        if let RiskSpec::MonteCarlo { samples } = self.risk_method {
            if samples < 2 {
                return Err(Error::invalid("Monte Carlo risk needs at least 2 samples"));
            }
        }
        if let Some(cfg) = &self.solver {
            cfg.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub estimator: String,
    pub n: usize,
    pub trial: usize,
    pub seed: u64,
    pub weights: Vec<f64>,
    pub excess_risk: f64,
    /// Monte Carlo standard error of `excess_risk`.
    pub excess_std_error: Option<f64>,
    pub alpha_used: Option<f64>,
    pub bound_value: Option<f64>,
    pub wall_time: Option<f64>,
}

/// SplitMix64 finaliser; a bijection on `u64`.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `t` at sample size `n`; injective in `(n, t)` for `t < 2^24`.
pub fn trial_seed(base_seed: u64, n: usize, t: usize) -> u64 {
    mix(((n as u64) << 24 | t as u64) ^ mix(base_seed))
}

fn bound_inputs(spec: &ExperimentSpec, n: usize, moments: Option<&TaskMoments>) -> BoundInputs {
    let (mean_norm, mean_sq_norm, sup_l2_risk) = moments.map_or((0.0, 0.0, 0.0), |m| (m.mean_norm, m.mean_sq_norm, m.sup_l2_risk));
    BoundInputs {
        n,
        d: spec.task.d,
        radius: spec.task.radius,
        delta: spec.delta,
        epsilon: None,
        mean_norm,
        mean_sq_norm,
        sup_l2_risk,
    }
}

fn resolve_alpha(spec: &ExperimentSpec, n: usize, mode: AlphaMode) -> Result<f64> {
    match mode {
        AlphaMode::Corollary1 => default_alpha_regression(&bound_inputs(spec, n, None)),
        AlphaMode::Fixed { alpha } => Ok(alpha),
    }
}

fn run_cell(spec: &ExperimentSpec, n: usize, t: usize) -> Result<Vec<TrialResult>> {
    let seed = trial_seed(spec.base_seed, n, t);
    let data = generate(&spec.task, n, seed)?;
    let domain = Domain::new(spec.task.d, spec.task.radius)?;
    let solver = SolverConfig {
        seed: mix(seed.wrapping_add(1)),
        ..spec.solver.unwrap_or_default()
    };
    let risk = match spec.risk_method {
        RiskSpec::Analytic => RiskMethod::Analytic,
        RiskSpec::MonteCarlo { samples } => RiskMethod::MonteCarlo {
            samples,
            seed: mix(seed.wrapping_add(2)),
        },
    };
    let moments = spec.task.moments();
    let true_moments = moments.all_finite().then_some(&moments);

    let mut out = Vec::with_capacity(spec.estimators.len());
    for est in &spec.estimators {
        let start = Instant::now();
        let (weights, alpha, bound) = match *est {
            EstimatorSpec::TruncatedL1 { truncation, alpha_mode } => {
                let alpha = resolve_alpha(spec, n, alpha_mode)?;
                let fit = solve_truncated_l1(&data, &domain, &TruncatedL1Spec::new(alpha, truncation)?, &solver)?;
                let bound = match (true_moments, alpha_mode) {
                    (Some(m), AlphaMode::Corollary1) => Some(theorem1_bound(&bound_inputs(spec, n, Some(m)))?),
                    (Some(m), AlphaMode::Fixed { alpha }) => Some(theorem1_bound_at_alpha(&bound_inputs(spec, n, Some(m)), alpha)?),
                    (None, _) => None,
                };
                (fit.weights, Some(alpha), bound)
            }
            EstimatorSpec::ErmL1 => {
                let fit = solve_erm_l1(&data, &domain, &solver)?;
                let bound = match spec.task.input_dist {
                    InputDist::UniformBall { radius } => Some(erm_bound(spec.task.radius, radius, n, spec.delta)?),
                    _ => None,
                };
                (fit.weights, None, bound)
            }
            EstimatorSpec::MinMaxL2 { lambda, alpha_mode } => {
                let alpha = resolve_alpha(spec, n, alpha_mode)?;
                let fit = solve_minmax_l2(&data, &domain, &MinMaxSpec::new(lambda, alpha)?, &solver)?;
                (fit.w.weights, Some(alpha), None)
            }
            EstimatorSpec::ErmL2 => (solve_erm_l2(&data, &domain)?.weights, None, None),
        };
        let elapsed = start.elapsed().as_secs_f64();
        let excess = excess_l1_risk(&spec.task, &weights, risk)?;
        out.push(TrialResult {
            estimator: est.id(),
            n,
            trial: t,
            seed,
            weights: weights.into_inner(),
            excess_risk: excess.value,
            excess_std_error: excess.std_error,
            alpha_used: alpha,
            bound_value: bound,
            wall_time: spec.record_timing.then_some(elapsed),
        });
    }
    Ok(out)
}

/// Runs every `(n, trial)` cell on the current rayon pool. Results are ordered
/// by estimator (in spec order), then `n`, then trial index.
pub fn run_trials(spec: &ExperimentSpec) -> Result<Vec<TrialResult>> {
    spec.validate()?;
    let cells: Vec<(usize, usize)> = spec
        .n_grid
        .iter()
        .flat_map(|&n| (0..spec.trials).map(move |t| (n, t)))
        .collect();
    let per_cell: Vec<Vec<TrialResult>> = cells
        .par_iter()
        .map(|&(n, t)| run_cell(spec, n, t))
        .collect::<Result<_>>()?;

    let k = spec.estimators.len();
    let mut results = Vec::with_capacity(per_cell.len() * k);
    for e in 0..k {
        for cell in &per_cell {
            results.push(cell[e].clone());
        }
    }
    Ok(results)
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingCell {
    pub estimator: String,
    pub n: usize,
    pub trials: usize,
    pub q05: f64,
    pub median: f64,
    pub q95: f64,
    /// Median Monte Carlo standard error across the cell's trials.
    pub median_std_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogLogFit {
    pub slope: f64,
    /// Absent when only two points remain.
    pub stderr: Option<f64>,
    pub points_used: usize,
    /// Indices of input points dropped for non-positive values.
    pub dropped: Vec<usize>,
}

/// Ordinary least squares of `log value` on `log n`.
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<LogLogFit> {
    let mut dropped = Vec::new();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, &(n, v)) in points.iter().enumerate() {
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::invalid(format!("sample sizes must be positive, got {n}")));
        }
        if v > 0.0 && v.is_finite() {
            xs.push(n.ln());
            ys.push(v.ln());
        } else {
            dropped.push(i);
        }
    }
    let m = xs.len();
    if m < 2 {
        return Err(Error::invalid(format!("need at least 2 positive points, have {m}")));
    }
    let mf = m as f64;
    let mx = xs.iter().sum::<f64>() / mf;
    let my = ys.iter().sum::<f64>() / mf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("sample sizes must not all be equal"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let stderr = (m > 2).then(|| {
        let intercept = my - slope * mx;
        let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
        (rss / (mf - 2.0) / sxx).sqrt()
    });
    Ok(LogLogFit {
        slope,
        stderr,
        points_used: m,
        dropped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub estimator: String,
    pub fit: LogLogFit,
    /// Sample sizes whose non-positive Monte Carlo median was replaced by its standard error.
    pub clamped: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingResult {
    pub cells: Vec<ScalingCell>,
    pub slopes: Vec<SlopeFit>,
}

/// Minimum number of grid points for a slope to be reported.
pub const MIN_SLOPE_POINTS: usize = 4;

fn group_by_estimator(results: &[TrialResult]) -> Vec<(String, Vec<&TrialResult>)> {
    let mut groups: Vec<(String, Vec<&TrialResult>)> = Vec::new();
    for r in results {
        match groups.iter_mut().find(|(id, _)| *id == r.estimator) {
            Some((_, g)) => g.push(r),
            None => groups.push((r.estimator.clone(), vec![r])),
        }
    }
    groups
}

fn sorted_finite(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Per-`(estimator, n)` quantiles, plus a log-log slope of the medians for
/// each estimator measured at [`MIN_SLOPE_POINTS`] or more sample sizes.
pub fn scaling_summary(results: &[TrialResult]) -> Result<ScalingResult> {
    let mut cells = Vec::new();
    let mut slopes = Vec::new();
    for (estimator, group) in group_by_estimator(results) {
        let mut ns: Vec<usize> = group.iter().map(|r| r.n).collect();
        ns.sort_unstable();
        ns.dedup();
        let mut points = Vec::with_capacity(ns.len());
        let mut clamped = Vec::new();
        for &n in &ns {
            let here: Vec<&&TrialResult> = group.iter().filter(|r| r.n == n).collect();
            let risks = sorted_finite(here.iter().map(|r| r.excess_risk));
            let errors = sorted_finite(here.iter().filter_map(|r| r.excess_std_error));
            let median_std_error = (!errors.is_empty()).then(|| quantile(&errors, 0.5));
            let cell = ScalingCell {
                estimator: estimator.clone(),
                n,
                trials: risks.len(),
                q05: quantile(&risks, 0.05),
                median: quantile(&risks, 0.5),
                q95: quantile(&risks, 0.95),
                median_std_error,
            };
            let mut value = cell.median;
            if value <= 0.0 {
                if let Some(se) = median_std_error.filter(|se| *se > 0.0) {
                    value = se;
                    clamped.push(n);
                }
            }
            points.push((n as f64, value));
            cells.push(cell);
        }
        if ns.len() >= MIN_SLOPE_POINTS {
            slopes.push(SlopeFit {
                estimator,
                fit: fit_loglog_slope(&points)?,
                clamped,
            });
        }
    }
    Ok(ScalingResult { cells, slopes })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundSource {
    /// Truncated estimator bound, holding with probability `1 - 2 delta`.
    Theorem1,
    /// ERM bound for bounded inputs, holding with probability `1 - delta`.
    Theorem2,
}

impl BoundSource {
    pub fn required(self, delta: f64) -> f64 {
        match self {
            BoundSource::Theorem1 => 1.0 - 2.0 * delta,
            BoundSource::Theorem2 => 1.0 - delta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub coverage: f64,
    pub required: f64,
    pub trials: usize,
}

impl Coverage {
    pub fn holds(&self) -> bool {
        self.coverage >= self.required
    }
}

/// Fraction of results whose excess risk is at most their bound.
pub fn coverage_check(results: &[TrialResult], source: BoundSource, delta: f64) -> Result<Coverage> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    if results.is_empty() {
        return Err(Error::invalid("no results to check"));
    }
    let mut covered = 0usize;
    for r in results {
        let bound = r.bound_value.ok_or_else(|| {
            Error::invalid(format!("{} at n={} trial {} carries no bound", r.estimator, r.n, r.trial))
        })?;
        if r.excess_risk <= bound {
            covered += 1;
        }
    }
    Ok(Coverage {
        coverage: covered as f64 / results.len() as f64,
        required: source.required(delta),
        trials: results.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Scaling,
    Coverage,
    Compare,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scaling" => Ok(Mode::Scaling),
            "coverage" => Ok(Mode::Coverage),
            "compare" => Ok(Mode::Compare),
            other => Err(Error::invalid(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub estimator: String,
    pub n: usize,
    pub source: BoundSource,
    #[serde(flatten)]
    pub coverage: Coverage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mode: Mode,
    pub cells: Vec<ScalingCell>,
    #[serde(default)]
    pub slopes: Vec<SlopeFit>,
    #[serde(default)]
    pub coverage: Vec<CoverageRow>,
    /// Reasons the task lies outside the regime where the bounds apply.
    #[serde(default)]
    pub scope_warnings: Vec<String>,
}

/// Aggregates results for the given mode. Coverage rows are produced for
/// every `(estimator, n)` whose results all carry a bound.
pub fn summarize(spec: &ExperimentSpec, results: &[TrialResult], mode: Mode) -> Result<Summary> {
    let scaling = scaling_summary(results)?;
    let mut coverage = Vec::new();
    if mode == Mode::Coverage {
        for (est, (id, group)) in spec.estimators.iter().zip(group_by_estimator(results)) {
            let source = match est {
                EstimatorSpec::TruncatedL1 { .. } => BoundSource::Theorem1,
                EstimatorSpec::ErmL1 => BoundSource::Theorem2,
                _ => continue,
            };
            for &n in &spec.n_grid {
                let here: Vec<TrialResult> = group.iter().filter(|r| r.n == n).map(|r| (*r).clone()).collect();
                if here.is_empty() || here.iter().any(|r| r.bound_value.is_none()) {
                    continue;
                }
                coverage.push(CoverageRow {
                    estimator: id.clone(),
                    n,
                    source,
                    coverage: coverage_check(&here, source, spec.delta)?,
                });
            }
        }
    }
    Ok(Summary {
        mode,
        cells: scaling.cells,
        slopes: if mode == Mode::Scaling { scaling.slopes } else { Vec::new() },
        coverage,
        scope_warnings: spec.task.scope_warnings(),
    })
}

/// Header of the trial CSV.
pub const CSV_HEADER: [&str; 7] = ["estimator", "n", "trial", "excess_risk", "alpha", "bound", "seconds"];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_results_csv_to<W: Write>(results: &[TrialResult], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let to_err = |e: csv::Error| Error::Internal(format!("csv write failed: {e}"));
    w.write_record(CSV_HEADER).map_err(to_err)?;
    for r in results {
        w.write_record([
            r.estimator.clone(),
            r.n.to_string(),
            r.trial.to_string(),
            r.excess_risk.to_string(),
            opt(r.alpha_used),
            opt(r.bound_value),
            opt(r.wall_time),
        ])
        .map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::Internal(format!("csv flush failed: {e}")))?;
    Ok(())
}

pub fn write_results_csv(results: &[TrialResult], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_results_csv_to(results, BufWriter::new(file)).map_err(|e| match e {
        Error::Internal(msg) => Error::io(path, std::io::Error::other(msg)),
        other => other,
    })
}

/// Pretty-printed JSON of any result type.
pub fn write_json<T: Serialize + ?Sized>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::io(path, e.into()))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}
