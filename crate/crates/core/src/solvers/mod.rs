//! Constrained minimisers for the objectives over the ball `|w| <= B`.
//!
//! * [`solve_erm_l1`]: projected subgradient descent on the empirical l1 risk.
//! * [`solve_truncated_l1`]: multi-start projected normalized gradient descent
//!   on the truncated objective, warm-started from the l1 fit.
//! * [`solve_minmax_l2`]: projected gradient descent-ascent on the min-max payoff.
//! * [`solve_erm_l2`]: exact constrained least squares.
//! * [`grid_search`]: exhaustive oracle for `d <= 2`.
//!
//! The first-order methods finish with a polish phase: constant-step
//! normalized descent from the best point found, halving the step after each
//! short stage. On sharp minima, which the l1 objectives have, this closes the
//! gap that a `1/sqrt(t)` schedule leaves after a few thousand iterations.

mod grid;
mod least_squares;
mod minmax;
mod ngd;
mod subgradient;

pub use grid::grid_search;
pub use least_squares::solve_erm_l2;
pub(crate) use least_squares::least_squares_in_ball;
pub use minmax::{solve_minmax_l2, MinMaxReport};
pub use ngd::solve_truncated_l1;
pub use subgradient::solve_erm_l1;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{project_in_place, Dataset, Weights};
use crate::error::{Error, Result};
use crate::vecops::{axpy, norm};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub iterations: usize,
    pub restarts: usize,
    /// Step-size scale; the ball radius when absent.
    pub step_scale: Option<f64>,
    pub seed: u64,
    pub record_trajectory: bool,
    /// Run the step-halving polish after the main schedule.
    pub polish: bool,
    /// Extra truncated-l1 starts taken from exact fits to `d` random samples,
    /// the best by objective value out of a pool 16 times larger.
    pub elemental_starts: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            iterations: 2000,
            restarts: 16,
            step_scale: None,
            seed: 0,
            record_trajectory: false,
            polish: true,
            elemental_starts: 4,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::invalid("iterations must be at least 1"));
        }
        if self.restarts == 0 {
            return Err(Error::invalid("restarts must be at least 1"));
        }
        if let Some(s) = self.step_scale {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::invalid(format!("step_scale must be positive, got {s}")));
            }
        }
        Ok(())
    }

    pub(crate) fn step_scale_for(&self, radius: f64) -> f64 {
        self.step_scale.unwrap_or(radius)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub weights: Weights,
    pub objective_value: f64,
    pub starts_tried: usize,
    pub best_start_index: usize,
    /// Fraction of samples with `alpha |r_i| >= 1` at the solution; 0 for
    /// estimators without a scale.
    pub saturation_fraction: f64,
    /// Set when more than half of the samples are saturated.
    pub saturation_warning: bool,
    /// Objective value per iteration of the winning start, when requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<Vec<f64>>,
}

/// Deterministic per-restart generator, independent of scheduling.
pub(crate) fn restart_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Uniform draw from the ball of the given radius.
pub(crate) fn uniform_in_ball<R: Rng + ?Sized>(rng: &mut R, d: usize, radius: f64) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let nrm = norm(&v);
        if nrm == 0.0 {
            continue;
        }
        let r = radius * rng.random::<f64>().powf(1.0 / d as f64);
        for x in v.iter_mut() {
            *x *= r / nrm;
        }
        project_in_place(&mut v, radius);
        return v;
    }
}

/// Size of the candidate pool screened per elemental start.
pub(crate) const ELEMENTAL_POOL_FACTOR: usize = 16;

/// Up to `count` weight vectors each interpolating `d` distinct random
/// samples exactly, projected to the ball. Singular subsets are skipped.
pub(crate) fn elemental_candidates<R: Rng + ?Sized>(data: &Dataset, radius: f64, count: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let (n, d) = (data.n(), data.dim());
    let mut out = Vec::with_capacity(count);
    if n < d {
        return out;
    }
    let mut a = vec![0.0; d * d];
    let mut b = vec![0.0; d];
    for _ in 0..4 * count {
        if out.len() == count {
            break;
        }
        let rows = rand::seq::index::sample(rng, n, d);
        for (k, i) in rows.iter().enumerate() {
            a[k * d..(k + 1) * d].copy_from_slice(data.row(i));
            b[k] = data.response(i);
        }
        if let Some(mut w) = solve_square(&mut a, &mut b, d) {
            project_in_place(&mut w, radius);
            out.push(w);
        }
    }
    out
}

/// Gaussian elimination with partial pivoting; `None` for (near-)singular systems.
fn solve_square(a: &mut [f64], b: &mut [f64], d: usize) -> Option<Vec<f64>> {
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    for col in 0..d {
        let pivot = (col..d).max_by(|&i, &j| a[i * d + col].abs().total_cmp(&a[j * d + col].abs()))?;
        if a[pivot * d + col].abs() <= 1e-12 * scale {
            return None;
        }
        if pivot != col {
            for k in 0..d {
                a.swap(pivot * d + k, col * d + k);
            }
            b.swap(pivot, col);
        }
        for row in col + 1..d {
            let f = a[row * d + col] / a[col * d + col];
            for k in col..d {
                a[row * d + k] -= f * a[col * d + k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut w = vec![0.0; d];
    for row in (0..d).rev() {
        let tail: f64 = (row + 1..d).map(|k| a[row * d + k] * w[k]).sum();
        w[row] = (b[row] - tail) / a[row * d + row];
    }
    w.iter().all(|v| v.is_finite()).then_some(w)
}

/// Running best point of a descent run.
pub(crate) struct BestPoint {
    pub w: Vec<f64>,
    pub value: f64,
}

impl BestPoint {
    pub fn new(w: &[f64], value: f64) -> Self {
        BestPoint { w: w.to_vec(), value }
    }

    #[inline]
    pub fn offer(&mut self, w: &[f64], value: f64) {
        if value < self.value {
            self.value = value;
            self.w.copy_from_slice(w);
        }
    }
}

const POLISH_STAGE_LEN: usize = 25;
const POLISH_MIN_RELATIVE_STEP: f64 = 1e-10;

/// Constant-step projected normalized descent from `best.w`, halving the step
/// each stage until it falls below `1e-10 * radius`. Only ever improves `best`.
pub(crate) fn polish<F>(
    mut eval: F,
    best: &mut BestPoint,
    radius: f64,
    initial_step: f64,
    mut trajectory: Option<&mut Vec<f64>>,
) where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let d = best.w.len();
    let mut w = vec![0.0; d];
    let mut g = vec![0.0; d];
    let mut step = initial_step;
    while step >= POLISH_MIN_RELATIVE_STEP * radius {
        w.copy_from_slice(&best.w);
        for _ in 0..POLISH_STAGE_LEN {
            let value = eval(&w, &mut g);
            best.offer(&w, value);
            if let Some(t) = trajectory.as_deref_mut() {
                t.push(value);
            }
            let gn = norm(&g);
            if gn == 0.0 || !gn.is_finite() {
                break;
            }
            axpy(-step / gn, &g, &mut w);
            project_in_place(&mut w, radius);
        }
        let value = eval(&w, &mut g);
        best.offer(&w, value);
        step *= 0.5;
    }
}
