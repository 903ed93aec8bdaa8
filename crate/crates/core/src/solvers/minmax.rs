use serde::{Deserialize, Serialize};

use crate::data::{project_in_place, Dataset, Domain, Weights};
use crate::error::Result;
use crate::objectives::{minmax_payoff, minmax_value_and_gradients, MinMaxSpec};
use crate::vecops::norm_sq;

use super::{restart_rng, uniform_in_ball, SolveReport, SolverConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxReport {
    /// The minimising player; `objective_value` is the certificate below.
    pub w: SolveReport,
    /// Last iterate of the maximising player.
    pub u: Weights,
    /// `max` of `payoff(w, u')` over the challenger pool: the final `u`, the
    /// origin, `w` itself and `restarts` seeded uniform draws from the ball.
    pub certificate: f64,
}

/// Simultaneous projected gradient descent-ascent from `w = u = 0`.
///
/// Steps are `step_scale / (L sqrt(t))` for both players, with
/// `L = 2 lambda + 2 mean |x_i|^2` bounding the curvature of the payoff.
pub fn solve_minmax_l2(data: &Dataset, domain: &Domain, spec: &MinMaxSpec, config: &SolverConfig) -> Result<MinMaxReport> {
    config.validate()?;
    spec.validate()?;
    domain.check_dataset(data)?;
    let d = data.dim();
    let radius = domain.radius();
    let mean_sq = data.features().chunks_exact(d).map(norm_sq).sum::<f64>() / data.n() as f64;
    let curvature = 2.0 * spec.lambda + 2.0 * mean_sq;

    let mut w = vec![0.0; d];
    let mut u = vec![0.0; d];
    let mut gw = vec![0.0; d];
    let mut gu = vec![0.0; d];
    let mut trajectory = config.record_trajectory.then(Vec::new);

    if curvature > 0.0 {
        let scale = config.step_scale_for(radius) / curvature;
        for t in 1..=config.iterations {
            let value = minmax_value_and_gradients(data, &w, &u, spec, &mut gw, &mut gu);
            if let Some(tr) = trajectory.as_mut() {
                tr.push(value);
            }
            let eta = scale / (t as f64).sqrt();
            for j in 0..d {
                w[j] -= eta * gw[j];
                u[j] += eta * gu[j];
            }
            project_in_place(&mut w, radius);
            project_in_place(&mut u, radius);
        }
    }

    let mut pool = vec![u.clone(), vec![0.0; d], w.clone()];
    let mut rng = restart_rng(config.seed, u64::MAX);
    for _ in 0..config.restarts {
        pool.push(uniform_in_ball(&mut rng, d, radius));
    }
    let certificate = pool
        .iter()
        .map(|c| minmax_payoff(data, &w, c, spec))
        .fold(f64::NEG_INFINITY, f64::max);

    Ok(MinMaxReport {
        w: SolveReport {
            weights: Weights::new(w),
            objective_value: certificate,
            starts_tried: 1,
            best_start_index: 0,
            saturation_fraction: 0.0,
            saturation_warning: false,
            trajectory,
        },
        u: Weights::new(u),
        certificate,
    })
}
