use crate::data::{project_in_place, Dataset, Domain, Weights};
use crate::error::Result;
use crate::objectives::l1_value_and_subgradient;

use super::{polish, BestPoint, SolveReport, SolverConfig};

/// Empirical l1 risk minimisation over the ball by projected subgradient
/// descent from the origin with steps `step_scale / (G sqrt(t))`, where `G`
/// is the largest feature norm. Returns the best iterate seen.
pub fn solve_erm_l1(data: &Dataset, domain: &Domain, config: &SolverConfig) -> Result<SolveReport> {
    config.validate()?;
    domain.check_dataset(data)?;
    let d = data.dim();
    let radius = domain.radius();
    let mut trajectory = config.record_trajectory.then(Vec::new);

    let mut w = vec![0.0; d];
    let mut g = vec![0.0; d];
    let first = l1_value_and_subgradient(data, &w, &mut g);
    let mut best = BestPoint::new(&w, first);
    let bound = data.max_row_norm();

    if bound > 0.0 {
        let scale = config.step_scale_for(radius) / bound;
        for t in 1..=config.iterations {
            let value = l1_value_and_subgradient(data, &w, &mut g);
            best.offer(&w, value);
            if let Some(tr) = trajectory.as_mut() {
                tr.push(value);
            }
            let eta = scale / (t as f64).sqrt();
            for (wi, gi) in w.iter_mut().zip(&g) {
                *wi -= eta * gi;
            }
            project_in_place(&mut w, radius);
        }
        let value = l1_value_and_subgradient(data, &w, &mut g);
        best.offer(&w, value);

        if config.polish {
            let step = config.step_scale_for(radius) / (config.iterations as f64).sqrt();
            polish(
                |w, g| l1_value_and_subgradient(data, w, g),
                &mut best,
                radius,
                step,
                trajectory.as_mut(),
            );
        }
    }

    let objective_value = crate::data::empirical_risk_unchecked(data, &best.w, crate::data::LossKind::L1);
    Ok(SolveReport {
        weights: Weights::new(best.w),
        objective_value,
        starts_tried: 1,
        best_start_index: 0,
        saturation_fraction: 0.0,
        saturation_warning: false,
        trajectory,
    })
}
