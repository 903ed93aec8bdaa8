use rayon::prelude::*;

use crate::data::{project_in_place, Dataset, Domain, Weights};
use crate::error::Result;
use crate::objectives::{saturation_fraction, truncated_value, truncated_value_and_gradient, TruncatedL1Spec};
use crate::vecops::{axpy, norm};

use super::{
    elemental_candidates, polish, restart_rng, solve_erm_l1, uniform_in_ball, BestPoint, SolveReport, SolverConfig,
    ELEMENTAL_POOL_FACTOR,
};

struct RunResult {
    best: BestPoint,
    trajectory: Option<Vec<f64>>,
}

/// Multi-start projected normalized gradient descent on the truncated l1
/// objective.
///
/// Start 0 is the origin, start 1 the empirical l1 fit, and the remaining
/// `restarts - 2` are drawn uniformly from the ball using a generator derived
/// from `(seed, start index)`. Each run steps `step_scale / sqrt(t)` along
/// the unit gradient and keeps its best iterate; the best run wins, the
/// lowest start index breaking ties.
pub fn solve_truncated_l1(
    data: &Dataset,
    domain: &Domain,
    spec: &TruncatedL1Spec,
    config: &SolverConfig,
) -> Result<SolveReport> {
    config.validate()?;
    spec.validate()?;
    domain.check_dataset(data)?;
    let d = data.dim();
    let radius = domain.radius();

    let mut starts: Vec<Vec<f64>> = vec![vec![0.0; d]];
    if config.restarts >= 2 {
        let warm = solve_erm_l1(
            data,
            domain,
            &SolverConfig {
                record_trajectory: false,
                ..*config
            },
        )?;
        starts.push(warm.weights.into_inner());
    }
    for index in 2..config.restarts {
        let mut rng = restart_rng(config.seed, index as u64);
        starts.push(uniform_in_ball(&mut rng, d, radius));
    }

    if config.elemental_starts > 0 {
        let mut rng = restart_rng(config.seed, u64::MAX - 1);
        let pool = elemental_candidates(data, radius, config.elemental_starts * ELEMENTAL_POOL_FACTOR, &mut rng);
        let mut scored: Vec<(f64, usize)> = pool.iter().enumerate().map(|(i, w)| (truncated_value(data, w, spec), i)).collect();
        scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        starts.extend(scored.iter().take(config.elemental_starts).map(|&(_, i)| pool[i].clone()));
    }

    let runs: Vec<RunResult> = starts
        .par_iter()
        .map(|start| run_ngd(data, radius, spec, config, start))
        .collect();

    let (best_index, best_run) = runs
        .iter()
        .enumerate()
        .fold(None::<(usize, &RunResult)>, |acc, (i, r)| match acc {
            Some((_, b)) if b.best.value <= r.best.value => acc,
            _ => Some((i, r)),
        })
        .expect("at least one start");

    let w = best_run.best.w.clone();
    let objective_value = truncated_value(data, &w, spec);
    let saturation = saturation_fraction(data, &w, spec.alpha);
    Ok(SolveReport {
        weights: Weights::new(w),
        objective_value,
        starts_tried: runs.len(),
        best_start_index: best_index,
        saturation_fraction: saturation,
        saturation_warning: saturation > 0.5,
        trajectory: best_run.trajectory.clone(),
    })
}

fn run_ngd(data: &Dataset, radius: f64, spec: &TruncatedL1Spec, config: &SolverConfig, start: &[f64]) -> RunResult {
    let d = start.len();
    let mut trajectory = config.record_trajectory.then(Vec::new);
    let mut w = start.to_vec();
    let mut g = vec![0.0; d];
    let mut best = BestPoint::new(&w, truncated_value(data, &w, spec));
    let scale = config.step_scale_for(radius);

    for t in 1..=config.iterations {
        let value = truncated_value_and_gradient(data, &w, spec, &mut g);
        best.offer(&w, value);
        if let Some(tr) = trajectory.as_mut() {
            tr.push(value);
        }
        let gn = norm(&g);
        if gn == 0.0 {
            // nothing to normalise; the iterate would never move again
            break;
        }
        axpy(-scale / ((t as f64).sqrt() * gn), &g, &mut w);
        project_in_place(&mut w, radius);
    }
    let value = truncated_value_and_gradient(data, &w, spec, &mut g);
    best.offer(&w, value);

    if config.polish {
        let step = scale / (config.iterations as f64).sqrt();
        polish(
            |w, g| truncated_value_and_gradient(data, w, spec, g),
            &mut best,
            radius,
            step,
            trajectory.as_mut(),
        );
    }
    RunResult { best, trajectory }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{empirical_risk, LossKind};
    use crate::objectives::truncated_l1_value;
    use crate::solvers::grid_search;
    use crate::truncation::TruncationKind;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StudentT;

    fn noisy_data(seed: u64, n: usize, d: usize, w0: &[f64]) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = StudentT::new(2.5).unwrap();
        let x: Vec<f64> = (0..n * d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let y: Vec<f64> = x
            .chunks(d)
            .map(|r| r.iter().zip(w0).map(|(a, b)| a * b).sum::<f64>() + rng.sample(t))
            .collect();
        Dataset::new(d, x, y).unwrap()
    }

    #[test]
    fn tiny_alpha_matches_the_l1_fit() {
        let data = noisy_data(4, 100, 2, &[0.5, -0.25]);
        let dom = Domain::new(2, 1.0).unwrap();
        let cfg = SolverConfig::default();
        for kind in TruncationKind::ALL {
            let spec = TruncatedL1Spec::new(1e-9, kind).unwrap();
            let trunc = solve_truncated_l1(&data, &dom, &spec, &cfg).unwrap();
            let erm = solve_erm_l1(&data, &dom, &cfg).unwrap();
            let at_erm = truncated_l1_value(&data, &erm.weights, &spec).unwrap();
            assert!((trunc.objective_value - at_erm).abs() < 1e-4);
            assert!((trunc.objective_value - empirical_risk(&data, &trunc.weights, LossKind::L1).unwrap()).abs() < 1e-4);
        }
    }

    #[test]
    fn one_dimensional_grid_oracle() {
        let dom = Domain::new(1, 2.0).unwrap();
        for (seed, alpha) in [(1, 0.05), (2, 0.5), (3, 2.0), (4, 8.0)] {
            let data = noisy_data(seed, 60, 1, &[1.2]);
            for kind in TruncationKind::ALL {
                let spec = TruncatedL1Spec::new(alpha, kind).unwrap();
                let rep = solve_truncated_l1(&data, &dom, &spec, &SolverConfig::default()).unwrap();
                let g = grid_search(|w| truncated_value(&data, w, &spec), &dom, 100_000).unwrap();
                let gmin = truncated_value(&data, &g, &spec);
                assert!(rep.objective_value <= gmin + 1e-3, "{kind} alpha {alpha}: {} vs {gmin}", rep.objective_value);
            }
        }
    }

    #[test]
    fn realizable_data_reaches_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let w0 = [0.3, 0.4];
        let x: Vec<f64> = (0..100).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = x.chunks(2).map(|r| r[0] * w0[0] + r[1] * w0[1]).collect();
        let data = Dataset::new(2, x, y).unwrap();
        let spec = TruncatedL1Spec::new(0.7, TruncationKind::LogQuadratic).unwrap();
        let rep = solve_truncated_l1(&data, &Domain::new(2, 1.0).unwrap(), &spec, &SolverConfig::default()).unwrap();
        assert!(rep.objective_value <= 1e-6, "{}", rep.objective_value);
    }

    #[test]
    fn report_is_consistent_and_deterministic() {
        let data = noisy_data(9, 80, 3, &[0.2, 0.1, -0.6]);
        let dom = Domain::new(3, 1.5).unwrap();
        let spec = TruncatedL1Spec::new(0.4, TruncationKind::SaturatingOdd).unwrap();
        let cfg = SolverConfig { seed: 77, iterations: 300, ..Default::default() };
        let a = solve_truncated_l1(&data, &dom, &spec, &cfg).unwrap();
        let b = solve_truncated_l1(&data, &dom, &spec, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.starts_tried, 20);
        assert!(a.weights.norm() <= 1.5 + 1e-9);
        let v = truncated_l1_value(&data, &a.weights, &spec).unwrap();
        assert!((v - a.objective_value).abs() <= 1e-10);
        // best-iterate guarantee against every start
        assert!(a.objective_value <= truncated_value(&data, &[0.0; 3], &spec));
        for i in 2..16 {
            let s = uniform_in_ball(&mut restart_rng(77, i), 3, 1.5);
            assert!(a.objective_value <= truncated_value(&data, &s, &spec));
        }
    }

    #[test]
    fn flags_heavy_saturation() {
        let data = noisy_data(12, 50, 1, &[0.0]);
        let spec = TruncatedL1Spec::new(100.0, TruncationKind::SaturatingOdd).unwrap();
        let rep = solve_truncated_l1(&data, &Domain::new(1, 1.0).unwrap(), &spec, &SolverConfig::default()).unwrap();
        assert!(rep.saturation_fraction > 0.5);
        assert!(rep.saturation_warning);
    }

    #[test]
    fn single_restart_uses_only_the_origin() {
        let data = noisy_data(13, 30, 2, &[0.1, 0.1]);
        let spec = TruncatedL1Spec::new(0.5, TruncationKind::LogQuadratic).unwrap();
        let cfg = SolverConfig { restarts: 1, elemental_starts: 0, ..Default::default() };
        let rep = solve_truncated_l1(&data, &Domain::new(2, 1.0).unwrap(), &spec, &cfg).unwrap();
        assert_eq!((rep.starts_tried, rep.best_start_index), (1, 0));
        assert!(TruncatedL1Spec::new(-1.0, TruncationKind::LogQuadratic).is_err());
    }
}
