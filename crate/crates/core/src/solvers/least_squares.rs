use crate::data::{empirical_risk_unchecked, project_in_place, Dataset, Domain, LossKind, Weights};
use crate::error::Result;
use crate::vecops::norm;

use super::SolveReport;

/// Least squares restricted to the ball, solved exactly.
///
/// If the unconstrained normal equations have a solution inside the ball it
/// is returned; otherwise the ridge path `(A + mu I)^{-1} b` is bisected on
/// `mu` until it meets the boundary.
pub fn solve_erm_l2(data: &Dataset, domain: &Domain) -> Result<SolveReport> {
    domain.check_dataset(data)?;
    let w = least_squares_in_ball(data, domain.radius());
    let objective_value = empirical_risk_unchecked(data, &w, LossKind::L2);
    Ok(SolveReport {
        weights: Weights::new(w),
        objective_value,
        starts_tried: 1,
        best_start_index: 0,
        saturation_fraction: 0.0,
        saturation_warning: false,
        trajectory: None,
    })
}

pub(crate) fn least_squares_in_ball(data: &Dataset, radius: f64) -> Vec<f64> {
    let d = data.dim();
    let n = data.n() as f64;
    // A = X^T X / n, b = X^T y / n
    let mut a = vec![0.0; d * d];
    let mut b = vec![0.0; d];
    for (x, y) in data.rows() {
        for i in 0..d {
            b[i] += x[i] * y;
            for j in 0..=i {
                a[i * d + j] += x[i] * x[j];
            }
        }
    }
    for i in 0..d {
        b[i] /= n;
        for j in 0..=i {
            a[i * d + j] /= n;
            a[j * d + i] = a[i * d + j];
        }
    }
    let b_norm = norm(&b);
    if b_norm == 0.0 {
        return vec![0.0; d];
    }
    let trace: f64 = (0..d).map(|i| a[i * d + i]).sum();
    let floor = 1e-12 * trace.max(f64::MIN_POSITIVE);

    if let Some(w) = solve_shifted(&a, &b, d, 0.0, floor) {
        if norm(&w) <= radius {
            return w;
        }
    }
    // |w(mu)| decreases in mu and |w(mu)| <= |b| / mu, so mu = |b|/radius is inside
    let mut lo = 0.0;
    let mut hi = b_norm / radius;
    let mut best = solve_shifted(&a, &b, d, hi, 0.0).expect("positive shift is definite");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match solve_shifted(&a, &b, d, mid, floor) {
            Some(w) if norm(&w) <= radius => {
                hi = mid;
                best = w;
            }
            _ => lo = mid,
        }
    }
    project_in_place(&mut best, radius);
    best
}

/// Solve `(A + mu I) w = b` by Cholesky; `None` if a pivot falls below `floor`.
fn solve_shifted(a: &[f64], b: &[f64], d: usize, mu: f64, floor: f64) -> Option<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut s = a[i * d + j] + if i == j { mu } else { 0.0 };
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if s <= floor {
                    return None;
                }
                l[i * d + i] = s.sqrt();
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    let mut z = vec![0.0; d];
    for i in 0..d {
        let s: f64 = (0..i).map(|k| l[i * d + k] * z[k]).sum();
        z[i] = (b[i] - s) / l[i * d + i];
    }
    let mut w = vec![0.0; d];
    for i in (0..d).rev() {
        let s: f64 = (i + 1..d).map(|k| l[k * d + i] * w[k]).sum();
        w[i] = (z[i] - s) / l[i * d + i];
    }
    Some(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::grid_search;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn unconstrained_solution_inside_the_ball() {
        // exact fit y = 2 x1 - x2
        let x = vec![1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 2.0, -1.0];
        let y = vec![2.0, -1.0, 1.0, 5.0];
        let data = Dataset::new(2, x, y).unwrap();
        let rep = solve_erm_l2(&data, &Domain::new(2, 10.0).unwrap()).unwrap();
        assert!((rep.weights[0] - 2.0).abs() < 1e-12 && (rep.weights[1] + 1.0).abs() < 1e-12);
        assert!(rep.objective_value < 1e-20);
    }

    #[test]
    fn constrained_solution_matches_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let x: Vec<f64> = (0..60).map(|_| rng.random_range(-1.0..1.0)).collect();
            let y: Vec<f64> = x.chunks(2).map(|r| 3.0 * r[0] + 2.0 * r[1] + rng.random_range(-0.1..0.1)).collect();
            let data = Dataset::new(2, x, y).unwrap();
            let dom = Domain::new(2, 1.0).unwrap();
            let rep = solve_erm_l2(&data, &dom).unwrap();
            assert!((rep.weights.norm() - 1.0).abs() < 1e-9);
            let g = grid_search(|w| empirical_risk_unchecked(&data, w, LossKind::L2), &dom, 1000).unwrap();
            assert!(rep.objective_value <= empirical_risk_unchecked(&data, &g, LossKind::L2) + 1e-9);
        }
    }

    #[test]
    fn rank_deficient_design() {
        // second feature identically zero
        let data = Dataset::new(2, vec![1.0, 0.0, 2.0, 0.0, 3.0, 0.0], vec![1.0, 2.0, 3.0]).unwrap();
        let w = least_squares_in_ball(&data, 5.0);
        assert!((w[0] - 1.0).abs() < 1e-6 && w[1].abs() < 1e-9, "{w:?}");
        let w = least_squares_in_ball(&data, 0.5);
        assert!((w[0] - 0.5).abs() < 1e-9 && w[1].abs() < 1e-9, "{w:?}");
    }
}
