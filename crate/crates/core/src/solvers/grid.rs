use crate::data::{Domain, Weights};
use crate::error::{Error, Result};

/// Exhaustive minimisation over the regular grid on `[-B, B]^d` restricted to
/// the ball, with `resolution` points per axis. Ties go to the
/// lexicographically smallest point. Only `d <= 2` is supported.
pub fn grid_search<F>(objective: F, domain: &Domain, resolution: usize) -> Result<Weights>
where
    F: Fn(&[f64]) -> f64,
{
    let d = domain.dim();
    if d > 2 {
        return Err(Error::UnsupportedDimension(d));
    }
    if resolution < 2 {
        return Err(Error::invalid("grid resolution must be at least 2"));
    }
    let radius = domain.radius();
    let step = 2.0 * radius / (resolution - 1) as f64;
    let coord = |i: usize| if i == resolution - 1 { radius } else { -radius + step * i as f64 };

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut consider = |w: &[f64]| {
        let v = objective(w);
        if best.as_ref().is_none_or(|(b, _)| v < *b) {
            best = Some((v, w.to_vec()));
        }
    };
    if d == 1 {
        for i in 0..resolution {
            consider(&[coord(i)]);
        }
    } else {
        let r2 = radius * radius;
        for i in 0..resolution {
            let a = coord(i);
            for j in 0..resolution {
                let b = coord(j);
                if a * a + b * b <= r2 {
                    consider(&[a, b]);
                }
            }
        }
    }
    best.map(|(_, w)| Weights::new(w))
        .ok_or_else(|| Error::Internal("grid contained no points in the ball".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{empirical_risk, Dataset, LossKind};

    #[test]
    fn constant_objective_picks_lexicographic_minimum() {
        let dom = Domain::new(2, 1.0).unwrap();
        let w = grid_search(|_| 1.0, &dom, 5).unwrap();
        // grid {-1,-0.5,0,0.5,1}; first in-ball point with smallest first coordinate
        assert_eq!(w.as_slice(), &[-1.0, 0.0]);
        let w = grid_search(|_| 1.0, &Domain::new(1, 2.0).unwrap(), 3).unwrap();
        assert_eq!(w.as_slice(), &[-2.0]);
    }

    #[test]
    fn finds_an_on_grid_centre() {
        let dom = Domain::new(2, 1.0).unwrap();
        let c = [0.5, -0.25];
        let w = grid_search(|w| (w[0] - c[0]).powi(2) + (w[1] - c[1]).powi(2), &dom, 9).unwrap();
        assert_eq!(w.as_slice(), &c);
    }

    #[test]
    fn l1_objective_matches_the_median() {
        let y = vec![0.3, -1.2, 2.2, 0.9, 0.1, 1.4, -0.4];
        let data = Dataset::new(1, vec![1.0; y.len()], y.clone()).unwrap();
        let dom = Domain::new(1, 3.0).unwrap();
        let res = 1001;
        let w = grid_search(|w| empirical_risk(&data, w, LossKind::L1).unwrap(), &dom, res).unwrap();
        let mut sorted = y;
        sorted.sort_by(f64::total_cmp);
        let median = sorted[sorted.len() / 2];
        assert!((w[0] - median).abs() <= 6.0 / (res - 1) as f64);
    }

    #[test]
    fn guards() {
        assert!(matches!(
            grid_search(|_| 0.0, &Domain::new(3, 1.0).unwrap(), 10),
            Err(Error::UnsupportedDimension(3))
        ));
        assert!(grid_search(|_| 0.0, &Domain::new(1, 1.0).unwrap(), 1).is_err());
    }
}
