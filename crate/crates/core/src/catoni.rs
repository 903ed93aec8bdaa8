//! Catoni's robust estimator of a scalar mean.
//!
//! The estimate is the root in `theta` of `sum_i psi(alpha (x_i - theta))`.
//! Because `psi` is non-decreasing the map is non-increasing in `theta`,
//! non-negative at `min x_i` and non-positive at `max x_i`, so bisection on
//! that interval always converges.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::truncation::TruncationKind;

/// Where the variance in the default scale comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub enum VariancePlugin {
    /// Unbiased sample variance of the data.
    #[default]
    SampleVariance,
    /// A known variance.
    UserValue(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CatoniConfig {
    /// Scale parameter; derived from the variance when absent.
    pub alpha: Option<f64>,
    pub variance_plugin: VariancePlugin,
    /// Absolute bisection tolerance; `1e-10 * (max - min)` when absent.
    pub tolerance: Option<f64>,
    pub max_iterations: usize,
}

impl Default for CatoniConfig {
    fn default() -> Self {
        CatoniConfig {
            alpha: None,
            variance_plugin: VariancePlugin::SampleVariance,
            tolerance: None,
            max_iterations: 200,
        }
    }
}

impl CatoniConfig {
    pub fn with_alpha(alpha: f64) -> Self {
        CatoniConfig {
            alpha: Some(alpha),
            ..Default::default()
        }
    }

    pub fn with_variance(nu: f64) -> Self {
        CatoniConfig {
            variance_plugin: VariancePlugin::UserValue(nu),
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if let Some(a) = self.alpha {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::invalid(format!("alpha must be positive, got {a}")));
            }
        }
        if let VariancePlugin::UserValue(nu) = self.variance_plugin {
            if !(nu > 0.0 && nu.is_finite()) {
                return Err(Error::invalid(format!("variance must be positive, got {nu}")));
            }
        }
        if let Some(t) = self.tolerance {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::invalid(format!("tolerance must be positive, got {t}")));
            }
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations must be positive"));
        }
        Ok(())
    }
}

/// `sqrt(2 / (n nu))`
pub fn default_alpha_mean(n: usize, nu: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("n must be positive"));
    }
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(Error::invalid(format!("variance must be positive, got {nu}")));
    }
    Ok((2.0 / (n as f64 * nu)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CatoniEstimate {
    pub estimate: f64,
    /// `None` when the data were degenerate (one value, or all equal).
    pub alpha: Option<f64>,
    /// True when alpha was derived from the sample variance.
    pub variance_plugin_used: bool,
    pub iterations: usize,
}

fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
}

pub fn catoni_estimate(values: &[f64], kind: TruncationKind, config: &CatoniConfig) -> Result<f64> {
    catoni_estimate_detailed(values, kind, config).map(|e| e.estimate)
}

pub fn catoni_estimate_detailed(
    values: &[f64],
    kind: TruncationKind,
    config: &CatoniConfig,
) -> Result<CatoniEstimate> {
    config.validate()?;
    if values.is_empty() {
        return Err(Error::invalid("cannot estimate the mean of an empty sample"));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("values must be finite, found {v}")));
    }
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let range = hi - lo;
    let degenerate = |alpha| CatoniEstimate {
        estimate: values[0],
        alpha,
        variance_plugin_used: false,
        iterations: 0,
    };
    if range == 0.0 {
        return Ok(degenerate(config.alpha));
    }

    let (alpha, plugin_used) = match (config.alpha, config.variance_plugin) {
        (Some(a), _) => (a, false),
        (None, VariancePlugin::UserValue(nu)) => (default_alpha_mean(values.len(), nu)?, false),
        (None, VariancePlugin::SampleVariance) => {
            if values.len() == 1 {
                return Ok(degenerate(None));
            }
            (default_alpha_mean(values.len(), sample_variance(values))?, true)
        }
    };
    let tol = config.tolerance.unwrap_or(1e-10 * range);
    let score = |theta: f64| -> f64 { values.iter().map(|&x| kind.value(alpha * (x - theta))).sum() };

    // bracket [a, b] with score(a) >= 0 >= score(b)
    let (mut a, mut b) = (lo, hi);
    if score(a) < 0.0 || score(b) > 0.0 {
        return Err(Error::Internal("Catoni score does not bracket a root".into()));
    }
    let mut iterations = 0;
    while b - a > tol && iterations < config.max_iterations {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        iterations += 1;
        let s = score(mid);
        if s > 0.0 {
            a = mid;
        } else if s < 0.0 {
            b = mid;
        } else {
            // zero set is an interval around mid: locate both ends and return its centre
            let left = bisect_edge(a, mid, tol, config.max_iterations, &mut iterations, |t| score(t) > 0.0);
            let right = bisect_edge(mid, b, tol, config.max_iterations, &mut iterations, |t| score(t) >= 0.0);
            a = left;
            b = right;
            break;
        }
    }
    Ok(CatoniEstimate {
        estimate: 0.5 * (a + b),
        alpha: Some(alpha),
        variance_plugin_used: plugin_used,
        iterations,
    })
}

/// Boundary of a monotone predicate that holds at `a` side and fails at `b` side.
fn bisect_edge(
    mut a: f64,
    mut b: f64,
    tol: f64,
    max_iterations: usize,
    iterations: &mut usize,
    holds: impl Fn(f64) -> bool,
) -> f64 {
    let mut k = 0;
    while b - a > tol && k < max_iterations {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        k += 1;
        if holds(mid) {
            a = mid;
        } else {
            b = mid;
        }
    }
    *iterations += k;
    0.5 * (a + b)
}
