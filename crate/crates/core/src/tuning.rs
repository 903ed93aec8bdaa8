//! Scale selection and closed-form excess-risk bounds.
//!
//! The truncated estimator's risk bound holds with probability `1 - 2 delta`
//! and involves the covering number of the ball of radius `B`, which is
//! bounded by `d log(6B / eps)`. The ERM bound for bounded inputs holds with
//! probability `1 - delta`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Quantities entering the truncated-estimator bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub n: usize,
    pub d: usize,
    #[serde(rename = "B")]
    pub radius: f64,
    pub delta: f64,
    /// Net radius; `1/n` when absent.
    #[serde(default)]
    pub epsilon: Option<f64>,
    /// `E|x|`
    pub mean_norm: f64,
    /// `E|x|^2`
    pub mean_sq_norm: f64,
    /// `sup_{w in W} R_l2(w)`
    pub sup_l2_risk: f64,
}

impl BoundInputs {
    pub fn epsilon(&self) -> f64 {
        self.epsilon.unwrap_or(1.0 / self.n as f64)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 {
            return Err(Error::invalid("n and d must be positive"));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::invalid(format!("B must be positive, got {}", self.radius)));
        }
        if !(self.delta > 0.0 && self.delta < 0.5) {
            return Err(Error::invalid(format!("delta must lie in (0, 1/2), got {}", self.delta)));
        }
        let eps = self.epsilon();
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::invalid(format!("epsilon must be positive, got {eps}")));
        }
        for (name, v) in [
            ("mean_norm", self.mean_norm),
            ("mean_sq_norm", self.mean_sq_norm),
            ("sup_l2_risk", self.sup_l2_risk),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be non-negative and finite, got {v}")));
            }
        }
        Ok(())
    }

    /// `log N(W, eps) + log(1 / delta^2)`
    fn log_term(&self) -> Result<f64> {
        self.validate()?;
        Ok(log_covering_ball(self.d, self.radius, self.epsilon())? - 2.0 * self.delta.ln())
    }
}

/// `max(0, d log(6B / eps))`, a bound on the log covering number of the ball.
pub fn log_covering_ball(d: usize, radius: f64, epsilon: f64) -> Result<f64> {
    if d == 0 {
        return Err(Error::invalid("d must be positive"));
    }
    if !(radius > 0.0 && radius.is_finite()) || !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid(format!(
            "B and epsilon must be positive, got B={radius}, epsilon={epsilon}"
        )));
    }
    Ok((d as f64 * (6.0 * radius / epsilon).ln()).max(0.0))
}

/// `sqrt((1/n) (log N(W, eps) + log(1/delta^2)))`
pub fn default_alpha_regression(inputs: &BoundInputs) -> Result<f64> {
    Ok((inputs.log_term()? / inputs.n as f64).sqrt())
}

/// The bound evaluated at an arbitrary scale `alpha`:
/// `2 eps E|x| + alpha eps^2 E|x|^2 + (3 alpha / 2) sup R_l2 + log(N / delta^2) / (n alpha)`.
pub fn theorem1_bound_at_alpha(inputs: &BoundInputs, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::invalid(format!("alpha must be positive, got {alpha}")));
    }
    let log_term = inputs.log_term()?;
    let eps = inputs.epsilon();
    Ok(2.0 * eps * inputs.mean_norm
        + alpha * eps * eps * inputs.mean_sq_norm
        + 1.5 * alpha * inputs.sup_l2_risk
        + log_term / (inputs.n as f64 * alpha))
}

/// The bound at the scale returned by [`default_alpha_regression`]:
/// `2 eps E|x| + alpha (eps^2 E|x|^2 + (3/2) sup R_l2 + 1)`.
pub fn theorem1_bound(inputs: &BoundInputs) -> Result<f64> {
    let alpha = default_alpha_regression(inputs)?;
    let eps = inputs.epsilon();
    Ok(2.0 * eps * inputs.mean_norm + alpha * (eps * eps * inputs.mean_sq_norm + 1.5 * inputs.sup_l2_risk + 1.0))
}

/// `(4 B D / sqrt(n)) (1 + sqrt(log(1/delta) / 2))`, the ERM bound for inputs with `|x| <= D`.
pub fn erm_bound(radius: f64, max_input_norm: f64, n: usize, delta: f64) -> Result<f64> {
    if !(radius > 0.0 && radius.is_finite()) || !(max_input_norm > 0.0 && max_input_norm.is_finite()) {
        return Err(Error::invalid("B and D must be positive and finite"));
    }
    if n == 0 {
        return Err(Error::invalid("n must be positive"));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::invalid(format!("delta must lie in (0, 1], got {delta}")));
    }
    let n = n as f64;
    Ok(4.0 * radius * max_input_norm / n.sqrt() * (1.0 + (0.5 * (1.0 / delta).ln()).sqrt()))
}
