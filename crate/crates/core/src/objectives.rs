//! Objective functions and their almost-everywhere gradients.
//!
//! Residuals are `r_i = y_i - x_i^T w` and `sign(0) = 0` throughout, which
//! picks a valid element of the subdifferential at kinks.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::truncation::TruncationKind;
use crate::vecops::{axpy, dot, norm_sq};

/// Parameters of the truncated l1 objective
/// `(1/(n alpha)) sum_i psi(alpha |y_i - x_i^T w|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncatedL1Spec {
    pub alpha: f64,
    pub kind: TruncationKind,
}

impl TruncatedL1Spec {
    pub fn new(alpha: f64, kind: TruncationKind) -> Result<Self> {
        let spec = TruncatedL1Spec { alpha, kind };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::invalid(format!("alpha must be positive and finite, got {}", self.alpha)));
        }
        Ok(())
    }
}

/// Parameters of the truncated min-max least-squares payoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinMaxSpec {
    pub lambda: f64,
    pub alpha: f64,
}

impl MinMaxSpec {
    pub fn new(lambda: f64, alpha: f64) -> Result<Self> {
        let spec = MinMaxSpec { lambda, alpha };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda must be non-negative, got {}", self.lambda)));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::invalid(format!("alpha must be positive and finite, got {}", self.alpha)));
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn sign(r: f64) -> f64 {
    if r > 0.0 {
        1.0
    } else if r < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub fn truncated_l1_value(data: &Dataset, w: &[f64], spec: &TruncatedL1Spec) -> Result<f64> {
    spec.validate()?;
    data.check_weights(w)?;
    Ok(truncated_value(data, w, spec))
}

pub fn truncated_l1_gradient(data: &Dataset, w: &[f64], spec: &TruncatedL1Spec) -> Result<Vec<f64>> {
    spec.validate()?;
    data.check_weights(w)?;
    let mut g = vec![0.0; w.len()];
    truncated_value_and_gradient(data, w, spec, &mut g);
    Ok(g)
}

/// A subgradient of the empirical l1 risk.
pub fn erm_l1_subgradient(data: &Dataset, w: &[f64]) -> Result<Vec<f64>> {
    data.check_weights(w)?;
    let mut g = vec![0.0; w.len()];
    l1_value_and_subgradient(data, w, &mut g);
    Ok(g)
}

/// `lambda (|w|^2 - |u|^2) + (1/(alpha n)) sum_i psi_sat(alpha r_i(w)^2 - alpha r_i(u)^2)`
/// with the saturating truncation.
pub fn minmax_l2_payoff(data: &Dataset, w: &[f64], u: &[f64], spec: &MinMaxSpec) -> Result<f64> {
    spec.validate()?;
    data.check_weights(w)?;
    data.check_weights(u)?;
    Ok(minmax_payoff(data, w, u, spec))
}

pub(crate) fn truncated_value(data: &Dataset, w: &[f64], spec: &TruncatedL1Spec) -> f64 {
    let total: f64 = (0..data.n())
        .map(|i| spec.kind.value(spec.alpha * data.residual(i, w).abs()))
        .sum();
    total / (data.n() as f64 * spec.alpha)
}

/// Writes the gradient into `grad` and returns the objective value.
pub(crate) fn truncated_value_and_gradient(
    data: &Dataset,
    w: &[f64],
    spec: &TruncatedL1Spec,
    grad: &mut [f64],
) -> f64 {
    grad.fill(0.0);
    let mut total = 0.0;
    for (x, y) in data.rows() {
        let r = y - dot(x, w);
        let z = spec.alpha * r.abs();
        total += spec.kind.value(z);
        let coef = spec.kind.derivative(z) * sign(r);
        if coef != 0.0 {
            axpy(-coef, x, grad);
        }
    }
    let n = data.n() as f64;
    for g in grad.iter_mut() {
        *g /= n;
    }
    total / (n * spec.alpha)
}

/// Writes a subgradient into `grad` and returns the empirical l1 risk.
pub(crate) fn l1_value_and_subgradient(data: &Dataset, w: &[f64], grad: &mut [f64]) -> f64 {
    grad.fill(0.0);
    let mut total = 0.0;
    for (x, y) in data.rows() {
        let r = y - dot(x, w);
        total += r.abs();
        let s = sign(r);
        if s != 0.0 {
            axpy(-s, x, grad);
        }
    }
    let n = data.n() as f64;
    for g in grad.iter_mut() {
        *g /= n;
    }
    total / n
}

pub(crate) fn minmax_payoff(data: &Dataset, w: &[f64], u: &[f64], spec: &MinMaxSpec) -> f64 {
    let psi = TruncationKind::SaturatingOdd;
    let total: f64 = data
        .rows()
        .map(|(x, y)| {
            let rw = y - dot(x, w);
            let ru = y - dot(x, u);
            psi.value(spec.alpha * (rw * rw - ru * ru))
        })
        .sum();
    spec.lambda * (norm_sq(w) - norm_sq(u)) + total / (spec.alpha * data.n() as f64)
}

/// Partial gradients of the payoff in `w` and in `u`; returns the payoff.
pub(crate) fn minmax_value_and_gradients(
    data: &Dataset,
    w: &[f64],
    u: &[f64],
    spec: &MinMaxSpec,
    grad_w: &mut [f64],
    grad_u: &mut [f64],
) -> f64 {
    let psi = TruncationKind::SaturatingOdd;
    grad_w.fill(0.0);
    grad_u.fill(0.0);
    let mut total = 0.0;
    for (x, y) in data.rows() {
        let rw = y - dot(x, w);
        let ru = y - dot(x, u);
        let z = spec.alpha * (rw * rw - ru * ru);
        total += psi.value(z);
        let slope = psi.derivative(z);
        if slope != 0.0 {
            // d/dw (alpha r_w^2) = -2 alpha r_w x; the 1/alpha prefactor cancels alpha
            axpy(-2.0 * slope * rw, x, grad_w);
            axpy(2.0 * slope * ru, x, grad_u);
        }
    }
    let n = data.n() as f64;
    for (gw, wi) in grad_w.iter_mut().zip(w) {
        *gw = *gw / n + 2.0 * spec.lambda * wi;
    }
    for (gu, ui) in grad_u.iter_mut().zip(u) {
        *gu = *gu / n - 2.0 * spec.lambda * ui;
    }
    spec.lambda * (norm_sq(w) - norm_sq(u)) + total / (spec.alpha * n)
}

/// Fraction of samples whose scaled residual reaches the saturation knot `alpha |r| >= 1`.
pub fn saturation_fraction(data: &Dataset, w: &[f64], alpha: f64) -> f64 {
    let hits = (0..data.n())
        .filter(|&i| alpha * data.residual(i, w).abs() >= 1.0)
        .count();
    hits as f64 / data.n() as f64
}
