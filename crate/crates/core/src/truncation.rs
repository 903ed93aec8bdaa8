//! Truncation functions used by the Catoni-style estimators.
//!
//! Both variants are odd, non-decreasing and sandwiched between
//! `-log(1 - x + x^2/2)` and `log(1 + x + x^2/2)`.

use std::f64::consts::LN_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

/// Which truncation function to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum TruncationKind {
    /// `-log(1 - x + x^2/2)` on `[0, 1]`, constant `log 2` beyond, odd extension.
    SaturatingOdd,
    /// `log(1 + x + x^2/2)` for `x >= 0`, odd extension.
    #[default]
    LogQuadratic,
}

impl TruncationKind {
    pub const ALL: [TruncationKind; 2] = [TruncationKind::SaturatingOdd, TruncationKind::LogQuadratic];

    /// Unchecked evaluation; NaN propagates.
    #[inline]
    pub fn value(self, x: f64) -> f64 {
        if x < 0.0 {
            return -self.value(-x);
        }
        match self {
            TruncationKind::LogQuadratic => log_quad(x),
            TruncationKind::SaturatingOdd => {
                if x >= 1.0 {
                    LN_2
                } else {
                    (-log_quad(-x)).min(LN_2)
                }
            }
        }
    }

    /// Unchecked derivative. At the knots `|x| = 1` of the saturating
    /// variant the inner branch is used, which is 0 there anyway.
    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        let a = x.abs();
        match self {
            TruncationKind::LogQuadratic => (1.0 + a) / (1.0 + a + 0.5 * a * a),
            TruncationKind::SaturatingOdd => {
                if a >= 1.0 {
                    0.0
                } else {
                    (1.0 - a) / (1.0 - a + 0.5 * a * a)
                }
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TruncationKind::SaturatingOdd => "saturating",
            TruncationKind::LogQuadratic => "logquad",
        }
    }
}

impl fmt::Display for TruncationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TruncationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "saturating" | "saturatingodd" => Ok(TruncationKind::SaturatingOdd),
            "logquad" | "logquadratic" => Ok(TruncationKind::LogQuadratic),
            other => Err(Error::invalid(format!("unknown truncation kind '{other}'"))),
        }
    }
}

/// `log(1 + t + t^2/2)` for any real `t`, finite for every finite `t`.
#[inline]
pub(crate) fn log_quad(t: f64) -> f64 {
    if t.abs() <= 1e100 {
        (t + 0.5 * t * t).ln_1p()
    } else {
        // t^2/2 * (1 + 2/t + 2/t^2) without overflowing t^2
        2.0 * t.abs().ln() - LN_2 + (2.0 / t + 2.0 / (t * t)).ln_1p()
    }
}

pub fn psi(kind: TruncationKind, x: f64) -> Result<f64> {
    ensure_finite("x", x)?;
    Ok(kind.value(x))
}

pub fn psi_derivative(kind: TruncationKind, x: f64) -> Result<f64> {
    ensure_finite("x", x)?;
    Ok(kind.derivative(x))
}

/// Lower and upper envelope `(-log(1 - x + x^2/2), log(1 + x + x^2/2))`
/// that every admissible truncation function must lie between.
pub fn psi_envelope(x: f64) -> Result<(f64, f64)> {
    ensure_finite("x", x)?;
    Ok((-log_quad(-x), log_quad(x)))
}

/// Outcome of [`check_truncation`] over a grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncationCheck {
    pub kind: TruncationKind,
    /// Smallest `min(psi - lower, upper - psi)` over the grid.
    pub envelope_slack: f64,
    pub monotone: bool,
    pub odd: bool,
}

impl TruncationCheck {
    pub fn passes(&self, slack_tolerance: f64) -> bool {
        self.envelope_slack >= -slack_tolerance && self.monotone && self.odd
    }
}

/// Evaluate the envelope, monotonicity and oddness conditions of `kind` on
/// `points` evenly spaced values over `[-range, range]`.
pub fn check_truncation(kind: TruncationKind, points: usize, range: f64) -> Result<TruncationCheck> {
    if points < 2 {
        return Err(Error::invalid("grid needs at least 2 points"));
    }
    if !(range > 0.0 && range.is_finite()) {
        return Err(Error::invalid("range must be positive and finite"));
    }
    let step = 2.0 * range / (points - 1) as f64;
    let mut slack = f64::INFINITY;
    let mut monotone = true;
    let mut odd = true;
    let mut prev = f64::NEG_INFINITY;
    for i in 0..points {
        let x = if i == points - 1 { range } else { -range + step * i as f64 };
        let v = kind.value(x);
        let (lo, hi) = psi_envelope(x)?;
        slack = slack.min(v - lo).min(hi - v);
        if v < prev || !v.is_finite() {
            monotone = false;
        }
        prev = v;
        if kind.value(-x) != -v {
            odd = false;
        }
    }
    Ok(TruncationCheck {
        kind,
        envelope_slack: slack,
        monotone,
        odd,
    })
}
