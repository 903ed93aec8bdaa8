//! Datasets, the constraint ball, losses and empirical risks.

use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::ops::Deref;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::vecops::{dot, norm, norm_sq};

/// One input-output pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x: Vec<f64>,
    pub y: f64,
}

/// An immutable training sample of `n >= 1` rows with `d` features each.
///
/// Features are stored row-major in a single buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    d: usize,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl Dataset {
    /// Build from a row-major feature buffer of length `n * d` and `n` responses.
    pub fn new(d: usize, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("feature dimension must be positive"));
        }
        if y.is_empty() {
            return Err(Error::invalid("dataset must contain at least one sample"));
        }
        if x.len() != y.len() * d {
            return Err(Error::DimensionMismatch {
                expected: y.len() * d,
                got: x.len(),
            });
        }
        if let Some(v) = x.iter().chain(&y).find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("dataset entries must be finite, found {v}")));
        }
        Ok(Dataset { d, x, y })
    }

    pub fn from_samples(samples: &[Sample]) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| Error::invalid("dataset must contain at least one sample"))?;
        let d = first.x.len();
        let mut x = Vec::with_capacity(samples.len() * d);
        let mut y = Vec::with_capacity(samples.len());
        for s in samples {
            if s.x.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: s.x.len(),
                });
            }
            x.extend_from_slice(&s.x);
            y.push(s.y);
        }
        Dataset::new(d, x, y)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    #[inline]
    pub fn response(&self, i: usize) -> f64 {
        self.y[i]
    }

    pub fn responses(&self) -> &[f64] {
        &self.y
    }

    pub fn features(&self) -> &[f64] {
        &self.x
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.x.chunks_exact(self.d).zip(self.y.iter().copied())
    }

    pub fn samples(&self) -> Vec<Sample> {
        self.rows()
            .map(|(x, y)| Sample { x: x.to_vec(), y })
            .collect()
    }

    /// `y_i - x_i^T w`
    #[inline]
    pub fn residual(&self, i: usize, w: &[f64]) -> f64 {
        self.y[i] - dot(self.row(i), w)
    }

    pub(crate) fn check_weights(&self, w: &[f64]) -> Result<()> {
        if w.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: w.len(),
            });
        }
        Ok(())
    }

    /// Largest feature-vector norm, the subgradient norm bound of the l1 risk.
    pub fn max_row_norm(&self) -> f64 {
        self.x
            .chunks_exact(self.d)
            .map(norm)
            .fold(0.0, f64::max)
    }

    /// Read `d` feature columns followed by the response column.
    pub fn from_csv_reader<R: Read>(reader: R, has_header: bool, source: &Path) -> Result<Self> {
        let parse_err = |message: String| Error::Parse {
            path: source.to_path_buf(),
            message,
        };
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(has_header)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut d = None;
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| parse_err(e.to_string()))?;
            let cols = record.len();
            if cols < 2 {
                return Err(parse_err(format!(
                    "row {}: need at least one feature and a response",
                    line + 1
                )));
            }
            match d {
                None => d = Some(cols - 1),
                Some(d) if d + 1 != cols => {
                    return Err(parse_err(format!("row {}: expected {} columns, got {cols}", line + 1, d + 1)))
                }
                _ => {}
            }
            for (j, field) in record.iter().enumerate() {
                let v = parse_number(field).map_err(|m| parse_err(format!("row {}: {m}", line + 1)))?;
                if j + 1 == cols {
                    y.push(v);
                } else {
                    x.push(v);
                }
            }
        }
        let d = d.ok_or_else(|| parse_err("no data rows".into()))?;
        Dataset::new(d, x, y)
    }

    pub fn read_csv(path: impl AsRef<Path>, has_header: bool) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Dataset::from_csv_reader(file, has_header, path)
    }

    pub fn write_csv_to<W: Write>(&self, writer: W, header: bool) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        if header {
            let mut names: Vec<String> = (1..=self.d).map(|j| format!("x{j}")).collect();
            names.push("y".into());
            w.write_record(&names)?;
        }
        for (x, y) in self.rows() {
            w.write_record(x.iter().chain(std::iter::once(&y)).map(|v| format!("{v:?}")))?;
        }
        w.flush()
    }

    pub fn write_csv(&self, path: impl AsRef<Path>, header: bool) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv_to(file, header).map_err(|e| Error::io(path, e))
    }
}

fn parse_number(field: &str) -> std::result::Result<f64, String> {
    let v: f64 = field.parse().map_err(|_| format!("'{field}' is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("'{field}' is not finite"))
    }
}

/// Read a single numeric column (used by the scalar mean estimator).
pub fn read_values_csv<R: Read>(reader: R, has_header: bool, source: &Path) -> Result<Vec<f64>> {
    let parse_err = |message: String| Error::Parse {
        path: source.to_path_buf(),
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| parse_err(e.to_string()))?;
        if record.len() != 1 {
            return Err(parse_err(format!("row {}: expected one column, got {}", line + 1, record.len())));
        }
        out.push(parse_number(&record[0]).map_err(|m| parse_err(format!("row {}: {m}", line + 1)))?);
    }
    Ok(out)
}

/// The constraint set: a Euclidean ball of radius `B` in `R^d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    #[serde(rename = "B")]
    radius: f64,
    d: usize,
}

impl Domain {
    pub fn new(d: usize, radius: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("domain dimension must be positive"));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid(format!("ball radius must be positive and finite, got {radius}")));
        }
        Ok(Domain { radius, d })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn contains(&self, w: &[f64]) -> bool {
        norm(w) <= self.radius
    }

    pub(crate) fn check_dataset(&self, data: &Dataset) -> Result<()> {
        if data.dim() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: data.dim(),
            });
        }
        Ok(())
    }
}

/// Linear coefficients `w`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Weights(Vec<f64>);

impl Weights {
    pub fn new(w: Vec<f64>) -> Self {
        Weights(w)
    }

    pub fn zeros(d: usize) -> Self {
        Weights(vec![0.0; d])
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for Weights {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for Weights {
    fn from(w: Vec<f64>) -> Self {
        Weights(w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LossKind {
    L1,
    L2,
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::L1 => "l1",
            LossKind::L2 => "l2",
        })
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(LossKind::L1),
            "l2" => Ok(LossKind::L2),
            other => Err(Error::invalid(format!("unknown loss '{other}'"))),
        }
    }
}

impl LossKind {
    #[inline]
    pub fn eval(self, residual: f64) -> f64 {
        match self {
            LossKind::L1 => residual.abs(),
            LossKind::L2 => residual * residual,
        }
    }
}

pub fn loss(kind: LossKind, prediction: f64, y: f64) -> Result<f64> {
    ensure_finite("prediction", prediction)?;
    ensure_finite("y", y)?;
    Ok(kind.eval(prediction - y))
}

/// `(1/n) sum_i loss(x_i^T w, y_i)`
pub fn empirical_risk(data: &Dataset, w: &[f64], kind: LossKind) -> Result<f64> {
    data.check_weights(w)?;
    Ok(empirical_risk_unchecked(data, w, kind))
}

pub(crate) fn empirical_risk_unchecked(data: &Dataset, w: &[f64], kind: LossKind) -> f64 {
    let total: f64 = (0..data.n()).map(|i| kind.eval(data.residual(i, w))).sum();
    total / data.n() as f64
}

/// Radial projection onto the ball; the identity inside it.
pub fn project_to_ball(w: &Weights, domain: &Domain) -> Weights {
    let mut out = w.clone();
    project_in_place(out.as_mut_slice(), domain.radius());
    out
}

#[inline]
pub(crate) fn project_in_place(w: &mut [f64], radius: f64) {
    let nrm = norm(w);
    if nrm > radius {
        let s = radius / nrm;
        for v in w.iter_mut() {
            *v *= s;
        }
        // rounding can leave the norm an ulp above the radius; shrink so a
        // second projection is the identity
        while norm(w) > radius {
            for v in w.iter_mut() {
                *v *= 1.0 - f64::EPSILON;
            }
        }
    }
}

/// Empirical plug-ins for the moment quantities entering the risk bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentDiagnostics {
    pub mean_norm: f64,
    pub mean_sq_norm: f64,
    /// `2 R2(w_hat) + 2 (2B)^2 mean_sq_norm` with `w_hat` the constrained least-squares fit.
    pub sup_l2_risk_plugin: f64,
}

pub fn moment_diagnostics(data: &Dataset, domain: &Domain) -> Result<MomentDiagnostics> {
    domain.check_dataset(data)?;
    let n = data.n() as f64;
    let (sum_norm, sum_sq) = data
        .features()
        .chunks_exact(data.dim())
        .fold((0.0, 0.0), |(a, b), x| {
            let s = norm_sq(x);
            (a + s.sqrt(), b + s)
        });
    let mean_norm = sum_norm / n;
    let mean_sq_norm = sum_sq / n;
    let w_hat = crate::solvers::least_squares_in_ball(data, domain.radius());
    let l2 = empirical_risk_unchecked(data, &w_hat, LossKind::L2);
    let diameter = 2.0 * domain.radius();
    Ok(MomentDiagnostics {
        mean_norm,
        mean_sq_norm,
        sup_l2_risk_plugin: 2.0 * l2 + 2.0 * diameter * diameter * mean_sq_norm,
    })
}
