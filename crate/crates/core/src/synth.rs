//! Synthetic regression tasks with a known risk minimiser.
//!
//! Every noise law here is symmetric about zero, so the conditional median of
//! `y` given `x` is `x^T w_true`; with `|w_true| <= B` the l1-risk minimiser
//! over the ball is `w_true` itself and excess risk can be measured exactly.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::solvers::uniform_in_ball;
use crate::vecops::{dot, norm, norm_sq};

/// Distribution of the input vector `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum InputDist {
    /// `x ~ N(0, sigma_x^2 I)`
    GaussianIso { sigma_x: f64 },
    /// Uniform direction with a Pareto (type I) radius `scale * U^(-1/tail)`.
    ParetoRadial { tail: f64, scale: f64 },
    /// Uniform on the ball of radius `D`.
    UniformBall {
        #[serde(rename = "D")]
        radius: f64,
    },
}

/// Distribution of the additive noise; all variants are symmetric about 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum NoiseDist {
    Gaussian { sigma: f64 },
    /// `scale * T` with `T` Student-t with `dof` degrees of freedom.
    StudentT { dof: f64, scale: f64 },
    /// Random sign times a Lomax magnitude `scale * (U^(-1/tail) - 1)`, so the
    /// density is positive at 0 and the tail index is `tail`.
    SymmetricPareto { tail: f64, scale: f64 },
    /// Random sign times `exp(mu + sigma_ln Z)`.
    CenteredLogNormal { mu: f64, sigma_ln: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub d: usize,
    pub w_true: Vec<f64>,
    #[serde(rename = "B")]
    pub radius: f64,
    pub input_dist: InputDist,
    pub noise_dist: NoiseDist,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be positive and finite, got {v}")))
    }
}

fn tail_index(name: &str, v: f64) -> Result<()> {
    if v > 1.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must exceed 1, got {v}")))
    }
}

impl InputDist {
    fn validate(&self) -> Result<()> {
        match *self {
            InputDist::GaussianIso { sigma_x } => positive("sigma_x", sigma_x),
            InputDist::ParetoRadial { tail, scale } => {
                tail_index("tail", tail)?;
                positive("scale", scale)
            }
            InputDist::UniformBall { radius } => positive("D", radius),
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let d = out.len();
        match *self {
            InputDist::GaussianIso { sigma_x } => {
                for v in out.iter_mut() {
                    *v = sigma_x * rng.sample::<f64, _>(StandardNormal);
                }
            }
            InputDist::ParetoRadial { tail, scale } => {
                let r = scale * open_unit(rng).powf(-1.0 / tail);
                loop {
                    for v in out.iter_mut() {
                        *v = rng.sample(StandardNormal);
                    }
                    let nrm = norm(out);
                    if nrm > 0.0 {
                        for v in out.iter_mut() {
                            *v *= r / nrm;
                        }
                        break;
                    }
                }
            }
            InputDist::UniformBall { radius } => {
                out.copy_from_slice(&uniform_in_ball(rng, d, radius));
            }
        }
    }

    /// `(E|x|, E|x|^2)`; infinite when the moment does not exist.
    pub fn moments(&self, d: usize) -> (f64, f64) {
        let df = d as f64;
        match *self {
            InputDist::GaussianIso { sigma_x } => (sigma_x * 2f64.sqrt() * chi_gamma_ratio(d), df * sigma_x * sigma_x),
            InputDist::ParetoRadial { tail, scale } => {
                let m1 = tail * scale / (tail - 1.0);
                let m2 = if tail > 2.0 { tail * scale * scale / (tail - 2.0) } else { f64::INFINITY };
                (m1, m2)
            }
            InputDist::UniformBall { radius } => (radius * df / (df + 1.0), radius * radius * df / (df + 2.0)),
        }
    }

    /// Almost-sure bound on `|x|`, when there is one.
    pub fn max_norm(&self) -> Option<f64> {
        match *self {
            InputDist::UniformBall { radius } => Some(radius),
            _ => None,
        }
    }
}

/// `Gamma((d+1)/2) / Gamma(d/2)` via `c(d+2) = c(d) (d+1)/d`.
fn chi_gamma_ratio(d: usize) -> f64 {
    let (mut c, mut k) = if d % 2 == 1 { (1.0 / PI.sqrt(), 1) } else { (PI.sqrt() / 2.0, 2) };
    while k < d {
        c *= (k as f64 + 1.0) / k as f64;
        k += 2;
    }
    c
}

/// Uniform on `(0, 1]`.
fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

fn random_sign<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}

impl NoiseDist {
    fn validate(&self) -> Result<()> {
        match *self {
            NoiseDist::Gaussian { sigma } => {
                if sigma >= 0.0 && sigma.is_finite() {
                    Ok(())
                } else {
                    Err(Error::invalid(format!("sigma must be non-negative, got {sigma}")))
                }
            }
            NoiseDist::StudentT { dof, scale } => {
                tail_index("dof", dof)?;
                positive("scale", scale)
            }
            NoiseDist::SymmetricPareto { tail, scale } => {
                tail_index("tail", tail)?;
                positive("scale", scale)
            }
            NoiseDist::CenteredLogNormal { mu, sigma_ln } => {
                if !mu.is_finite() {
                    return Err(Error::invalid("mu must be finite"));
                }
                positive("sigma_ln", sigma_ln)
            }
        }
    }

    fn sampler(&self) -> NoiseSampler {
        match *self {
            NoiseDist::StudentT { dof, scale } => NoiseSampler::StudentT(StudentT::new(dof).expect("validated dof"), scale),
            other => NoiseSampler::Direct(other),
        }
    }

    /// `E[noise^2]`; infinite when it does not exist.
    pub fn second_moment(&self) -> f64 {
        match *self {
            NoiseDist::Gaussian { sigma } => sigma * sigma,
            NoiseDist::StudentT { dof, scale } => {
                if dof > 2.0 {
                    scale * scale * dof / (dof - 2.0)
                } else {
                    f64::INFINITY
                }
            }
            NoiseDist::SymmetricPareto { tail, scale } => {
                if tail > 2.0 {
                    2.0 * scale * scale / ((tail - 1.0) * (tail - 2.0))
                } else {
                    f64::INFINITY
                }
            }
            NoiseDist::CenteredLogNormal { mu, sigma_ln } => (2.0 * mu + 2.0 * sigma_ln * sigma_ln).exp(),
        }
    }
}

enum NoiseSampler {
    StudentT(StudentT<f64>, f64),
    Direct(NoiseDist),
}

impl NoiseSampler {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            NoiseSampler::StudentT(t, scale) => scale * t.sample(rng),
            NoiseSampler::Direct(dist) => match *dist {
                NoiseDist::Gaussian { sigma } => sigma * rng.sample::<f64, _>(StandardNormal),
                NoiseDist::SymmetricPareto { tail, scale } => {
                    random_sign(rng) * scale * (open_unit(rng).powf(-1.0 / tail) - 1.0)
                }
                NoiseDist::CenteredLogNormal { mu, sigma_ln } => {
                    random_sign(rng) * (mu + sigma_ln * rng.sample::<f64, _>(StandardNormal)).exp()
                }
                NoiseDist::StudentT { .. } => unreachable!("handled by the StudentT sampler"),
            },
        }
    }
}

/// Closed-form moments of a task, as used by the bound calculators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskMoments {
    pub mean_norm: f64,
    pub mean_sq_norm: f64,
    pub noise_second_moment: f64,
    /// `2 E[noise^2] + 2 (2B)^2 E|x|^2`, an upper bound on the l2 risk over the ball.
    pub sup_l2_risk: f64,
    pub max_input_norm: Option<f64>,
}

impl TaskMoments {
    pub fn all_finite(&self) -> bool {
        self.mean_norm.is_finite() && self.mean_sq_norm.is_finite() && self.sup_l2_risk.is_finite()
    }
}

impl TaskSpec {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::invalid("d must be positive"));
        }
        if self.w_true.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: self.w_true.len(),
            });
        }
        if self.w_true.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("w_true must be finite"));
        }
        positive("B", self.radius)?;
        if norm(&self.w_true) > self.radius {
            return Err(Error::invalid(format!(
                "|w_true| = {} exceeds B = {}",
                norm(&self.w_true),
                self.radius
            )));
        }
        self.input_dist.validate()?;
        self.noise_dist.validate()
    }

    pub fn moments(&self) -> TaskMoments {
        let (mean_norm, mean_sq_norm) = self.input_dist.moments(self.d);
        let noise = self.noise_dist.second_moment();
        let diameter = 2.0 * self.radius;
        TaskMoments {
            mean_norm,
            mean_sq_norm,
            noise_second_moment: noise,
            sup_l2_risk: 2.0 * noise + 2.0 * diameter * diameter * mean_sq_norm,
            max_input_norm: self.input_dist.max_norm(),
        }
    }

    /// Ways in which the task leaves the finite-second-moment regime the
    /// risk bound needs. Empty when the bound applies.
    pub fn scope_warnings(&self) -> Vec<String> {
        let m = self.moments();
        let mut out = Vec::new();
        if !m.mean_sq_norm.is_finite() {
            out.push("input second moment is infinite".to_string());
        }
        if !m.noise_second_moment.is_finite() {
            out.push("noise variance is infinite".to_string());
        }
        out
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R, noise: &NoiseSampler, x: &mut [f64]) -> f64 {
        self.input_dist.sample(rng, x);
        noise.sample(rng)
    }
}

/// `n` i.i.d. samples `y = x^T w_true + noise`, reproducible from `seed`.
pub fn generate(task: &TaskSpec, n: usize, seed: u64) -> Result<Dataset> {
    task.validate()?;
    if n == 0 {
        return Err(Error::invalid("n must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = task.noise_dist.sampler();
    let d = task.d;
    let mut x = vec![0.0; n * d];
    let mut y = Vec::with_capacity(n);
    for row in x.chunks_exact_mut(d) {
        let e = task.draw(&mut rng, &noise, row);
        y.push(dot(row, &task.w_true) + e);
    }
    Dataset::new(d, x, y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RiskMethod {
    Analytic,
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskEvaluation {
    pub value: f64,
    pub method: RiskMethod,
    /// Present for Monte Carlo estimates only.
    pub std_error: Option<f64>,
}

fn check_w(task: &TaskSpec, w: &[f64]) -> Result<()> {
    task.validate()?;
    if w.len() != task.d {
        return Err(Error::DimensionMismatch {
            expected: task.d,
            got: w.len(),
        });
    }
    Ok(())
}

fn analytic_scale(task: &TaskSpec, w: &[f64]) -> Result<f64> {
    match (task.input_dist, task.noise_dist) {
        (InputDist::GaussianIso { sigma_x }, NoiseDist::Gaussian { sigma }) => {
            let gap: f64 = task.w_true.iter().zip(w).map(|(a, b)| (a - b) * (a - b)).sum();
            Ok((sigma_x * sigma_x * gap + sigma * sigma).sqrt())
        }
        _ => Err(Error::UnsupportedMethod(
            "closed-form risk needs Gaussian inputs and Gaussian noise".into(),
        )),
    }
}

const FOLDED_NORMAL_MEAN: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

fn mc_check(samples: usize) -> Result<()> {
    if samples < 2 {
        return Err(Error::invalid("Monte Carlo needs at least 2 samples"));
    }
    Ok(())
}

/// Mean and standard error of `f(residual of w_true, x^T (w_true - w))` over fresh draws.
fn monte_carlo<F>(task: &TaskSpec, w: &[f64], samples: usize, seed: u64, noise_sign: f64, f: F) -> (f64, f64)
where
    F: Fn(f64, f64) -> f64,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = task.noise_dist.sampler();
    let gap: Vec<f64> = task.w_true.iter().zip(w).map(|(a, b)| a - b).collect();
    let mut x = vec![0.0; task.d];
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..samples {
        let e = noise_sign * task.draw(&mut rng, &noise, &mut x);
        let v = f(e, dot(&x, &gap));
        sum += v;
        sum_sq += v * v;
    }
    let m = samples as f64;
    let mean = sum / m;
    let var = ((sum_sq - m * mean * mean) / (m - 1.0)).max(0.0);
    (mean, (var / m).sqrt())
}

/// Expected absolute loss of `w` on the task distribution.
pub fn true_l1_risk(task: &TaskSpec, w: &[f64], method: RiskMethod) -> Result<RiskEvaluation> {
    check_w(task, w)?;
    match method {
        RiskMethod::Analytic => Ok(RiskEvaluation {
            value: FOLDED_NORMAL_MEAN * analytic_scale(task, w)?,
            method,
            std_error: None,
        }),
        RiskMethod::MonteCarlo { samples, seed } => {
            mc_check(samples)?;
            let (value, se) = monte_carlo(task, w, samples, seed, 1.0, |e, shift| (e + shift).abs());
            Ok(RiskEvaluation {
                value,
                method,
                std_error: Some(se),
            })
        }
    }
}

/// `R(w) - R(w_true)`. Monte Carlo evaluates both risks on the same draws.
pub fn excess_l1_risk(task: &TaskSpec, w: &[f64], method: RiskMethod) -> Result<RiskEvaluation> {
    check_w(task, w)?;
    match method {
        RiskMethod::Analytic => {
            let at_w = analytic_scale(task, w)?;
            let at_true = analytic_scale(task, &task.w_true)?;
            Ok(RiskEvaluation {
                value: FOLDED_NORMAL_MEAN * (at_w - at_true),
                method,
                std_error: None,
            })
        }
        RiskMethod::MonteCarlo { samples, seed } => {
            mc_check(samples)?;
            let (value, se) = monte_carlo(task, w, samples, seed, 1.0, |e, shift| (e + shift).abs() - e.abs());
            Ok(RiskEvaluation {
                value,
                method,
                std_error: Some(se),
            })
        }
    }
}

/// Monte Carlo l1 risk with every noise draw negated; used to check symmetry.
pub fn true_l1_risk_flipped(task: &TaskSpec, w: &[f64], samples: usize, seed: u64) -> Result<RiskEvaluation> {
    check_w(task, w)?;
    mc_check(samples)?;
    let (value, se) = monte_carlo(task, w, samples, seed, -1.0, |e, shift| (e + shift).abs());
    Ok(RiskEvaluation {
        value,
        method: RiskMethod::MonteCarlo { samples, seed },
        std_error: Some(se),
    })
}

/// Monte Carlo `(E|x|^2 estimate, its standard error)`.
pub fn mean_sq_norm_mc(task: &TaskSpec, samples: usize, seed: u64) -> Result<(f64, f64)> {
    task.validate()?;
    mc_check(samples)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![0.0; task.d];
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..samples {
        task.input_dist.sample(&mut rng, &mut x);
        let v = norm_sq(&x);
        sum += v;
        sum_sq += v * v;
    }
    let m = samples as f64;
    let mean = sum / m;
    let var = ((sum_sq - m * mean * mean) / (m - 1.0)).max(0.0);
    Ok((mean, (var / m).sqrt()))
}
