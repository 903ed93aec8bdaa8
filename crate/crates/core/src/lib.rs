//! Truncated l1-regression for heavy-tailed data.
//!
//! The central estimator minimises `(1/(n alpha)) sum_i psi(alpha |y_i - x_i^T w|)`
//! over a Euclidean ball, where `psi` is one of the Catoni truncation
//! functions in [`truncation`]. Baselines (l1 and l2 ERM, a truncated min-max
//! l2 estimator, Catoni's scalar mean), the closed-form risk bounds, synthetic
//! heavy-tailed tasks and a Monte Carlo experiment harness are included.

pub mod catoni;
pub mod data;
pub mod error;
pub mod experiments;
pub mod objectives;
pub mod solvers;
pub mod synth;
pub mod truncation;
pub mod tuning;
mod vecops;

pub use catoni::{catoni_estimate, catoni_estimate_detailed, default_alpha_mean, CatoniConfig, CatoniEstimate, VariancePlugin};
pub use data::{empirical_risk, loss, project_to_ball, Dataset, Domain, LossKind, Sample, Weights};
pub use error::{Error, Result};
pub use objectives::{MinMaxSpec, TruncatedL1Spec};
pub use solvers::{
    grid_search, solve_erm_l1, solve_erm_l2, solve_minmax_l2, solve_truncated_l1, MinMaxReport, SolveReport, SolverConfig,
};
pub use truncation::{psi, psi_derivative, psi_envelope, TruncationKind};
pub use tuning::{default_alpha_regression, erm_bound, theorem1_bound, BoundInputs};
