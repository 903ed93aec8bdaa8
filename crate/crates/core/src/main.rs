use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use robust_l1::catoni::{catoni_estimate_detailed, default_alpha_mean, CatoniConfig};
use robust_l1::data::{read_values_csv, Dataset, Domain};
use robust_l1::experiments::{run_trials, summarize, write_json, write_results_csv, ExperimentSpec, Mode};
use robust_l1::objectives::{MinMaxSpec, TruncatedL1Spec};
use robust_l1::solvers::{solve_erm_l1, solve_erm_l2, solve_minmax_l2, solve_truncated_l1, SolveReport, SolverConfig};
use robust_l1::truncation::{check_truncation, TruncationCheck, TruncationKind};
use robust_l1::tuning::{default_alpha_regression, erm_bound, log_covering_ball, theorem1_bound, BoundInputs};
use robust_l1::Error;

const ENVELOPE_TOLERANCE: f64 = 1e-12;

#[derive(Parser)]
#[command(name = "robust-l1", version, about = "Truncated l1-regression for heavy-tailed data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Saturating,
    Logquad,
}

impl From<KindArg> for TruncationKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Saturating => TruncationKind::SaturatingOdd,
            KindArg::Logquad => TruncationKind::LogQuadratic,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum CheckKind {
    Saturating,
    Logquad,
    Both,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum EstimatorArg {
    TruncL1,
    ErmL1,
    MinmaxL2,
    ErmL2,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Scaling,
    Coverage,
    Compare,
}

#[derive(Subcommand)]
enum Command {
    /// Check the envelope, monotonicity and oddness of the truncation functions on a grid.
    CheckPsi {
        #[arg(long, value_enum, default_value = "both")]
        kind: CheckKind,
        #[arg(long, default_value_t = 100_001)]
        grid_points: usize,
        #[arg(long, default_value_t = 100.0)]
        range: f64,
    },
    /// Catoni estimate of the mean of a single-column CSV.
    Mean {
        #[arg(long, conflicts_with = "stdin", required_unless_present = "stdin")]
        input: Option<PathBuf>,
        #[arg(long)]
        stdin: bool,
        /// The input has a header row.
        #[arg(long)]
        header: bool,
        #[arg(long, value_enum, default_value = "logquad")]
        kind: KindArg,
        #[arg(long)]
        alpha: Option<f64>,
        /// Scale alpha by sqrt(log(1/delta)) for a level-delta deviation guarantee.
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Fit a linear model over the ball of radius B.
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        header: bool,
        #[arg(long, value_enum)]
        estimator: EstimatorArg,
        #[arg(long = "B")]
        radius: f64,
        /// `auto` or a positive number.
        #[arg(long, default_value = "auto")]
        alpha: String,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        #[arg(long, value_enum, default_value = "logquad")]
        kind: KindArg,
        #[arg(long, default_value_t = 0.0)]
        lambda: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2000)]
        iters: usize,
        #[arg(long, default_value_t = 16)]
        restarts: usize,
        /// Report destination; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Closed-form scale and excess-risk bounds.
    Bounds {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        #[arg(long = "B")]
        radius: f64,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        mean_norm: f64,
        #[arg(long)]
        mean_sq_norm: f64,
        #[arg(long)]
        sup_l2: f64,
        /// Almost-sure bound on |x|; enables the ERM bound.
        #[arg(long = "D")]
        max_input_norm: Option<f64>,
    },
    /// Run a Monte Carlo experiment from a JSON spec.
    Experiment {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, value_enum, default_value = "scaling")]
        mode: ModeArg,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; all available cores when absent.
        #[arg(long)]
        jobs: Option<usize>,
        /// Record wall-clock seconds per fit (makes the CSV non-reproducible).
        #[arg(long)]
        timing: bool,
    },
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl Failure {
    /// Invalid arguments are usage errors; everything else failed at run time.
    fn classify(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_) | Error::DimensionMismatch { .. } => Failure::Usage(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

type CmdResult = Result<(), Failure>;

fn print_json<T: Serialize>(value: &T) -> CmdResult {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value).map_err(runtime)?;
    writeln!(out).map_err(runtime)
}

fn emit_json<T: Serialize>(value: &T, out: Option<&Path>) -> CmdResult {
    match out {
        Some(path) => write_json(value, path).map_err(runtime),
        None => print_json(value),
    }
}

fn cmd_check_psi(kind: CheckKind, grid_points: usize, range: f64) -> CmdResult {
    if grid_points < 2 {
        return Err(Failure::Usage(format!("--grid-points must be at least 2, got {grid_points}")));
    }
    if !(range > 0.0 && range.is_finite()) {
        return Err(Failure::Usage(format!("--range must be positive, got {range}")));
    }
    let kinds: &[TruncationKind] = match kind {
        CheckKind::Saturating => &[TruncationKind::SaturatingOdd],
        CheckKind::Logquad => &[TruncationKind::LogQuadratic],
        CheckKind::Both => &TruncationKind::ALL,
    };
    let mut reports: Vec<TruncationCheck> = Vec::new();
    let mut all_pass = true;
    for &k in kinds {
        let c = check_truncation(k, grid_points, range).map_err(Failure::classify)?;
        let verdict = |ok: bool| if ok { "pass" } else { "FAIL" };
        let envelope_ok = c.envelope_slack <= ENVELOPE_TOLERANCE;
        eprintln!("{k} envelope: {} (worst slack {:e})", verdict(envelope_ok), c.envelope_slack);
        eprintln!("{k} monotone: {}", verdict(c.monotone));
        eprintln!("{k} odd: {}", verdict(c.odd));
        all_pass &= c.passes(ENVELOPE_TOLERANCE);
        reports.push(c);
    }
    print_json(&reports)?;
    if all_pass {
        Ok(())
    } else {
        Err(Failure::Runtime("truncation check failed".into()))
    }
}

#[derive(Serialize)]
struct MeanOutput {
    estimate: f64,
    sample_mean: f64,
    alpha: Option<f64>,
    variance_plugin_used: bool,
    kind: TruncationKind,
    n: usize,
}

fn cmd_mean(
    input: Option<PathBuf>,
    header: bool,
    kind: TruncationKind,
    alpha: Option<f64>,
    delta: Option<f64>,
) -> CmdResult {
    if let Some(a) = alpha {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Failure::Usage(format!("--alpha must be positive, got {a}")));
        }
    }
    if let Some(d) = delta {
        if !(d > 0.0 && d < 1.0) {
            return Err(Failure::Usage(format!("--delta must lie in (0, 1), got {d}")));
        }
    }
    let values = match &input {
        Some(path) => {
            let file = fs::File::open(path).map_err(|e| runtime(Error::Io { path: path.clone(), source: e }))?;
            read_values_csv(file, header, path)
        }
        None => read_values_csv(std::io::stdin().lock(), header, Path::new("<stdin>")),
    }
    .map_err(runtime)?;
    if values.is_empty() {
        return Err(Failure::Runtime("input contains no values".into()));
    }
    let n = values.len();
    let sample_mean = values.iter().sum::<f64>() / n as f64;

    let mut config = CatoniConfig::default();
    let mut plugin = false;
    config.alpha = match (alpha, delta) {
        (Some(a), _) => Some(a),
        (None, Some(d)) if n > 1 => {
            let var = values.iter().map(|v| (v - sample_mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            plugin = true;
            default_alpha_mean(n, var).ok().map(|a| a * (1.0 / d).ln().sqrt())
        }
        _ => None,
    };
    let est = catoni_estimate_detailed(&values, kind, &config).map_err(runtime)?;
    let out = MeanOutput {
        estimate: est.estimate,
        sample_mean,
        alpha: est.alpha,
        variance_plugin_used: est.variance_plugin_used || (plugin && est.alpha.is_some()),
        kind,
        n,
    };
    eprintln!("catoni estimate {} (sample mean {})", out.estimate, out.sample_mean);
    print_json(&out)
}

#[derive(Serialize)]
struct FitOutput {
    estimator: EstimatorArg,
    n: usize,
    d: usize,
    alpha: Option<f64>,
    #[serde(flatten)]
    report: SolveReport,
    /// Min-max only: the maximising player's last iterate.
    #[serde(skip_serializing_if = "Option::is_none")]
    u: Option<Vec<f64>>,
    wall_time: f64,
}

#[allow(clippy::too_many_arguments)]
fn cmd_fit(
    input: &Path,
    header: bool,
    estimator: EstimatorArg,
    radius: f64,
    alpha: &str,
    delta: f64,
    kind: TruncationKind,
    lambda: f64,
    config: SolverConfig,
    out: Option<&Path>,
) -> CmdResult {
    let fixed_alpha = match alpha {
        "auto" => None,
        other => match other.parse::<f64>() {
            Ok(a) if a > 0.0 && a.is_finite() => Some(a),
            _ => return Err(Failure::Usage(format!("--alpha must be `auto` or a positive number, got {other:?}"))),
        },
    };
    config.validate().map_err(Failure::classify)?;
    let data = Dataset::read_csv(input, header).map_err(runtime)?;
    let domain = Domain::new(data.dim(), radius).map_err(Failure::classify)?;
    let needs_alpha = matches!(estimator, EstimatorArg::TruncL1 | EstimatorArg::MinmaxL2);
    let alpha = match (needs_alpha, fixed_alpha) {
        (false, _) => None,
        (true, Some(a)) => Some(a),
        (true, None) => {
            let inputs = BoundInputs {
                n: data.n(),
                d: data.dim(),
                radius,
                delta,
                epsilon: None,
                mean_norm: 0.0,
                mean_sq_norm: 0.0,
                sup_l2_risk: 0.0,
            };
            Some(default_alpha_regression(&inputs).map_err(Failure::classify)?)
        }
    };

    let start = Instant::now();
    let (report, u) = match estimator {
        EstimatorArg::TruncL1 => {
            let spec = TruncatedL1Spec::new(alpha.unwrap(), kind).map_err(Failure::classify)?;
            (solve_truncated_l1(&data, &domain, &spec, &config).map_err(runtime)?, None)
        }
        EstimatorArg::ErmL1 => (solve_erm_l1(&data, &domain, &config).map_err(runtime)?, None),
        EstimatorArg::MinmaxL2 => {
            let spec = MinMaxSpec::new(lambda, alpha.unwrap()).map_err(Failure::classify)?;
            let r = solve_minmax_l2(&data, &domain, &spec, &config).map_err(runtime)?;
            (r.w, Some(r.u.into_inner()))
        }
        EstimatorArg::ErmL2 => (solve_erm_l2(&data, &domain).map_err(runtime)?, None),
    };
    let wall_time = start.elapsed().as_secs_f64();
    if report.saturation_warning {
        eprintln!(
            "warning: {:.0}% of residuals are saturated at the solution; alpha may be too large",
            100.0 * report.saturation_fraction
        );
    }
    eprintln!("objective {} after {wall_time:.3}s", report.objective_value);
    let output = FitOutput {
        estimator,
        n: data.n(),
        d: data.dim(),
        alpha,
        report,
        u,
        wall_time,
    };
    emit_json(&output, out)
}

#[derive(Serialize)]
struct BoundsOutput {
    epsilon: f64,
    log_covering: f64,
    alpha: f64,
    theorem1_bound: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    erm_bound: Option<f64>,
}

fn cmd_bounds(inputs: BoundInputs, max_input_norm: Option<f64>) -> CmdResult {
    inputs.validate().map_err(Failure::classify)?;
    let out = BoundsOutput {
        epsilon: inputs.epsilon(),
        log_covering: log_covering_ball(inputs.d, inputs.radius, inputs.epsilon()).map_err(Failure::classify)?,
        alpha: default_alpha_regression(&inputs).map_err(Failure::classify)?,
        theorem1_bound: theorem1_bound(&inputs).map_err(Failure::classify)?,
        erm_bound: max_input_norm
            .map(|d| erm_bound(inputs.radius, d, inputs.n, inputs.delta))
            .transpose()
            .map_err(Failure::classify)?,
    };
    print_json(&out)
}

fn cmd_experiment(spec_path: &Path, mode: Mode, out: &Path, jobs: Option<usize>, timing: bool) -> CmdResult {
    let text = fs::read_to_string(spec_path).map_err(|e| runtime(Error::Io { path: spec_path.into(), source: e }))?;
    let mut spec: ExperimentSpec =
        serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", spec_path.display())))?;
    spec.record_timing |= timing;
    spec.validate().map_err(|e| Failure::Usage(format!("{}: {e}", spec_path.display())))?;
    for w in spec.task.scope_warnings() {
        eprintln!("note: {w}; the risk bounds do not apply to this task");
    }
    if jobs == Some(0) {
        return Err(Failure::Usage("--jobs must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(runtime)?;
    let cells = spec.n_grid.len() * spec.trials;
    eprintln!("running {cells} trials x {} estimators on {} threads", spec.estimators.len(), pool.current_num_threads());
    let start = Instant::now();
    let results = pool.install(|| run_trials(&spec)).map_err(runtime)?;
    let summary = summarize(&spec, &results, mode).map_err(runtime)?;

    fs::create_dir_all(out).map_err(|e| runtime(Error::Io { path: out.into(), source: e }))?;
    write_results_csv(&results, out.join("results.csv")).map_err(runtime)?;
    write_json(&results, out.join("results.json")).map_err(runtime)?;
    write_json(&summary, out.join("summary.json")).map_err(runtime)?;

    for s in &summary.slopes {
        let se = s.fit.stderr.map(|v| format!(" +/- {v:.3}")).unwrap_or_default();
        eprintln!("{}: log-log slope {:.3}{se}", s.estimator, s.fit.slope);
    }
    for c in &summary.coverage {
        eprintln!(
            "{} n={}: coverage {:.3} (required {:.3})",
            c.estimator, c.n, c.coverage.coverage, c.coverage.required
        );
    }
    eprintln!("done in {:.1}s; results in {}", start.elapsed().as_secs_f64(), out.display());
    Ok(())
}

fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::CheckPsi { kind, grid_points, range } => cmd_check_psi(kind, grid_points, range),
        Command::Mean { input, stdin: _, header, kind, alpha, delta } => cmd_mean(input, header, kind.into(), alpha, delta),
        Command::Fit {
            input,
            header,
            estimator,
            radius,
            alpha,
            delta,
            kind,
            lambda,
            seed,
            iters,
            restarts,
            out,
        } => {
            let config = SolverConfig {
                iterations: iters,
                restarts,
                seed,
                ..Default::default()
            };
            cmd_fit(&input, header, estimator, radius, &alpha, delta, kind.into(), lambda, config, out.as_deref())
        }
        Command::Bounds {
            n,
            d,
            radius,
            delta,
            epsilon,
            mean_norm,
            mean_sq_norm,
            sup_l2,
            max_input_norm,
        } => cmd_bounds(
            BoundInputs {
                n,
                d,
                radius,
                delta,
                epsilon,
                mean_norm,
                mean_sq_norm,
                sup_l2_risk: sup_l2,
            },
            max_input_norm,
        ),
        Command::Experiment { spec, mode, out, jobs, timing } => {
            let mode = match mode {
                ModeArg::Scaling => Mode::Scaling,
                ModeArg::Coverage => Mode::Coverage,
                ModeArg::Compare => Mode::Compare,
            };
            cmd_experiment(&spec, mode, &out, jobs, timing)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
