use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use onebit::bounds::{BoundKind, BoundReport, PriorSpec};
use onebit::density_opt::{
    kappa_curve_csv, solve_bayes_density, solve_minimax_density, symmetric_grid, DesignProblem, DesignSolution,
};
use onebit::encoding::{SgdConfig, ThresholdDensity};
use onebit::harness::{
    render, run_risk_experiment, uniform_fast_rate_experiment, ExperimentConfig, OutputFormat, Scheme, ThetaSource,
};
use onebit::verify::{check_eta_monotone, check_fisher_bound, check_interval_lemma, ViolationReport, MARGIN_TOL};
use onebit::{Error, LocationFamily};

const EXIT_USAGE: u8 = 1;
const EXIT_VIOLATION: u8 = 2;
const EXIT_NONCONVERGENCE: u8 = 3;

/// One-bit location estimation: simulations, bounds, density design and lemma checks.
///
/// Families use the grammar gaussian:SIGMA, laplace:B, gennorm:SHAPE:ALPHA or
/// uniform:HALFWIDTH. ONEBIT_THREADS caps the number of worker threads.
#[derive(Debug, Parser)]
#[command(name = "onebit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monte Carlo risk curves n*MSE for one estimation scheme
    Simulate(SimulateArgs),
    /// Minimax or Bayes threshold density on a discretized interval
    OptimizeDensity(OptimizeArgs),
    /// Evaluate lower bounds and precision functionals
    Bounds(BoundsArgs),
    /// Brute-force checks of the interval, Fisher and monotonicity lemmas
    Verify(VerifyArgs),
    /// Two-stage fast-rate experiment for uniform noise
    FastRate(FastRateArgs),
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Output file [default: stdout]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SchemeName {
    Sgd,
    OneRound,
    FixedThreshold,
    QuantileInversion,
    Ml,
    Mean,
    Median,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Noise family
    #[arg(long, default_value = "gaussian:1")]
    family: LocationFamily,
    /// Estimation scheme
    #[arg(long, value_enum, default_value_t = SchemeName::Sgd)]
    scheme: SchemeName,
    /// Comma-separated sample sizes
    #[arg(long = "n", value_delimiter = ',', default_value = "100,200,400,800")]
    n: Vec<usize>,
    /// Monte Carlo trials per sample size
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    /// Parameter source: fixed:THETA or uniform:LO:HI
    #[arg(long, default_value = "uniform:-1.64:1.64")]
    prior: ThetaSource,
    /// Root seed [default: 0, with a warning]
    #[arg(long)]
    seed: Option<u64>,
    /// SGD start, quantile-inversion threshold and one-round first threshold
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    theta0: f64,
    /// SGD stepsize scale gamma0
    #[arg(long, default_value_t = 1.0)]
    gamma0: f64,
    /// SGD stepsize decay exponent, in (2/3, 1)
    #[arg(long, default_value_t = 0.75)]
    exponent: f64,
    /// One-round first-stage size [default: floor(sqrt(n))]
    #[arg(long)]
    n1: Option<usize>,
    /// Fixed-threshold offset from the true parameter
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    offset: f64,
    /// Threshold density CSV (t,weight) for the ml scheme [default: none]
    #[arg(long)]
    density: Option<PathBuf>,
    /// JSON experiment config; replaces every experiment flag above [default: none]
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DesignMode {
    Minimax,
    Bayes,
}

#[derive(Debug, Args)]
struct OptimizeArgs {
    /// Noise family
    #[arg(long, default_value = "gaussian:1")]
    family: LocationFamily,
    /// Design criterion; bayes uses a uniform prior on the parameter grid
    #[arg(long, value_enum, default_value_t = DesignMode::Minimax)]
    mode: DesignMode,
    /// Half-width T of the parameter interval [-T, T]
    #[arg(long, default_value_t = 2.0)]
    half_width: f64,
    /// Points in the parameter and threshold grids
    #[arg(long, default_value_t = 201)]
    points: usize,
    /// Certificate tolerance
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    /// Also write the (theta, kappa) curve here [default: none]
    #[arg(long)]
    curve_out: Option<PathBuf>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindName {
    VanTrees,
    Ceo,
    KappaUniform,
    KappaCurve,
    MedianVariance,
}

impl From<KindName> for BoundKind {
    fn from(k: KindName) -> Self {
        match k {
            KindName::VanTrees => BoundKind::VanTrees,
            KindName::Ceo => BoundKind::Ceo,
            KindName::KappaUniform => BoundKind::KappaUniform,
            KindName::KappaCurve => BoundKind::KappaCurve,
            KindName::MedianVariance => BoundKind::MedianVariance,
        }
    }
}

#[derive(Debug, Args)]
struct BoundsArgs {
    /// Noise family
    #[arg(long, default_value = "gaussian:1")]
    family: LocationFamily,
    /// Which bound to evaluate
    #[arg(long, value_enum, default_value_t = KindName::MedianVariance)]
    kind: KindName,
    /// Comma-separated sample sizes for van-trees and ceo (values are n*bound)
    #[arg(long = "n", value_delimiter = ',', default_value = "100,1000,10000")]
    n: Vec<usize>,
    /// Prior for van-trees and ceo: gaussian:S, point:THETA, cosine:A or uniform:A
    #[arg(long, default_value = "gaussian:1")]
    prior: PriorSpec,
    /// Comma-separated half-widths T for kappa-uniform
    #[arg(long, value_delimiter = ',', default_value = "2")]
    half_width: Vec<f64>,
    /// Threshold density CSV for kappa-curve [default: none]
    #[arg(long)]
    density: Option<PathBuf>,
    /// Parameter grid LO:HI:POINTS for kappa-curve
    #[arg(long, default_value = "-2:2:201", allow_hyphen_values = true)]
    theta_grid: String,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Lemma {
    Interval,
    Fisher,
    EtaMonotone,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Noise family
    #[arg(long, default_value = "gaussian:1")]
    family: LocationFamily,
    /// Which inequality to check
    #[arg(long, value_enum, default_value_t = Lemma::Interval)]
    lemma: Lemma,
    /// Exponent delta of the interval inequality
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    /// Random trials
    #[arg(long, default_value_t = 100_000)]
    trials: usize,
    /// Root seed [default: 0, with a warning]
    #[arg(long)]
    seed: Option<u64>,
    /// Longest x vector for the interval inequality (at most 8)
    #[arg(long, default_value_t = 6)]
    n_max: usize,
    /// Most intervals per random region for the Fisher bound
    #[arg(long, default_value_t = 3)]
    max_intervals: usize,
    /// Grid half-width for the monotonicity scan
    #[arg(long, default_value_t = 6.0)]
    half_width: f64,
    /// Grid points for the monotonicity scan
    #[arg(long, default_value_t = 2001)]
    points: usize,
    /// Largest tolerated lhs - rhs
    #[arg(long, default_value_t = MARGIN_TOL)]
    tol: f64,
}

#[derive(Debug, Args)]
struct FastRateArgs {
    /// Half-width h of the uniform noise
    #[arg(long, default_value_t = 1.0)]
    half_width: f64,
    /// Samples per stage
    #[arg(long = "n", default_value_t = 10_000)]
    n: usize,
    /// Monte Carlo trials
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    /// Root seed [default: 0, with a warning]
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    output: OutputArgs,
}

/// Failure modes mapped onto exit codes.
enum Failure {
    Usage(String),
    Violation(String),
    NonConvergence(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NonConvergence { .. } => Failure::NonConvergence(e.to_string()),
            other => Failure::Usage(other.to_string()),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn seed_or_warn(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        eprintln!("warning: no --seed given, using 0");
        0
    })
}

fn emit(text: &str, out: Option<&Path>) -> CmdResult {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Error::io(path, e).into()),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .map_err(|e| Failure::Usage(format!("writing to stdout: {e}")))
        }
    }
}

fn simulate(args: SimulateArgs) -> CmdResult {
    let config = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            serde_json::from_str::<ExperimentConfig>(&text)
                .map_err(|e| Error::parse("experiment config", e.to_string()))?
        }
        None => {
            let scheme = match args.scheme {
                SchemeName::Sgd => Scheme::SgdAverage {
                    sgd: SgdConfig::new(args.gamma0, args.exponent, args.theta0)?,
                },
                SchemeName::OneRound => Scheme::OneRound {
                    theta0: args.theta0,
                    n1: args.n1,
                },
                SchemeName::FixedThreshold => Scheme::FixedThreshold { offset: args.offset },
                SchemeName::QuantileInversion => Scheme::QuantileInversion { theta0: args.theta0 },
                SchemeName::Ml => {
                    let path = args
                        .density
                        .as_deref()
                        .ok_or_else(|| Failure::Usage("--scheme ml needs --density".into()))?;
                    Scheme::MlThresholdDensity {
                        density: ThresholdDensity::read_csv(path)?,
                        theta_bounds: None,
                    }
                }
                SchemeName::Mean => Scheme::BaselineMean,
                SchemeName::Median => Scheme::BaselineMedian,
            };
            ExperimentConfig {
                family: args.family,
                scheme,
                theta_source: args.prior,
                n_list: args.n.clone(),
                trials: args.trials,
                seed: seed_or_warn(args.seed),
            }
        }
    };
    let curve = run_risk_experiment(&config)?;
    emit(&render(&curve, args.output.format.into())?, args.output.out.as_deref())
}

fn optimize_density(args: OptimizeArgs) -> CmdResult {
    let problem = DesignProblem::uniform_grid(args.family, args.half_width, args.points)?;
    let result = match args.mode {
        DesignMode::Minimax => solve_minimax_density(&problem, args.tol),
        DesignMode::Bayes => solve_bayes_density(&problem.clone().with_uniform_prior()?, args.tol),
    };
    let write = |solution: &DesignSolution| -> CmdResult {
        emit(&render(solution, args.output.format.into())?, args.output.out.as_deref())?;
        if let Some(path) = &args.curve_out {
            emit(&kappa_curve_csv(&problem, &solution.density)?, Some(path))?;
        }
        eprintln!(
            "objective {} certificate {:e} iterations {}",
            solution.objective, solution.certificate, solution.iterations
        );
        Ok(())
    };
    match result {
        Ok(solution) => write(&solution),
        Err(Error::NonConvergence { tol, certificate, best }) => {
            write(&best)?;
            Err(Failure::NonConvergence(format!(
                "certificate {certificate:e} above tolerance {tol:e}; best iterate written"
            )))
        }
        Err(e) => Err(e.into()),
    }
}

fn parse_theta_grid(spec: &str) -> Result<Vec<f64>, Failure> {
    let bad = || Failure::Usage(format!("--theta-grid expects LO:HI:POINTS, got {spec:?}"));
    let parts: Vec<&str> = spec.split(':').collect();
    let [lo, hi, points] = parts.as_slice() else {
        return Err(bad());
    };
    let lo: f64 = lo.parse().map_err(|_| bad())?;
    let hi: f64 = hi.parse().map_err(|_| bad())?;
    let points: usize = points.parse().map_err(|_| bad())?;
    if lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less) || points < 2 {
        return Err(bad());
    }
    let centre = 0.5 * (lo + hi);
    Ok(symmetric_grid(0.5 * (hi - lo), points)?.into_iter().map(|x| x + centre).collect())
}

fn bounds(args: BoundsArgs) -> CmdResult {
    let family = &args.family;
    let report = match args.kind {
        KindName::VanTrees => BoundReport::van_trees(family, &args.prior, &args.n)?,
        KindName::Ceo => BoundReport::ceo(family, &args.prior, &args.n)?,
        KindName::KappaUniform => BoundReport::kappa_uniform(family, &args.half_width)?,
        KindName::MedianVariance => BoundReport::median_variance(family)?,
        KindName::KappaCurve => {
            let path = args
                .density
                .as_deref()
                .ok_or_else(|| Failure::Usage("--kind kappa-curve needs --density".into()))?;
            let density = ThresholdDensity::read_csv(path)?;
            BoundReport::kappa_curve(family, &density, &parse_theta_grid(&args.theta_grid)?)?
        }
    };
    debug_assert_eq!(report.bound_kind, BoundKind::from(args.kind));
    emit(&render(&report, args.output.format.into())?, args.output.out.as_deref())
}

fn verify(args: VerifyArgs) -> CmdResult {
    let family = &args.family;
    let (name, report): (&str, ViolationReport) = match args.lemma {
        Lemma::Interval => (
            "interval",
            check_interval_lemma(family, args.delta, args.n_max, args.trials, seed_or_warn(args.seed))?,
        ),
        Lemma::Fisher => (
            "fisher",
            check_fisher_bound(family, args.max_intervals, args.trials, seed_or_warn(args.seed))?,
        ),
        Lemma::EtaMonotone => ("eta-monotone", check_eta_monotone(family, args.half_width, args.points)?),
    };
    let violated = report.violated(args.tol);
    let status = if violated { "FAIL" } else { "PASS" };
    println!("check,family,delta,trials,skipped,max_lhs_minus_rhs,status");
    println!(
        "{name},{family},{},{},{},{:e},{status}",
        args.delta, report.trials, report.skipped, report.max_lhs_minus_rhs
    );
    if violated {
        return Err(Failure::Violation(format!(
            "{name} check exceeded tolerance {:e}; worst input {:?}",
            args.tol, report.worst_case_input
        )));
    }
    Ok(())
}

fn fast_rate(args: FastRateArgs) -> CmdResult {
    let report = uniform_fast_rate_experiment(args.half_width, args.n, args.trials, seed_or_warn(args.seed))?;
    let text = match OutputFormat::from(args.output.format) {
        OutputFormat::Csv => format!(
            "n,trials,radius,failure_fraction,median_abs_error\n{},{},{},{},{}\n",
            report.n, report.trials, report.radius, report.failure_fraction, report.median_abs_error
        ),
        OutputFormat::Json => serde_json::to_string_pretty(&report)
            .map(|s| s + "\n")
            .map_err(|e| Failure::Usage(e.to_string()))?,
    };
    emit(&text, args.output.out.as_deref())
}

fn configure_threads() -> CmdResult {
    let Ok(value) = std::env::var("ONEBIT_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| Failure::Usage(format!("ONEBIT_THREADS must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::Usage(format!("cannot configure {threads} worker threads: {e}")))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::OptimizeDensity(a) => optimize_density(a),
        Command::Bounds(a) => bounds(a),
        Command::Verify(a) => verify(a),
        Command::FastRate(a) => fast_rate(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Violation(msg)) => {
            eprintln!("violation: {msg}");
            ExitCode::from(EXIT_VIOLATION)
        }
        Err(Failure::NonConvergence(msg)) => {
            eprintln!("non-convergence: {msg}");
            ExitCode::from(EXIT_NONCONVERGENCE)
        }
    }
}
