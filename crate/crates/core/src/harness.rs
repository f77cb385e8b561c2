//! Seeded Monte Carlo experiments and their CSV/JSON persistence.
//!
//! Every trial draws from its own ChaCha stream seeded by
//! `derive_seed(seed, [n, trial])`, and per-trial results are reduced in
//! trial order, so curves are bit-for-bit reproducible for any worker count.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::are_of;
use crate::density_opt::DesignSolution;
use crate::distributions::LocationFamily;
use crate::encoding::{
    default_first_stage, encode_fixed_threshold, run_adaptive_sgd, run_one_round, sample_thresholds_with,
    SgdConfig, ThresholdDensity,
};
use crate::error::{Error, Result};
use crate::estimation::{
    default_theta_bounds, estimate_ml, estimate_one_round, estimate_quantile_inversion, estimate_sgd_average,
};
use crate::seed::rng_for;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scheme {
    /// Quantile inversion around the threshold `theta + offset`.
    FixedThreshold { offset: f64 },
    /// Quantile inversion around the absolute threshold `theta0`.
    QuantileInversion { theta0: f64 },
    SgdAverage { sgd: SgdConfig },
    /// `n1 = None` uses `floor(sqrt(n))`.
    OneRound { theta0: f64, n1: Option<usize> },
    /// Maximum likelihood from thresholds drawn i.i.d. from `density`.
    MlThresholdDensity {
        density: ThresholdDensity,
        theta_bounds: Option<(f64, f64)>,
    },
    BaselineMean,
    BaselineMedian,
}

impl Scheme {
    pub fn label(&self) -> &'static str {
        match self {
            Scheme::FixedThreshold { .. } => "fixed-threshold",
            Scheme::QuantileInversion { .. } => "quantile-inversion",
            Scheme::SgdAverage { .. } => "sgd",
            Scheme::OneRound { .. } => "one-round",
            Scheme::MlThresholdDensity { .. } => "ml",
            Scheme::BaselineMean => "mean",
            Scheme::BaselineMedian => "median",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ThetaSource {
    Fixed { theta: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl ThetaSource {
    fn validate(&self) -> Result<()> {
        match *self {
            ThetaSource::Fixed { theta } if theta.is_finite() => Ok(()),
            ThetaSource::Uniform { lo, hi } if lo.is_finite() && hi.is_finite() && lo < hi => Ok(()),
            other => Err(Error::InvalidArgument(format!("invalid theta source {other:?}"))),
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ThetaSource::Fixed { theta } => theta,
            ThetaSource::Uniform { lo, hi } => rng.random_range(lo..hi),
        }
    }
}

impl std::fmt::Display for ThetaSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            ThetaSource::Fixed { theta } => write!(f, "fixed:{theta}"),
            ThetaSource::Uniform { lo, hi } => write!(f, "uniform:{lo}:{hi}"),
        }
    }
}

/// `fixed:THETA` or `uniform:LO:HI`.
impl std::str::FromStr for ThetaSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |detail: String| Error::parse("theta source", detail);
        let parts: Vec<&str> = s.split(':').collect();
        let num = |p: &str| p.parse::<f64>().map_err(|e| bad(format!("{p:?}: {e}")));
        let source = match parts.as_slice() {
            ["fixed", theta] => ThetaSource::Fixed { theta: num(theta)? },
            ["uniform", lo, hi] => ThetaSource::Uniform {
                lo: num(lo)?,
                hi: num(hi)?,
            },
            _ => return Err(bad(format!("expected fixed:THETA or uniform:LO:HI, got {s:?}"))),
        };
        source.validate()?;
        Ok(source)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub family: LocationFamily,
    pub scheme: Scheme,
    pub theta_source: ThetaSource,
    pub n_list: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
}

/// Trials per `n` used when none is given.
pub const DEFAULT_TRIALS: usize = 10_000;
/// Largest tolerated share of failed trials at any `n`.
pub const MAX_FAILURE_SHARE: f64 = 0.01;

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_list.is_empty() {
            return Err(Error::InvalidArgument("n list is empty".into()));
        }
        if self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("n list must be strictly increasing".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidArgument("need at least one trial".into()));
        }
        self.theta_source.validate()?;
        let min_n = match &self.scheme {
            Scheme::OneRound { n1, .. } => n1.map_or(2, |k| k + 1),
            _ => 1,
        };
        if self.n_list[0] < min_n {
            return Err(Error::InvalidArgument(format!(
                "scheme {} needs n >= {min_n}",
                self.scheme.label()
            )));
        }
        match &self.scheme {
            Scheme::FixedThreshold { offset } if !offset.is_finite() => {
                Err(Error::InvalidArgument("threshold offset must be finite".into()))
            }
            Scheme::QuantileInversion { theta0 } | Scheme::OneRound { theta0, .. } if !theta0.is_finite() => {
                Err(Error::InvalidArgument("theta0 must be finite".into()))
            }
            Scheme::OneRound { n1: Some(0), .. } => Err(Error::InvalidArgument("n1 must be positive".into())),
            Scheme::MlThresholdDensity { .. } if self.family.is_uniform() => Err(Error::UnsupportedFamily {
                operation: "maximum-likelihood experiment",
                family: self.family.to_string(),
            }),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskCurve {
    pub scheme: String,
    pub n_values: Vec<usize>,
    /// `n` times the mean squared error over successful trials.
    pub n_mse: Vec<f64>,
    /// Monte Carlo standard error of `n_mse`.
    pub std_err: Vec<f64>,
    /// Successful trials behind each entry.
    pub trials: Vec<usize>,
    /// Trials whose estimator fell back to a boundary of its search interval.
    pub failures: Vec<usize>,
    pub seed: u64,
    pub config: ExperimentConfig,
}

/// `Some(squared error)` or `None` for a failed (boundary) estimate.
fn run_trial(cfg: &ExperimentConfig, n: usize, trial: usize) -> Result<Option<f64>> {
    let mut rng = rng_for(cfg.seed, &[n as u64, trial as u64]);
    let theta = cfg.theta_source.draw(&mut rng);
    let family = &cfg.family;
    let mut samples: Vec<f64> = (0..n).map(|_| theta + family.sample(&mut rng)).collect();
    let estimate = match &cfg.scheme {
        Scheme::FixedThreshold { offset } => {
            let t = theta + offset;
            let bits: Vec<u8> = samples.iter().map(|&x| encode_fixed_threshold(x, t)).collect();
            estimate_quantile_inversion(&bits, t, family)?.theta_hat
        }
        Scheme::QuantileInversion { theta0 } => {
            let bits: Vec<u8> = samples.iter().map(|&x| encode_fixed_threshold(x, *theta0)).collect();
            estimate_quantile_inversion(&bits, *theta0, family)?.theta_hat
        }
        Scheme::SgdAverage { sgd } => estimate_sgd_average(&run_adaptive_sgd(&samples, sgd)?)?.theta_hat,
        Scheme::OneRound { theta0, n1 } => {
            let n1 = n1.unwrap_or_else(|| default_first_stage(n));
            estimate_one_round(&run_one_round(&samples, *theta0, n1, family)?, family)?.theta_hat
        }
        Scheme::MlThresholdDensity { density, theta_bounds } => {
            let thresholds = sample_thresholds_with(density, n, &mut rng)?;
            let bits: Vec<u8> = samples
                .iter()
                .zip(&thresholds)
                .map(|(&x, &t)| encode_fixed_threshold(x, t))
                .collect();
            let bounds = theta_bounds.unwrap_or_else(|| default_theta_bounds(family));
            let est = estimate_ml(&bits, &thresholds, family, bounds)?;
            if est.at_boundary {
                return Ok(None);
            }
            est.theta_hat
        }
        Scheme::BaselineMean => samples.iter().sum::<f64>() / n as f64,
        Scheme::BaselineMedian => {
            samples.sort_by(f64::total_cmp);
            if n % 2 == 1 {
                samples[n / 2]
            } else {
                0.5 * (samples[n / 2 - 1] + samples[n / 2])
            }
        }
    };
    let err = estimate - theta;
    Ok(Some(err * err))
}

/// Runs `trials` replicates for every `n` and reports `n * MSE` with its
/// Monte Carlo standard error.
pub fn run_risk_experiment(cfg: &ExperimentConfig) -> Result<RiskCurve> {
    cfg.validate()?;
    let mut curve = RiskCurve {
        scheme: cfg.scheme.label().to_string(),
        n_values: cfg.n_list.clone(),
        n_mse: Vec::with_capacity(cfg.n_list.len()),
        std_err: Vec::with_capacity(cfg.n_list.len()),
        trials: Vec::with_capacity(cfg.n_list.len()),
        failures: Vec::with_capacity(cfg.n_list.len()),
        seed: cfg.seed,
        config: cfg.clone(),
    };
    for &n in &cfg.n_list {
        let outcomes = (0..cfg.trials)
            .into_par_iter()
            .map(|trial| run_trial(cfg, n, trial))
            .collect::<Result<Vec<_>>>()?;
        let errors: Vec<f64> = outcomes.iter().flatten().copied().collect();
        let failures = outcomes.len() - errors.len();
        if failures as f64 > MAX_FAILURE_SHARE * cfg.trials as f64 || errors.is_empty() {
            return Err(Error::Experiment(format!(
                "{failures} of {} {} trials failed at n = {n}",
                cfg.trials,
                cfg.scheme.label()
            )));
        }
        let k = errors.len() as f64;
        let mean = errors.iter().sum::<f64>() / k;
        let var = if errors.len() > 1 {
            errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (k - 1.0)
        } else {
            0.0
        };
        let nf = n as f64;
        curve.n_mse.push(nf * mean);
        curve.std_err.push(nf * (var / k).sqrt());
        curve.trials.push(errors.len());
        curve.failures.push(failures);
    }
    Ok(curve)
}

/// `(n, ARE)` with `ARE = 1 / (I_f * n_mse)`.
pub fn compute_are_curve(curve: &RiskCurve, family: &LocationFamily) -> Result<Vec<(usize, f64)>> {
    if curve.n_values.is_empty() {
        return Err(Error::InvalidArgument("risk curve is empty".into()));
    }
    curve
        .n_values
        .iter()
        .zip(&curve.n_mse)
        .map(|(&n, &v)| Ok((n, are_of(family, v)?)))
        .collect()
}

/// Outcome of the two-stage binning experiment for uniform noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FastRateReport {
    pub n: usize,
    pub trials: usize,
    /// `halfwidth * 8 log n / n^{3/4}`.
    pub radius: f64,
    /// Share of trials with `|theta_hat - theta| >= radius`.
    pub failure_fraction: f64,
    pub median_abs_error: f64,
}

fn fast_rate_sizes(n: usize) -> Result<(usize, usize)> {
    let nf = n as f64;
    let m1 = nf.sqrt().floor() as usize;
    let m2 = (4.0 * nf.powf(0.25)).floor() as usize;
    if n < 4 || m1 < 2 || m2 < 2 || n / m2 == 0 {
        return Err(Error::InvalidArgument(format!("n = {n} is too small for the two-stage estimator")));
    }
    Ok((m1, m2))
}

/// Largest grid threshold `t_j` whose block of samples all lie at or above it,
/// i.e. whose bits `1{X < t_j}` are all zero.
fn highest_clear_threshold<R: Rng + ?Sized>(
    rng: &mut R,
    theta_std: f64,
    start: f64,
    width: f64,
    m: usize,
    per_block: usize,
) -> Option<f64> {
    let mut best = None;
    for j in 0..m {
        let t = start + width * j as f64 / m as f64;
        let clear = (0..per_block).all(|_| {
            let x = theta_std + rng.random_range(-1.0..1.0);
            encode_fixed_threshold(x, t) == 0
        });
        if clear {
            best = Some(t);
        }
    }
    best
}

/// One run of the two-stage estimator on `2n` samples `theta + U(-h, h)`.
///
/// Each stage places `m` thresholds evenly on a window and gives every
/// threshold its own block of `n/m` samples; the highest threshold whose block
/// lies entirely above it estimates the lower edge `theta - h`. The first stage
/// uses `floor(sqrt n)` thresholds on `[-2 log n, 2 log n)`, the second
/// `floor(4 n^{1/4})` thresholds on the edge estimate `± 16 log n / sqrt n`.
/// Units are standardized by `h`; `|theta| <= h log n` is required.
pub fn uniform_fast_rate_trial<R: Rng + ?Sized>(theta: f64, halfwidth: f64, n: usize, rng: &mut R) -> Result<f64> {
    if !(halfwidth.is_finite() && halfwidth > 0.0) {
        return Err(Error::InvalidArgument(format!("halfwidth must be positive, got {halfwidth}")));
    }
    let (m1, m2) = fast_rate_sizes(n)?;
    let log_n = (n as f64).ln();
    let theta_std = theta / halfwidth;
    if theta_std.abs().partial_cmp(&log_n).is_none_or(|o| o.is_gt()) {
        return Err(Error::Domain(format!(
            "theta = {theta} lies outside the guarantee range ±{}",
            halfwidth * log_n
        )));
    }
    let n_eps = 2.0 * log_n;
    let edge_init = highest_clear_threshold(rng, theta_std, -n_eps, 2.0 * n_eps, m1, n / m1)
        .ok_or_else(|| Error::Experiment("first stage found no clear threshold".into()))?;
    let half_window = 16.0 * log_n / (n as f64).sqrt();
    let edge = highest_clear_threshold(rng, theta_std, edge_init - half_window, 2.0 * half_window, m2, n / m2)
        .unwrap_or(edge_init);
    Ok(halfwidth * (edge + 1.0))
}

/// Repeats [`uniform_fast_rate_trial`] with `theta ~ U(-h log n, h log n)`.
pub fn uniform_fast_rate_experiment(halfwidth: f64, n: usize, trials: usize, seed: u64) -> Result<FastRateReport> {
    if trials == 0 {
        return Err(Error::InvalidArgument("need at least one trial".into()));
    }
    fast_rate_sizes(n)?;
    let log_n = (n as f64).ln();
    let range = halfwidth * log_n;
    let radius = halfwidth * 8.0 * log_n / (n as f64).powf(0.75);
    let errors = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = rng_for(seed, &[n as u64, trial as u64]);
            let theta = rng.random_range(-range..=range);
            Ok((uniform_fast_rate_trial(theta, halfwidth, n, &mut rng)? - theta).abs())
        })
        .collect::<Result<Vec<f64>>>()?;
    let failures = errors.iter().filter(|&&e| e >= radius).count();
    let mut sorted = errors;
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let median = if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    };
    Ok(FastRateReport {
        n,
        trials,
        radius,
        failure_fraction: failures as f64 / trials as f64,
        median_abs_error: median,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::parse("output format", format!("expected csv or json, got {other:?}"))),
        }
    }
}

/// Anything with a canonical CSV rendering.
pub trait Tabular {
    fn to_csv(&self) -> String;
}

pub const RISK_CSV_HEADER: &str = "n,scheme,n_mse,std_err,trials,seed";

fn push_risk_rows(out: &mut String, curve: &RiskCurve) {
    for i in 0..curve.n_values.len() {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            curve.n_values[i], curve.scheme, curve.n_mse[i], curve.std_err[i], curve.trials[i], curve.seed
        )
        .expect("writing to a String cannot fail");
    }
}

impl Tabular for RiskCurve {
    fn to_csv(&self) -> String {
        let mut out = format!("{RISK_CSV_HEADER}\n");
        push_risk_rows(&mut out, self);
        out
    }
}

impl Tabular for [RiskCurve] {
    fn to_csv(&self) -> String {
        let mut out = format!("{RISK_CSV_HEADER}\n");
        for curve in self {
            push_risk_rows(&mut out, curve);
        }
        out
    }
}

impl Tabular for Vec<RiskCurve> {
    fn to_csv(&self) -> String {
        self.as_slice().to_csv()
    }
}

impl Tabular for DesignSolution {
    fn to_csv(&self) -> String {
        self.density.to_csv()
    }
}

impl Tabular for crate::bounds::BoundReport {
    fn to_csv(&self) -> String {
        crate::bounds::BoundReport::to_csv(self)
    }
}

pub fn render<T: Tabular + Serialize + ?Sized>(item: &T, format: OutputFormat) -> Result<String> {
    match format {
        OutputFormat::Csv => Ok(item.to_csv()),
        OutputFormat::Json => serde_json::to_string_pretty(item)
            .map(|mut s| {
                s.push('\n');
                s
            })
            .map_err(|e| Error::Experiment(format!("JSON encoding failed: {e}"))),
    }
}

pub fn write_outputs<T: Tabular + Serialize + ?Sized>(item: &T, path: &Path, format: OutputFormat) -> Result<()> {
    fs::write(path, render(item, format)?).map_err(|e| Error::io(path, e))
}

/// One parsed row of a risk-curve CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskRow {
    pub n: usize,
    pub scheme: String,
    pub n_mse: f64,
    pub std_err: f64,
    pub trials: usize,
    pub seed: u64,
}

pub fn parse_risk_csv(text: &str) -> Result<Vec<RiskRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(RISK_CSV_HEADER) {
        return Err(Error::parse("risk curve", format!("expected header {RISK_CSV_HEADER:?}")));
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|line| {
            let cols: Vec<&str> = line.split(',').collect();
            let bad = |e: String| Error::parse("risk curve", format!("{line:?}: {e}"));
            if cols.len() != 6 {
                return Err(bad("expected 6 columns".into()));
            }
            Ok(RiskRow {
                n: cols[0].parse().map_err(|e| bad(format!("{e}")))?,
                scheme: cols[1].to_string(),
                n_mse: cols[2].parse().map_err(|e| bad(format!("{e}")))?,
                std_err: cols[3].parse().map_err(|e| bad(format!("{e}")))?,
                trials: cols[4].parse().map_err(|e| bad(format!("{e}")))?,
                seed: cols[5].parse().map_err(|e| bad(format!("{e}")))?,
            })
        })
        .collect()
}

/// Side-by-side table `itr,SGD,split` of an SGD curve and a one-round curve
/// sharing the same `n` values.
pub fn adaptive_comparison_table(sgd: &RiskCurve, split: &RiskCurve) -> Result<String> {
    if sgd.n_values != split.n_values {
        return Err(Error::InvalidArgument("curves must share their n values".into()));
    }
    let mut out = String::from("itr,SGD,split\n");
    for ((n, a), b) in sgd.n_values.iter().zip(&sgd.n_mse).zip(&split.n_mse) {
        writeln!(out, "{n},{a},{b}").expect("writing to a String cannot fail");
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(scheme: Scheme, n_list: Vec<usize>, trials: usize) -> ExperimentConfig {
        ExperimentConfig {
            family: LocationFamily::gaussian(1.0).unwrap(),
            scheme,
            theta_source: ThetaSource::Fixed { theta: 0.0 },
            n_list,
            trials,
            seed: 42,
        }
    }

    #[test]
    fn config_validation() {
        assert!(config(Scheme::BaselineMean, vec![], 10).validate().is_err());
        assert!(config(Scheme::BaselineMean, vec![10, 5], 10).validate().is_err());
        assert!(config(Scheme::BaselineMean, vec![10], 0).validate().is_err());
        let one_round = Scheme::OneRound { theta0: 0.0, n1: Some(10) };
        assert!(config(one_round, vec![10], 5).validate().is_err());
        let mut c = config(Scheme::BaselineMean, vec![10], 5);
        c.theta_source = ThetaSource::Uniform { lo: 1.0, hi: 1.0 };
        assert!(c.validate().is_err());
    }

    #[test]
    fn theta_source_grammar() {
        for s in ["fixed:0.5", "uniform:-1.64:1.64"] {
            assert_eq!(s.parse::<ThetaSource>().unwrap().to_string(), s);
        }
        assert!("uniform:1:0".parse::<ThetaSource>().is_err());
        assert!("normal:0:1".parse::<ThetaSource>().is_err());
        assert!("fixed:x".parse::<ThetaSource>().is_err());
    }

    #[test]
    fn baseline_mean_matches_variance() {
        let curve = run_risk_experiment(&config(Scheme::BaselineMean, vec![10, 100], 4000)).unwrap();
        for (v, se) in curve.n_mse.iter().zip(&curve.std_err) {
            assert!((v - 1.0).abs() < 3.0 * se + 1e-12, "{v} ± {se}");
        }
        assert_eq!(curve.trials, vec![4000, 4000]);
        assert_eq!(curve.failures, vec![0, 0]);
    }

    #[test]
    fn adding_n_values_keeps_existing_trials() {
        let a = run_risk_experiment(&config(Scheme::BaselineMedian, vec![50], 200)).unwrap();
        let b = run_risk_experiment(&config(Scheme::BaselineMedian, vec![20, 50], 200)).unwrap();
        assert_eq!(a.n_mse[0], b.n_mse[1]);
    }

    #[test]
    fn csv_layout_and_round_trip() {
        let curve = run_risk_experiment(&config(Scheme::BaselineMean, vec![5, 9], 50)).unwrap();
        let csv = curve.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], RISK_CSV_HEADER);
        let rows = parse_risk_csv(&csv).unwrap();
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.n, curve.n_values[i]);
            assert_eq!(row.scheme, "mean");
            assert_eq!(row.n_mse, curve.n_mse[i]);
            assert_eq!(row.std_err, curve.std_err[i]);
            assert_eq!((row.trials, row.seed), (50, 42));
        }
        let json = render(&curve, OutputFormat::Json).unwrap();
        let back: RiskCurve = serde_json::from_str(&json).unwrap();
        assert_eq!(back, curve);
        assert!(parse_risk_csv("n,scheme\n").is_err());
    }

    #[test]
    fn write_outputs_reports_path() {
        let curve = run_risk_experiment(&config(Scheme::BaselineMean, vec![5], 10)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("risk.csv");
        write_outputs(&curve, &path, OutputFormat::Csv).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), curve.to_csv());
        let bad = dir.path().join("missing").join("risk.csv");
        match write_outputs(&curve, &bad, OutputFormat::Csv) {
            Err(e @ Error::Io { .. }) => assert!(e.to_string().contains("missing")),
            other => panic!("expected an I/O error, got {other:?}"),
        }
    }

    #[test]
    fn comparison_table_layout() {
        let a = run_risk_experiment(&config(Scheme::BaselineMean, vec![5, 9], 10)).unwrap();
        let b = run_risk_experiment(&config(Scheme::BaselineMedian, vec![5, 9], 10)).unwrap();
        let t = adaptive_comparison_table(&a, &b).unwrap();
        assert!(t.starts_with("itr,SGD,split\n5,"));
        assert_eq!(t.lines().count(), 3);
    }

    #[test]
    fn are_curve_examples() {
        let g = LocationFamily::gaussian(1.0).unwrap();
        let mut curve = run_risk_experiment(&config(Scheme::BaselineMean, vec![5, 9], 10)).unwrap();
        curve.n_mse = vec![std::f64::consts::FRAC_PI_2, 1.0];
        let are = compute_are_curve(&curve, &g).unwrap();
        assert!((are[0].1 - std::f64::consts::FRAC_2_PI).abs() < 1e-15);
        assert_eq!(are[1], (9, 1.0));
    }

    #[test]
    fn ml_boundary_failures_are_counted() {
        // Every threshold sits far below theta, so almost every trial sees
        // only zeros and the likelihood is maximized at the upper boundary.
        let density = ThresholdDensity::point_mass(-8.0).unwrap();
        let scheme = Scheme::MlThresholdDensity {
            density,
            theta_bounds: Some((-3.0, 3.0)),
        };
        match run_risk_experiment(&config(scheme, vec![20], 100)) {
            Err(Error::Experiment(msg)) => assert!(msg.contains("failed")),
            other => panic!("expected an experiment error, got {other:?}"),
        }
    }

    #[test]
    fn fast_rate_rejects_out_of_range_theta() {
        let mut rng = rng_for(1, &[]);
        let n = 10_000;
        let bound = (n as f64).ln();
        assert!(matches!(
            uniform_fast_rate_trial(bound + 0.1, 1.0, n, &mut rng),
            Err(Error::Domain(_))
        ));
        assert!(uniform_fast_rate_trial(0.3, 1.0, 3, &mut rng).is_err());
        let est = uniform_fast_rate_trial(0.3, 1.0, n, &mut rng).unwrap();
        assert!((est - 0.3).abs() < 8.0 * bound / (n as f64).powf(0.75));
    }

    #[test]
    fn fast_rate_scales_with_halfwidth() {
        let a = uniform_fast_rate_experiment(1.0, 2500, 300, 5).unwrap();
        let b = uniform_fast_rate_experiment(2.0, 2500, 300, 5).unwrap();
        assert!((b.radius - 2.0 * a.radius).abs() < 1e-15);
        assert!((b.median_abs_error - 2.0 * a.median_abs_error).abs() < 1e-12);
    }
}
