//! Estimators that turn one-bit messages back into a location estimate.

use serde::{Deserialize, Serialize};

use crate::distributions::LocationFamily;
use crate::encoding::{clamped_fraction, OneRoundRecord, SgdTrajectory};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Estimator {
    QuantileInversion,
    SgdAverage,
    OneRound,
    MaxLikelihood,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub theta_hat: f64,
    pub scheme: Estimator,
    pub n_bits: usize,
    /// Set when the likelihood has no interior maximizer and `theta_hat` is an
    /// endpoint of the search interval.
    pub at_boundary: bool,
}

impl EstimateResult {
    fn interior(theta_hat: f64, scheme: Estimator, n_bits: usize) -> Self {
        Self {
            theta_hat,
            scheme,
            n_bits,
            at_boundary: false,
        }
    }
}

fn count_ones(bits: &[u8]) -> usize {
    bits.iter().filter(|&&b| b == 1).count()
}

/// `theta0 - F^{-1}(p)` with `p` the clamped fraction of ones.
fn invert(bits: &[u8], threshold: f64, family: &LocationFamily) -> Result<f64> {
    if bits.is_empty() {
        return Err(Error::InvalidArgument("no bits to invert".into()));
    }
    let p = clamped_fraction(count_ones(bits), bits.len());
    Ok(threshold - family.quantile(p)?)
}

/// Inverts the fraction of samples seen below a single fixed threshold.
pub fn estimate_quantile_inversion(
    bits: &[u8],
    theta0: f64,
    family: &LocationFamily,
) -> Result<EstimateResult> {
    let theta_hat = invert(bits, theta0, family)?;
    Ok(EstimateResult::interior(theta_hat, Estimator::QuantileInversion, bits.len()))
}

/// Polyak average of `theta_1..theta_n`; the initial iterate is excluded.
pub fn estimate_sgd_average(traj: &SgdTrajectory) -> Result<EstimateResult> {
    let data_iterates = traj.iterates.get(1..).unwrap_or_default();
    if data_iterates.is_empty() {
        return Err(Error::InvalidArgument("trajectory has no data-driven iterates".into()));
    }
    let mean = data_iterates.iter().sum::<f64>() / data_iterates.len() as f64;
    Ok(EstimateResult::interior(mean, Estimator::SgdAverage, traj.bits.len()))
}

/// Second-stage quantile inversion around `T_n`.
pub fn estimate_one_round(record: &OneRoundRecord, family: &LocationFamily) -> Result<EstimateResult> {
    let theta_hat = invert(&record.second_stage_bits, record.t_n, family)?;
    Ok(EstimateResult::interior(theta_hat, Estimator::OneRound, record.n_bits()))
}

/// Threshold bits grouped by distinct threshold.
struct BitCounts {
    thresholds: Vec<f64>,
    ones: Vec<f64>,
    zeros: Vec<f64>,
}

impl BitCounts {
    fn new(bits: &[u8], thresholds: &[f64]) -> Self {
        let mut pairs: Vec<(f64, u8)> = thresholds.iter().copied().zip(bits.iter().copied()).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out = Self {
            thresholds: Vec::new(),
            ones: Vec::new(),
            zeros: Vec::new(),
        };
        for (t, b) in pairs {
            if out.thresholds.last() != Some(&t) {
                out.thresholds.push(t);
                out.ones.push(0.0);
                out.zeros.push(0.0);
            }
            let k = out.thresholds.len() - 1;
            if b == 1 {
                out.ones[k] += 1.0;
            } else {
                out.zeros[k] += 1.0;
            }
        }
        out
    }

    /// Log-likelihood derivative in `theta`. A one at `t` has probability
    /// `F(t - theta)`, a zero `F(theta - t)`; `(log F)' = f/F` is
    /// non-increasing, so the score is too.
    fn score(&self, family: &LocationFamily, theta: f64) -> f64 {
        let mills = |x: f64| (family.log_pdf(x) - family.log_cdf(x)).exp();
        self.thresholds
            .iter()
            .zip(self.ones.iter().zip(&self.zeros))
            .map(|(&t, (&ones, &zeros))| {
                let mut s = 0.0;
                if zeros > 0.0 {
                    s += zeros * mills(theta - t);
                }
                if ones > 0.0 {
                    s -= ones * mills(t - theta);
                }
                s
            })
            .sum()
    }

    fn log_likelihood(&self, family: &LocationFamily, theta: f64) -> f64 {
        self.thresholds
            .iter()
            .zip(self.ones.iter().zip(&self.zeros))
            .map(|(&t, (&ones, &zeros))| {
                let mut l = 0.0;
                if ones > 0.0 {
                    l += ones * family.log_cdf(t - theta);
                }
                if zeros > 0.0 {
                    l += zeros * family.log_cdf(theta - t);
                }
                l
            })
            .sum()
    }
}

/// Bisection stops once the bracket is this narrow.
const ML_BRACKET_WIDTH: f64 = 1e-10;

/// Default search interval `[-10 scale, 10 scale]` for [`estimate_ml`].
pub fn default_theta_bounds(family: &LocationFamily) -> (f64, f64) {
    (-10.0 * family.scale(), 10.0 * family.scale())
}

/// Maximum-likelihood estimate of `theta` from bits `1{X_i < t_i}`.
///
/// The log-likelihood is concave, so its derivative is bisected over
/// `theta_bounds`. Without a sign change the maximizing endpoint is returned
/// and `at_boundary` is set.
pub fn estimate_ml(
    bits: &[u8],
    thresholds: &[f64],
    family: &LocationFamily,
    theta_bounds: (f64, f64),
) -> Result<EstimateResult> {
    if bits.len() != thresholds.len() {
        return Err(Error::InvalidArgument(format!(
            "{} bits but {} thresholds",
            bits.len(),
            thresholds.len()
        )));
    }
    if bits.is_empty() {
        return Err(Error::InvalidArgument("no bits to estimate from".into()));
    }
    if family.is_uniform() {
        return Err(Error::UnsupportedFamily {
            operation: "estimate_ml",
            family: family.to_string(),
        });
    }
    let (lo, hi) = theta_bounds;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::InvalidArgument(format!(
            "theta bounds must be a finite non-empty interval, got [{lo}, {hi}]"
        )));
    }
    if thresholds.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidArgument("thresholds must be finite".into()));
    }

    let counts = BitCounts::new(bits, thresholds);
    let boundary = |theta| EstimateResult {
        theta_hat: theta,
        scheme: Estimator::MaxLikelihood,
        n_bits: bits.len(),
        at_boundary: true,
    };
    let s_lo = counts.score(family, lo);
    let s_hi = counts.score(family, hi);
    if s_lo <= 0.0 && s_hi < 0.0 || s_lo > 0.0 && s_hi >= 0.0 {
        // Monotone likelihood on the whole interval.
        let pick_lo = counts.log_likelihood(family, lo) >= counts.log_likelihood(family, hi);
        return Ok(boundary(if pick_lo { lo } else { hi }));
    }
    let (mut a, mut b) = (lo, hi);
    while b - a > ML_BRACKET_WIDTH {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if counts.score(family, mid) > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(EstimateResult::interior(0.5 * (a + b), Estimator::MaxLikelihood, bits.len()))
}
