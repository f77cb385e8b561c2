//! Lower bounds and asymptotic precision functionals.

use std::f64::consts::{LN_2, PI};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::distributions::{FamilyKind, LocationFamily};
use crate::encoding::ThresholdDensity;
use crate::error::{Error, Result};
use crate::quadrature::{integrate, Tolerance};

/// Prior on the location parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriorSpec {
    Gaussian { sigma: f64 },
    /// Flat on `[-half_width, half_width]`. Its density does not vanish at
    /// the endpoints, so it has no usable Fisher information.
    Uniform { half_width: f64 },
    PointMass { theta: f64 },
    /// `cos^2(pi theta / (2a)) / a` on `[-a, a]`, the minimum-information
    /// prior with that support.
    CosineSquared { half_width: f64 },
}

impl PriorSpec {
    fn validate(&self) -> Result<()> {
        let (name, v) = match *self {
            PriorSpec::Gaussian { sigma } => ("sigma", sigma),
            PriorSpec::Uniform { half_width } | PriorSpec::CosineSquared { half_width } => {
                ("half_width", half_width)
            }
            PriorSpec::PointMass { theta } => {
                return if theta.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidArgument("point-mass prior must be finite".into()))
                };
            }
        };
        if v.is_finite() && v > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("prior {name} must be positive, got {v}")))
        }
    }

    /// Prior Fisher information `E[(pi'/pi)^2]`, with 0 for a point mass.
    pub fn fisher_info(&self) -> Result<f64> {
        self.validate()?;
        match *self {
            PriorSpec::Gaussian { sigma } => Ok(1.0 / (sigma * sigma)),
            PriorSpec::PointMass { .. } => Ok(0.0),
            PriorSpec::CosineSquared { half_width } => Ok(PI * PI / (half_width * half_width)),
            PriorSpec::Uniform { .. } => Err(Error::UnsupportedFamily {
                operation: "prior fisher information",
                family: self.to_string(),
            }),
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            PriorSpec::Gaussian { sigma } => sigma * sigma,
            PriorSpec::Uniform { half_width } => half_width * half_width / 3.0,
            PriorSpec::PointMass { .. } => 0.0,
            PriorSpec::CosineSquared { half_width } => half_width * half_width * (1.0 / 3.0 - 2.0 / (PI * PI)),
        }
    }
}

impl fmt::Display for PriorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            PriorSpec::Gaussian { sigma } => write!(f, "gaussian:{sigma}"),
            PriorSpec::Uniform { half_width } => write!(f, "uniform:{half_width}"),
            PriorSpec::PointMass { theta } => write!(f, "point:{theta}"),
            PriorSpec::CosineSquared { half_width } => write!(f, "cosine:{half_width}"),
        }
    }
}

impl FromStr for PriorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |detail: String| Error::parse("prior", detail);
        let (name, arg) = s
            .split_once(':')
            .ok_or_else(|| bad(format!("expected name:value, got {s:?}")))?;
        let v: f64 = arg.parse().map_err(|e| bad(format!("{arg:?}: {e}")))?;
        let prior = match name {
            "gaussian" => PriorSpec::Gaussian { sigma: v },
            "uniform" => PriorSpec::Uniform { half_width: v },
            "point" => PriorSpec::PointMass { theta: v },
            "cosine" => PriorSpec::CosineSquared { half_width: v },
            other => return Err(bad(format!("unknown prior {other:?}"))),
        };
        prior.validate()?;
        Ok(prior)
    }
}

fn check_n(n: usize) -> Result<f64> {
    if n == 0 {
        Err(Error::InvalidArgument("n must be at least 1".into()))
    } else {
        Ok(n as f64)
    }
}

/// Bayesian lower bound `1 / (4 f(0)^2 n + I0)` on the MSE of any estimator
/// built from `n` adaptively encoded bits.
pub fn van_trees_bound(family: &LocationFamily, n: usize, prior: &PriorSpec) -> Result<f64> {
    let n = check_n(n)?;
    let f0 = family.f0();
    Ok(1.0 / (4.0 * f0 * f0 * n + prior.fisher_info()?))
}

/// Distortion solving the sum-rate equation of the quadratic Gaussian CEO
/// problem with rate one bit per encoder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CeoBound {
    pub distortion: f64,
    /// `|g(D)|` at the returned distortion, in bits.
    pub residual: f64,
}

const CEO_MAX_ITER: usize = 200;

/// `log2(s_t2 / D) + n log2(Dn / (Dn - s2 + D s2 / s_t2)) - 2n`; decreasing in `D`.
fn ceo_equation(d: f64, n: f64, s2: f64, st2: f64) -> f64 {
    let u = s2 * (1.0 - d / st2) / (d * n);
    (st2 / d).log2() - n * (-u).ln_1p() / LN_2 - 2.0 * n
}

pub fn ceo_bound(family: &LocationFamily, n: usize, prior: &PriorSpec) -> Result<CeoBound> {
    let nf = check_n(n)?;
    if family.kind() != FamilyKind::Gaussian {
        return Err(Error::UnsupportedFamily {
            operation: "ceo_bound",
            family: family.to_string(),
        });
    }
    let PriorSpec::Gaussian { sigma: sigma_theta } = *prior else {
        return Err(Error::UnsupportedFamily {
            operation: "ceo_bound",
            family: format!("prior {prior}"),
        });
    };
    prior.validate()?;
    let s2 = family.scale() * family.scale();
    let st2 = sigma_theta * sigma_theta;
    // The unquantized Bayes MSE, where the rate term diverges.
    let floor = (s2 * st2 / (nf * st2 + s2)).max(1e-12);
    let g = |d: f64| ceo_equation(d, nf, s2, st2);

    let (mut lo, mut hi) = (floor, st2);
    debug_assert!(g(hi) < 0.0);
    debug_assert!({
        let probes: Vec<f64> = (1..8).map(|k| g(lo + (hi - lo) * f64::from(k) / 8.0)).collect();
        probes.windows(2).all(|w| w[1] <= w[0])
    });
    for _ in 0..CEO_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (g_lo, g_hi) = (g(lo), g(hi));
    let (distortion, residual) = if g_lo.is_finite() && g_lo.abs() < g_hi.abs() {
        (lo, g_lo.abs())
    } else {
        (hi, g_hi.abs())
    };
    Ok(CeoBound { distortion, residual })
}

/// Closed-form large-`n` approximation `4 s2 / (3n + 4 s2 / s_t2)` of the CEO distortion.
pub fn ceo_asymptotic(sigma: f64, sigma_theta: f64, n: usize) -> f64 {
    let s2 = sigma * sigma;
    4.0 * s2 / (3.0 * n as f64 + 4.0 * s2 / (sigma_theta * sigma_theta))
}

/// Asymptotic precision `sum_j w_j eta(t_j - theta)` of ML from thresholds drawn from `density`.
pub fn kappa(family: &LocationFamily, density: &ThresholdDensity, theta: f64) -> Result<f64> {
    if !theta.is_finite() {
        return Err(Error::InvalidArgument("theta must be finite".into()));
    }
    density
        .atoms()
        .try_fold(0.0, |acc, (t, w)| Ok(acc + w * family.eta(t - theta)?))
}

/// `(1/2T) \int_0^{2T} eta(t) dt`, the worst-case precision of thresholds
/// spread uniformly over `[-T, T]`.
pub fn kappa_uniform(family: &LocationFamily, half_width: f64) -> Result<f64> {
    if !(half_width.is_finite() && half_width > 0.0) {
        return Err(Error::InvalidArgument(format!("T must be positive, got {half_width}")));
    }
    let eta = |t: f64| family.eta(t).unwrap_or(0.0);
    let width = 2.0 * half_width;
    let tol = Tolerance::new(1e-12 * width, 1e-12);
    Ok(integrate(eta, 0.0, width, tol)? / width)
}

/// `1 / (4 f(0)^2)`, the asymptotic variance of the sample median.
pub fn median_asymptotic_variance(family: &LocationFamily) -> f64 {
    let f0 = family.f0();
    1.0 / (4.0 * f0 * f0)
}

/// Efficient variance over `asymptotic_variance`: `1 / (I_f V)`.
pub fn are_of(family: &LocationFamily, asymptotic_variance: f64) -> Result<f64> {
    if !(asymptotic_variance.is_finite() && asymptotic_variance > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "asymptotic variance must be positive, got {asymptotic_variance}"
        )));
    }
    Ok(1.0 / (family.fisher_location()? * asymptotic_variance))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    VanTrees,
    Ceo,
    KappaCurve,
    KappaUniform,
    MedianVariance,
}

impl BoundKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            BoundKind::VanTrees => "van-trees",
            BoundKind::Ceo => "ceo",
            BoundKind::KappaCurve => "kappa-curve",
            BoundKind::KappaUniform => "kappa-uniform",
            BoundKind::MedianVariance => "median-variance",
        }
    }
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BoundKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            BoundKind::VanTrees,
            BoundKind::Ceo,
            BoundKind::KappaCurve,
            BoundKind::KappaUniform,
            BoundKind::MedianVariance,
        ]
        .into_iter()
        .find(|k| k.as_str() == s)
        .ok_or_else(|| Error::parse("bound kind", format!("unknown kind {s:?}")))
    }
}

/// A bound evaluated over a grid of `n` or `theta` values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub bound_kind: BoundKind,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
}

impl BoundReport {
    pub fn new(bound_kind: BoundKind, grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::InvalidArgument("grid and values differ in length".into()));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "{bound_kind} value {v} is not positive and finite"
            )));
        }
        Ok(Self {
            bound_kind,
            grid,
            values,
        })
    }

    /// `n * van_trees_bound` for each `n`.
    pub fn van_trees(family: &LocationFamily, prior: &PriorSpec, n_list: &[usize]) -> Result<Self> {
        let values = n_list
            .iter()
            .map(|&n| Ok(n as f64 * van_trees_bound(family, n, prior)?))
            .collect::<Result<_>>()?;
        Self::new(BoundKind::VanTrees, n_list.iter().map(|&n| n as f64).collect(), values)
    }

    /// `n * D*` for each `n`.
    pub fn ceo(family: &LocationFamily, prior: &PriorSpec, n_list: &[usize]) -> Result<Self> {
        let values = n_list
            .iter()
            .map(|&n| Ok(n as f64 * ceo_bound(family, n, prior)?.distortion))
            .collect::<Result<_>>()?;
        Self::new(BoundKind::Ceo, n_list.iter().map(|&n| n as f64).collect(), values)
    }

    pub fn kappa_curve(family: &LocationFamily, density: &ThresholdDensity, thetas: &[f64]) -> Result<Self> {
        let values = thetas
            .iter()
            .map(|&th| kappa(family, density, th))
            .collect::<Result<_>>()?;
        Self::new(BoundKind::KappaCurve, thetas.to_vec(), values)
    }

    /// `kappa_uniform(T)` for each half-width `T`.
    pub fn kappa_uniform(family: &LocationFamily, half_widths: &[f64]) -> Result<Self> {
        let values = half_widths
            .iter()
            .map(|&t| kappa_uniform(family, t))
            .collect::<Result<_>>()?;
        Self::new(BoundKind::KappaUniform, half_widths.to_vec(), values)
    }

    /// Single-row report holding `1 / (4 f(0)^2)`; the grid entry is the family scale.
    pub fn median_variance(family: &LocationFamily) -> Result<Self> {
        Self::new(
            BoundKind::MedianVariance,
            vec![family.scale()],
            vec![median_asymptotic_variance(family)],
        )
    }

    /// CSV with header `grid,value,bound_kind`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("grid,value,bound_kind\n");
        for (g, v) in self.grid.iter().zip(&self.values) {
            writeln!(out, "{g},{v},{}", self.bound_kind).expect("writing to a String cannot fail");
        }
        out
    }
}
