//! Symmetric log-concave location families.
//!
//! Every family is centred at zero; callers apply the location shift
//! themselves (`pdf(x - theta)`). Besides the density, distribution and
//! quantile functions, the family exposes the one-bit precision functional
//!
//! ```text
//! eta(x) = f(x)^2 / (F(x) (1 - F(x)))
//! ```
//!
//! which is the Fisher information about a location parameter carried by a
//! single threshold bit placed at offset `x`, and its generalization
//! `eta_delta(x) = f(x)^(2+delta) / (F(x) (1 - F(x)))^(1+delta)`.
//!
//! Evaluation is carried out in log space wherever tails are involved so that
//! `eta` stays accurate far from the centre (e.g. `eta(10)` for the standard
//! normal is about `1e-22`).
//!
//! Scale conventions: `Gaussian` takes the standard deviation, `Laplace` the
//! diversity `b` (density `exp(-|x|/b) / 2b`), `GeneralizedNormal` the `alpha`
//! of `exp(-|x/alpha|^p)`, and `Uniform` the half-width of its support.

use std::f64::consts::{LN_2, SQRT_2};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use libm::erfc;
use statrs::function::erf::erfc_inv;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::quadrature::{integrate, Tolerance};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Tail integrals of the generalized normal are computed to this relative
/// accuracy (absolute accuracy near the centre is therefore below 1e-12).
const GENNORM_TOL: Tolerance = Tolerance::new(1e-300, 1e-13);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FamilyKind {
    Gaussian,
    Laplace,
    GeneralizedNormal { shape: f64 },
    Uniform,
}

/// A centred, symmetric, log-concave density with a scale parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FamilySpec", into = "FamilySpec")]
pub struct LocationFamily {
    kind: FamilyKind,
    scale: f64,
    /// log of the density at the origin, cached at construction.
    log_f0: f64,
}

#[derive(Serialize, Deserialize)]
struct FamilySpec {
    #[serde(flatten)]
    kind: FamilyKind,
    scale: f64,
}

impl TryFrom<FamilySpec> for LocationFamily {
    type Error = Error;

    fn try_from(spec: FamilySpec) -> Result<Self> {
        LocationFamily::new(spec.kind, spec.scale)
    }
}

impl From<LocationFamily> for FamilySpec {
    fn from(f: LocationFamily) -> Self {
        FamilySpec {
            kind: f.kind,
            scale: f.scale,
        }
    }
}

impl LocationFamily {
    pub fn new(kind: FamilyKind, scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "family scale must be positive and finite, got {scale}"
            )));
        }
        let log_f0 = match kind {
            FamilyKind::Gaussian => -LN_SQRT_2PI - scale.ln(),
            FamilyKind::Laplace => -(2.0 * scale).ln(),
            FamilyKind::GeneralizedNormal { shape } => {
                if !(shape.is_finite() && shape >= 1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "generalized normal shape must be >= 1 for log-concavity, got {shape}"
                    )));
                }
                shape.ln() - LN_2 - scale.ln() - ln_gamma(1.0 / shape)
            }
            FamilyKind::Uniform => -(2.0 * scale).ln(),
        };
        Ok(Self {
            kind,
            scale,
            log_f0,
        })
    }

    pub fn gaussian(sigma: f64) -> Result<Self> {
        Self::new(FamilyKind::Gaussian, sigma)
    }

    pub fn laplace(b: f64) -> Result<Self> {
        Self::new(FamilyKind::Laplace, b)
    }

    pub fn generalized_normal(shape: f64, alpha: f64) -> Result<Self> {
        Self::new(FamilyKind::GeneralizedNormal { shape }, alpha)
    }

    pub fn uniform(half_width: f64) -> Result<Self> {
        Self::new(FamilyKind::Uniform, half_width)
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self.kind, FamilyKind::Uniform)
    }

    /// Closed support `[lo, hi]` (infinite for everything but the uniform).
    pub fn support(&self) -> (f64, f64) {
        match self.kind {
            FamilyKind::Uniform => (-self.scale, self.scale),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.log_pdf(x).exp()
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        let z = x / self.scale;
        match self.kind {
            FamilyKind::Gaussian => self.log_f0 - 0.5 * z * z,
            FamilyKind::Laplace => self.log_f0 - z.abs(),
            FamilyKind::GeneralizedNormal { shape } => self.log_f0 - z.abs().powf(shape),
            FamilyKind::Uniform => {
                if z.abs() <= 1.0 {
                    self.log_f0
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        if x <= 0.0 {
            self.lower_tail(-x)
        } else {
            1.0 - self.lower_tail(x)
        }
    }

    /// `log F(x)`, accurate deep into the lower tail.
    pub fn log_cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            self.log_lower_tail(-x)
        } else {
            (-self.lower_tail(x)).ln_1p()
        }
    }

    /// `F(-a) = 1 - F(a)` for `a >= 0`.
    fn lower_tail(&self, a: f64) -> f64 {
        debug_assert!(a >= 0.0);
        let z = a / self.scale;
        match self.kind {
            FamilyKind::Gaussian => 0.5 * erfc(z / SQRT_2),
            FamilyKind::Laplace => 0.5 * (-z).exp(),
            FamilyKind::GeneralizedNormal { shape } => self.gennorm_tail(z, shape),
            FamilyKind::Uniform => (0.5 * (1.0 - z)).max(0.0),
        }
    }

    fn log_lower_tail(&self, a: f64) -> f64 {
        let z = a / self.scale;
        match self.kind {
            FamilyKind::Gaussian if z > 35.0 => {
                // Mills-ratio expansion; erfc underflows shortly after this.
                let z2 = z * z;
                let series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2);
                -LN_SQRT_2PI - 0.5 * z2 - z.ln() + series.ln()
            }
            FamilyKind::Laplace => -LN_2 - z,
            _ => self.lower_tail(a).ln(),
        }
    }

    /// `∫_z^∞ f` for the standardized generalized normal, by quadrature.
    fn gennorm_tail(&self, z: f64, shape: f64) -> f64 {
        let log_c = self.log_f0 + self.scale.ln();
        let zp = z.powf(shape);
        // Beyond `upper` the integrand is below exp(-700) relative to f(z).
        let upper = (zp + 700.0).powf(1.0 / shape);
        let density = |u: f64| (log_c - u.powf(shape)).exp();
        // Split near the bulk so the adaptive rule sees the shape early.
        let knot = (z + 1.0).min(upper);
        let near = integrate(density, z, knot, GENNORM_TOL);
        let far = integrate(density, knot, upper, GENNORM_TOL);
        match (near, far) {
            (Ok(a), Ok(b)) => a + b,
            // Unreachable for shape >= 1 with finite z; keep a sane fallback.
            _ => f64::NAN,
        }
    }

    /// Inverse distribution function.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain(format!("quantile level must lie in (0, 1), got {p}")));
        }
        if p == 0.5 {
            return Ok(0.0);
        }
        // Work with the lower tail so that small probabilities keep precision.
        let (tail, sign) = if p < 0.5 { (p, -1.0) } else { (1.0 - p, 1.0) };
        let a = match self.kind {
            FamilyKind::Gaussian => {
                let guess = SQRT_2 * erfc_inv(2.0 * tail) * self.scale;
                self.polish_tail(guess, tail)
            }
            FamilyKind::Laplace => -self.scale * (2.0 * tail).ln(),
            FamilyKind::Uniform => self.scale * (1.0 - 2.0 * tail),
            FamilyKind::GeneralizedNormal { .. } => self.invert_tail(tail),
        };
        Ok(sign * a)
    }

    /// Newton steps on `F(-a) = tail`.
    fn polish_tail(&self, mut a: f64, tail: f64) -> f64 {
        for _ in 0..3 {
            let f = self.pdf(a);
            if f <= 0.0 {
                break;
            }
            let step = (self.lower_tail(a) - tail) / f;
            a += step;
            if step.abs() <= 1e-15 * a.abs().max(1.0) {
                break;
            }
        }
        a
    }

    /// Bisection on the monotone tail followed by Newton polishing.
    fn invert_tail(&self, tail: f64) -> f64 {
        let mut lo = 0.0;
        let mut hi = self.scale;
        while self.lower_tail(hi) > tail {
            lo = hi;
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.lower_tail(mid) > tail {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-9 * self.scale {
                break;
            }
        }
        self.polish_tail(0.5 * (lo + hi), tail)
    }

    fn check_open_support(&self, x: f64) -> Result<()> {
        if !x.is_finite() {
            return Err(Error::Domain(format!("argument must be finite, got {x}")));
        }
        if self.is_uniform() && x.abs() >= self.scale {
            return Err(Error::Domain(format!(
                "{x} is outside the open support (-{s}, {s})",
                s = self.scale
            )));
        }
        Ok(())
    }

    /// `log F(x) + log F(-x)`.
    fn log_bernoulli_variance(&self, x: f64) -> f64 {
        self.log_cdf(x) + self.log_cdf(-x)
    }

    pub fn eta(&self, x: f64) -> Result<f64> {
        self.eta_delta(x, 0.0)
    }

    pub fn eta_delta(&self, x: f64, delta: f64) -> Result<f64> {
        self.check_open_support(x)?;
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "delta must be non-negative, got {delta}"
            )));
        }
        let log = (2.0 + delta) * self.log_pdf(x) - (1.0 + delta) * self.log_bernoulli_variance(x);
        Ok(log.exp())
    }

    /// Failure rate `f(x) / (1 - F(x))`.
    pub fn hazard(&self, x: f64) -> Result<f64> {
        self.check_open_support(x)?;
        Ok((self.log_pdf(x) - self.log_cdf(-x)).exp())
    }

    /// Density at the centre, `f(0)`.
    pub fn f0(&self) -> f64 {
        self.log_f0.exp()
    }

    /// Location Fisher information `E[(f'/f)^2]`.
    pub fn fisher_location(&self) -> Result<f64> {
        let s2 = self.scale * self.scale;
        match self.kind {
            FamilyKind::Gaussian => Ok(1.0 / s2),
            FamilyKind::Laplace => Ok(1.0 / s2),
            FamilyKind::GeneralizedNormal { shape } => {
                // (f'/f)(x) = -p |x|^(p-1) / alpha^p sgn(x); integrate over x >= 0, double.
                let log_c = self.log_f0 + self.scale.ln();
                let upper = 800f64.powf(1.0 / shape);
                let integrand = |z: f64| {
                    let score = shape * z.powf(shape - 1.0);
                    score * score * (log_c - z.powf(shape)).exp()
                };
                let standardized = 2.0 * integrate(integrand, 0.0, upper, Tolerance::new(1e-14, 1e-13))?;
                Ok(standardized / s2)
            }
            FamilyKind::Uniform => Err(Error::UnsupportedFamily {
                operation: "fisher_location",
                family: self.to_string(),
            }),
        }
    }

    /// Draws one centred variate.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.kind {
            FamilyKind::Gaussian => {
                let z: f64 = StandardNormal.sample(rng);
                self.scale * z
            }
            FamilyKind::Laplace => {
                let u: f64 = rng.random::<f64>() - 0.5;
                -self.scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
            }
            FamilyKind::GeneralizedNormal { shape } => {
                let gamma = Gamma::new(1.0 / shape, 1.0).expect("shape validated at construction");
                let g: f64 = gamma.sample(rng);
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                sign * self.scale * g.powf(1.0 / shape)
            }
            FamilyKind::Uniform => rng.random_range(-self.scale..self.scale),
        }
    }

    /// Variance of the family (finite for every log-concave density).
    pub fn variance(&self) -> f64 {
        let s2 = self.scale * self.scale;
        match self.kind {
            FamilyKind::Gaussian => s2,
            FamilyKind::Laplace => 2.0 * s2,
            FamilyKind::GeneralizedNormal { shape } => {
                s2 * (ln_gamma(3.0 / shape) - ln_gamma(1.0 / shape)).exp()
            }
            FamilyKind::Uniform => s2 / 3.0,
        }
    }
}

impl fmt::Display for LocationFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            FamilyKind::Gaussian => write!(f, "gaussian:{}", self.scale),
            FamilyKind::Laplace => write!(f, "laplace:{}", self.scale),
            FamilyKind::GeneralizedNormal { shape } => write!(f, "gennorm:{shape}:{}", self.scale),
            FamilyKind::Uniform => write!(f, "uniform:{}", self.scale),
        }
    }
}

/// Parses `gaussian:SIGMA`, `laplace:B`, `gennorm:P:ALPHA` and `uniform:HALFWIDTH`.
impl FromStr for LocationFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |t: &str| {
            t.parse::<f64>()
                .map_err(|e| Error::parse("family", format!("{t:?}: {e}")))
        };
        match parts.as_slice() {
            ["gaussian" | "normal", sigma] => Self::gaussian(num(sigma)?),
            ["laplace", b] => Self::laplace(num(b)?),
            ["gennorm", p, alpha] => Self::generalized_normal(num(p)?, num(alpha)?),
            ["uniform", h] => Self::uniform(num(h)?),
            _ => Err(Error::parse(
                "family",
                format!("{s:?} (expected gaussian:S, laplace:B, gennorm:P:A or uniform:H)"),
            )),
        }
    }
}
