//! Brute-force numerical checks of the inequalities behind the bounds.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::LocationFamily;
use crate::encoding::ThresholdDensity;
use crate::error::{Error, Result};
use crate::seed::rng_for;

/// Finite union of disjoint open intervals `(a_1, b_1) ∪ ... ∪ (a_K, b_K)`.
/// `a_1` may be `-inf` and `b_K` may be `+inf`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalUnion {
    intervals: Vec<(f64, f64)>,
}

impl IntervalUnion {
    pub fn new(intervals: Vec<(f64, f64)>) -> Result<Self> {
        for &(a, b) in &intervals {
            if a.is_nan() || b.is_nan() || a >= b || a == f64::INFINITY || b == f64::NEG_INFINITY {
                return Err(Error::InvalidArgument(format!("({a}, {b}) is not an interval")));
            }
        }
        if intervals.windows(2).any(|w| w[0].1 > w[1].0) {
            return Err(Error::InvalidArgument("intervals must be sorted and disjoint".into()));
        }
        Ok(Self { intervals })
    }

    /// `(-inf, t)`: the event that a single threshold bit equals one.
    pub fn below(t: f64) -> Result<Self> {
        Self::new(vec![(f64::NEG_INFINITY, t)])
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    /// The gaps of the union, up to the shared endpoints.
    pub fn complement(&self) -> Self {
        let mut out = Vec::with_capacity(self.intervals.len() + 1);
        let mut left = f64::NEG_INFINITY;
        for &(a, b) in &self.intervals {
            if left < a {
                out.push((left, a));
            }
            left = b;
        }
        if left < f64::INFINITY {
            out.push((left, f64::INFINITY));
        }
        Self { intervals: out }
    }
}

fn cdf_ext(family: &LocationFamily, x: f64) -> f64 {
    match x {
        f64::NEG_INFINITY => 0.0,
        f64::INFINITY => 1.0,
        _ => family.cdf(x),
    }
}

fn pdf_ext(family: &LocationFamily, x: f64) -> f64 {
    if x.is_infinite() {
        0.0
    } else {
        family.pdf(x)
    }
}

/// `F(b) - F(a)`, evaluated on whichever tail avoids cancellation.
fn interval_mass(family: &LocationFamily, a: f64, b: f64) -> f64 {
    if a >= 0.0 {
        cdf_ext(family, -a) - cdf_ext(family, -b)
    } else {
        cdf_ext(family, b) - cdf_ext(family, a)
    }
}

/// Probability of the region and of its complement, each as a sum of
/// positive interval masses, plus `sum_j f(a_j) - f(b_j)`.
fn region_terms(family: &LocationFamily, region: &IntervalUnion, theta: f64) -> (f64, f64, f64) {
    let shifted = |(a, b): (f64, f64)| (a - theta, b - theta);
    let p: f64 = region
        .intervals
        .iter()
        .map(|&iv| {
            let (a, b) = shifted(iv);
            interval_mass(family, a, b)
        })
        .sum();
    let q: f64 = region
        .complement()
        .intervals
        .iter()
        .map(|&iv| {
            let (a, b) = shifted(iv);
            interval_mass(family, a, b)
        })
        .sum();
    let d: f64 = region
        .intervals
        .iter()
        .map(|&iv| {
            let (a, b) = shifted(iv);
            pdf_ext(family, a) - pdf_ext(family, b)
        })
        .sum();
    (p, q, d)
}

const DEGENERATE_PROBABILITY: f64 = 1e-14;

/// Fisher information about `theta` carried by the bit `1{X in region}`.
pub fn bit_fisher_information(family: &LocationFamily, region: &IntervalUnion, theta: f64) -> Result<f64> {
    if !theta.is_finite() {
        return Err(Error::InvalidArgument("theta must be finite".into()));
    }
    let (p, q, d) = region_terms(family, region, theta);
    if p < DEGENERATE_PROBABILITY || q < DEGENERATE_PROBABILITY {
        return Err(Error::DegenerateRegion { probability: p });
    }
    Ok(d * d / (p * q))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub trials: usize,
    /// Draws left out because the check is numerically meaningless there.
    pub skipped: usize,
    /// Largest observed `lhs - rhs`; the inequality holds when this is `<= 0`.
    pub max_lhs_minus_rhs: f64,
    pub worst_case_input: Vec<f64>,
}

impl ViolationReport {
    fn empty() -> Self {
        Self {
            trials: 0,
            skipped: 0,
            max_lhs_minus_rhs: f64::NEG_INFINITY,
            worst_case_input: Vec::new(),
        }
    }

    fn record(&mut self, margin: f64, input: &[f64]) {
        self.trials += 1;
        if margin > self.max_lhs_minus_rhs {
            self.max_lhs_minus_rhs = margin;
            self.worst_case_input = input.to_vec();
        }
    }

    fn merge(mut self, other: Self) -> Self {
        self.trials += other.trials;
        self.skipped += other.skipped;
        if other.max_lhs_minus_rhs > self.max_lhs_minus_rhs {
            self.max_lhs_minus_rhs = other.max_lhs_minus_rhs;
            self.worst_case_input = other.worst_case_input;
        }
        self
    }

    pub fn violated(&self, tol: f64) -> bool {
        self.max_lhs_minus_rhs > tol
    }
}

/// Largest step by which `eta_delta` grows when moving away from zero on a
/// `points`-point symmetric grid over `[-halfwidth, halfwidth]`.
pub fn check_eta_delta_monotone(
    family: &LocationFamily,
    delta: f64,
    grid_halfwidth: f64,
    points: usize,
) -> Result<ViolationReport> {
    if points < 3 {
        return Err(Error::InvalidArgument("need at least 3 grid points".into()));
    }
    if !(grid_halfwidth.is_finite() && grid_halfwidth > 0.0) {
        return Err(Error::InvalidArgument("grid half-width must be positive".into()));
    }
    let (lo, hi) = family.support();
    let step = 2.0 * grid_halfwidth / (points - 1) as f64;
    let xs: Vec<f64> = (0..points)
        .map(|i| -grid_halfwidth + step * i as f64)
        .filter(|&x| x > lo && x < hi)
        .collect();
    let etas: Vec<f64> = xs
        .par_iter()
        .map(|&x| family.eta_delta(x, delta))
        .collect::<Result<_>>()?;
    let mut report = ViolationReport::empty();
    for k in 1..xs.len() {
        // Outward means increasing |x|.
        let (inner, outer) = if xs[k] <= 0.0 { (k, k - 1) } else { (k - 1, k) };
        if xs[inner].abs() > xs[outer].abs() {
            continue;
        }
        report.record(etas[outer] - etas[inner], &[xs[inner], xs[outer]]);
    }
    Ok(report)
}

pub fn check_eta_monotone(family: &LocationFamily, grid_halfwidth: f64, points: usize) -> Result<ViolationReport> {
    check_eta_delta_monotone(family, 0.0, grid_halfwidth, points)
}

/// Slack allowed on lemma margins for floating-point error.
pub const MARGIN_TOL: f64 = 1e-9;
const SKIP_BELOW: f64 = 1e-12;
const CHUNK: usize = 2048;

/// `|sum (-1)^{k+1} f(x_k)|^{2+delta} / (Delta (1-Delta))^{1+delta} - max_k eta_delta(x_k)`
/// for a decreasing vector `x`, or `None` when `Delta (1-Delta)` is too small.
fn interval_lemma_margin(family: &LocationFamily, delta: f64, xs: &[f64]) -> Result<Option<f64>> {
    // x_1 >= x_2 >= ... ; the alternating sums describe the region
    // (x_2, x_1) ∪ (x_4, x_3) ∪ ..., closed off by (-inf, x_n) when n is odd.
    let mut intervals: Vec<(f64, f64)> = xs
        .chunks(2)
        .map(|c| if c.len() == 2 { (c[1], c[0]) } else { (f64::NEG_INFINITY, c[0]) })
        .filter(|(a, b)| a < b)
        .collect();
    intervals.reverse();
    let region = IntervalUnion::new(intervals)?;
    let (p, q, d) = region_terms(family, &region, 0.0);
    if p * q < SKIP_BELOW {
        return Ok(None);
    }
    let lhs = d.abs().powf(2.0 + delta) / (p * q).powf(1.0 + delta);
    let rhs = xs
        .iter()
        .map(|&x| family.eta_delta(x, delta))
        .try_fold(0.0f64, |m, v| v.map(|v| m.max(v)))?;
    Ok(Some(lhs - rhs))
}

/// Deterministic stress inputs: the equality case, near-ties and far tails.
fn adversarial_patterns(scale: f64, n_max: usize) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0]];
    for n in 1..=n_max {
        for base in [0.0, 0.5, 2.0, -1.0, 8.0, -8.0] {
            out.push((0..n).map(|k| scale * (base - 1e-6 * k as f64)).collect());
        }
        out.push((0..n).map(|k| scale * (8.0 - 16.0 * k as f64 / n.max(2) as f64)).collect());
        out.push((0..n).map(|k| if k % 2 == 0 { 8.0 * scale } else { -8.0 * scale }).collect());
    }
    for v in &mut out {
        v.sort_by(|a, b| b.total_cmp(a));
    }
    out
}

/// Monte Carlo search for violations of the interval inequality
/// `|sum (-1)^{k+1} f(x_k)|^{2+delta} / (Delta(1-Delta))^{1+delta} <= max_k eta_delta(x_k)`.
///
/// Fails with `InvalidArgument` when `eta_delta` is not monotone in `|x|`,
/// since the inequality is only claimed under that hypothesis.
pub fn check_interval_lemma(
    family: &LocationFamily,
    delta: f64,
    n_max: usize,
    trials: usize,
    seed: u64,
) -> Result<ViolationReport> {
    if !(1..=8).contains(&n_max) {
        return Err(Error::InvalidArgument(format!("n_max must lie in 1..=8, got {n_max}")));
    }
    if trials == 0 {
        return Err(Error::InvalidArgument("need at least one trial".into()));
    }
    let scale = family.scale();
    let gate = check_eta_delta_monotone(family, delta, 10.0 * scale, 2001)?;
    if gate.violated(1e-10) {
        return Err(Error::InvalidArgument(format!(
            "eta_delta is not monotone in |x| for {family} at delta = {delta} (increase {:e})",
            gate.max_lhs_minus_rhs
        )));
    }

    let mut report = ViolationReport::empty();
    for xs in adversarial_patterns(scale, n_max) {
        match interval_lemma_margin(family, delta, &xs)? {
            Some(m) => report.record(m, &xs),
            None => report.skipped += 1,
        }
    }

    let chunks = trials.div_ceil(CHUNK);
    let random = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = rng_for(seed, &[c as u64]);
            let mut local = ViolationReport::empty();
            let count = CHUNK.min(trials - c * CHUNK);
            let mut xs = Vec::with_capacity(n_max);
            for _ in 0..count {
                let n = rng.random_range(1..=n_max);
                xs.clear();
                xs.extend((0..n).map(|_| 3.0 * family.sample(&mut rng)));
                xs.sort_by(|a, b| b.total_cmp(a));
                match interval_lemma_margin(family, delta, &xs)? {
                    Some(m) => local.record(m, &xs),
                    None => local.skipped += 1,
                }
            }
            Ok(local)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(random.into_iter().fold(report, ViolationReport::merge))
}

/// Random union of at most `max_intervals` intervals with endpoints spread
/// like `3 * scale * N(0,1)`; the outermost endpoints are sometimes infinite.
pub fn random_interval_union<R: Rng + ?Sized>(rng: &mut R, max_intervals: usize, scale: f64) -> IntervalUnion {
    let k = rng.random_range(1..=max_intervals.max(1));
    let mut ends: Vec<f64> = (0..2 * k)
        .map(|_| {
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            3.0 * scale * z
        })
        .collect();
    ends.sort_by(f64::total_cmp);
    ends.dedup();
    if ends.len() % 2 == 1 {
        ends.pop();
    }
    if rng.random_bool(0.25) {
        ends[0] = f64::NEG_INFINITY;
    }
    if rng.random_bool(0.25) {
        let last = ends.len() - 1;
        ends[last] = f64::INFINITY;
    }
    let intervals = ends.chunks(2).map(|c| (c[0], c[1])).collect();
    IntervalUnion::new(intervals).expect("sorted distinct endpoints form disjoint intervals")
}

/// Monte Carlo search for regions whose bit carries more than `4 f(0)^2`.
pub fn check_fisher_bound(
    family: &LocationFamily,
    max_intervals: usize,
    trials: usize,
    seed: u64,
) -> Result<ViolationReport> {
    if trials == 0 || max_intervals == 0 {
        return Err(Error::InvalidArgument("need at least one trial and one interval".into()));
    }
    let bound = 4.0 * family.f0() * family.f0();
    let chunks = trials.div_ceil(CHUNK);
    let parts = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = rng_for(seed, &[c as u64]);
            let mut local = ViolationReport::empty();
            for _ in 0..CHUNK.min(trials - c * CHUNK) {
                let region = random_interval_union(&mut rng, max_intervals, family.scale());
                let theta = family.scale() * rng.random_range(-2.0..2.0);
                match bit_fisher_information(family, &region, theta) {
                    Ok(info) => {
                        let mut input: Vec<f64> = vec![theta];
                        input.extend(region.intervals.iter().flat_map(|&(a, b)| [a, b]));
                        local.record(info - bound, &input);
                    }
                    Err(Error::DegenerateRegion { .. }) => local.skipped += 1,
                    Err(e) => return Err(e),
                }
            }
            Ok(local)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(parts.into_iter().fold(ViolationReport::empty(), ViolationReport::merge))
}

/// Grid points where `kappa` comes within `1e-9` of `eta(0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EqualityPoints {
    pub points: usize,
    /// Maximal runs of consecutive grid points in the set.
    pub clusters: usize,
}

pub fn kappa_equality_points(
    family: &LocationFamily,
    density: &ThresholdDensity,
    theta_grid: &[f64],
) -> Result<EqualityPoints> {
    if theta_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("theta grid must be strictly increasing".into()));
    }
    let peak = family.eta(0.0)?;
    let hits = theta_grid
        .iter()
        .map(|&th| Ok(crate::bounds::kappa(family, density, th)? >= peak - 1e-9))
        .collect::<Result<Vec<bool>>>()?;
    let points = hits.iter().filter(|&&h| h).count();
    let clusters = hits
        .iter()
        .enumerate()
        .filter(|&(i, &h)| h && (i == 0 || !hits[i - 1]))
        .count();
    Ok(EqualityPoints { points, clusters })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn std_normal() -> LocationFamily {
        LocationFamily::gaussian(1.0).unwrap()
    }

    #[test]
    fn interval_union_validation_and_complement() {
        assert!(IntervalUnion::new(vec![(1.0, 0.0)]).is_err());
        assert!(IntervalUnion::new(vec![(0.0, 2.0), (1.0, 3.0)]).is_err());
        let u = IntervalUnion::new(vec![(f64::NEG_INFINITY, -1.0), (0.0, 1.0)]).unwrap();
        assert_eq!(u.complement().intervals(), &[(-1.0, 0.0), (1.0, f64::INFINITY)]);
        assert_eq!(u.complement().complement(), u);
    }

    #[test]
    fn fisher_examples() {
        let g = std_normal();
        let half = IntervalUnion::new(vec![(f64::NEG_INFINITY, 0.3)]).unwrap();
        let i = bit_fisher_information(&g, &half, 0.3).unwrap();
        assert!((i - 2.0 / PI).abs() < 1e-15);
        let upper = IntervalUnion::new(vec![(2.3, f64::INFINITY)]).unwrap();
        let i = bit_fisher_information(&g, &upper, 0.3).unwrap();
        assert!((i - 0.131_115_085_865_042_3).abs() < 1e-14);
        let far = IntervalUnion::new(vec![(50.0, f64::INFINITY)]).unwrap();
        assert!(matches!(
            bit_fisher_information(&g, &far, 0.0),
            Err(Error::DegenerateRegion { .. })
        ));
    }

    #[test]
    fn single_threshold_matches_eta() {
        for fam in [std_normal(), LocationFamily::laplace(1.3).unwrap()] {
            for t in [-6.0, -2.0, -0.1, 0.0, 0.7, 3.0, 7.0] {
                let i = bit_fisher_information(&fam, &IntervalUnion::below(t).unwrap(), 0.0).unwrap();
                let eta = fam.eta(t).unwrap();
                assert!((i - eta).abs() <= 1e-12 * eta, "{fam} t={t}: {i} vs {eta}");
            }
        }
    }

    #[test]
    fn complement_carries_the_same_information() {
        let g = std_normal();
        let mut rng = rng_for(5, &[]);
        for _ in 0..200 {
            let region = random_interval_union(&mut rng, 3, 1.0);
            let a = bit_fisher_information(&g, &region, 0.2);
            let b = bit_fisher_information(&g, &region.complement(), 0.2);
            match (a, b) {
                (Ok(a), Ok(b)) => assert!((a - b).abs() <= 1e-12 * a.max(1e-300)),
                (Err(_), Err(_)) => {}
                other => panic!("mismatch {other:?}"),
            }
        }
    }

    #[test]
    fn fisher_bound_holds_on_random_regions() {
        let r = check_fisher_bound(&std_normal(), 3, 5000, 11).unwrap();
        assert_eq!(r.trials + r.skipped, 5000);
        assert!(r.max_lhs_minus_rhs <= 1e-9, "{r:?}");
    }

    #[test]
    fn interval_lemma_equality_case() {
        let g = std_normal();
        let m = interval_lemma_margin(&g, 0.0, &[0.0]).unwrap().unwrap();
        assert!(m.abs() < 1e-15);
        let r = check_interval_lemma(&g, 0.0, 6, 20_000, 3).unwrap();
        assert!(r.max_lhs_minus_rhs <= 1e-9, "{r:?}");
        assert!(r.max_lhs_minus_rhs > -1e-12, "equality pattern included");
    }

    #[test]
    fn interval_lemma_input_checks() {
        let g = std_normal();
        assert!(check_interval_lemma(&g, 0.0, 9, 10, 0).is_err());
        assert!(check_interval_lemma(&g, 0.0, 3, 0, 0).is_err());
        let p3 = LocationFamily::generalized_normal(3.0, 1.0).unwrap();
        assert!(check_interval_lemma(&p3, 0.0, 3, 10, 0).is_err());
    }

    #[test]
    fn interval_lemma_is_deterministic() {
        let lap = LocationFamily::laplace(1.0).unwrap();
        let a = check_interval_lemma(&lap, 0.5, 5, 5000, 9).unwrap();
        let b = check_interval_lemma(&lap, 0.5, 5, 5000, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn eta_monotonicity_examples() {
        let g = std_normal();
        assert!(!check_eta_monotone(&g, 6.0, 2001).unwrap().violated(1e-10));
        let p15 = LocationFamily::generalized_normal(1.5, 1.0).unwrap();
        assert!(!check_eta_monotone(&p15, 6.0, 401).unwrap().violated(1e-10));
        let p3 = LocationFamily::generalized_normal(3.0, 1.0).unwrap();
        let r = check_eta_monotone(&p3, 6.0, 401).unwrap();
        assert!(r.violated(1e-10), "{r:?}");
        assert!(check_eta_monotone(&g, 6.0, 2).is_err());
    }

    #[test]
    fn equality_point_examples() {
        let g = std_normal();
        let grid: Vec<f64> = (0..=400).map(|i| -2.0 + 0.01 * f64::from(i)).collect();
        let point = ThresholdDensity::point_mass(0.0).unwrap();
        let e = kappa_equality_points(&g, &point, &grid).unwrap();
        assert_eq!(e.clusters, 1);
        let pair = ThresholdDensity::uniform(vec![-1.0, 1.0]).unwrap();
        assert_eq!(kappa_equality_points(&g, &pair, &grid).unwrap().points, 0);
        let spread: Vec<f64> = (0..51).map(|i| -2.0 + 0.08 * f64::from(i)).collect();
        let flat = ThresholdDensity::uniform(spread).unwrap();
        assert_eq!(kappa_equality_points(&g, &flat, &grid).unwrap().points, 0);
    }
}
