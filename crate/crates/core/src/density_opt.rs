//! Threshold-density design over discretized parameter and threshold grids.
//!
//! Both problems share the payoff matrix `M[i][j] = eta(t_j - theta_i)`.
//! The minimax design is the value of the zero-sum game in which the
//! designer mixes over thresholds and nature mixes over parameters; the Bayes
//! design minimizes `sum_i pi_i / (M lambda)_i` over the simplex.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::LocationFamily;
use crate::encoding::ThresholdDensity;
use crate::error::{Error, Result};

/// Grid size used by [`DesignProblem::uniform_grid`] callers that have no preference.
pub const DEFAULT_GRID_POINTS: usize = 201;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignProblem {
    family: LocationFamily,
    theta_grid: Vec<f64>,
    t_grid: Vec<f64>,
    prior_weights: Option<Vec<f64>>,
}

fn check_grid(name: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument(format!("{name} is empty")));
    }
    if grid.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument(format!("{name} must be finite")));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(format!("{name} must be strictly increasing")));
    }
    Ok(())
}

/// `points` equally spaced values covering `[-half_width, half_width]`.
pub fn symmetric_grid(half_width: f64, points: usize) -> Result<Vec<f64>> {
    if !(half_width.is_finite() && half_width >= 0.0) {
        return Err(Error::InvalidArgument(format!("half-width must be non-negative, got {half_width}")));
    }
    match points {
        0 => Err(Error::InvalidArgument("grid needs at least one point".into())),
        1 => Ok(vec![0.0]),
        _ if half_width == 0.0 => Err(Error::InvalidArgument(
            "a zero-width grid can only have one point".into(),
        )),
        _ => {
            let step = 2.0 * half_width / (points - 1) as f64;
            let mut grid: Vec<f64> = (0..points).map(|i| -half_width + step * i as f64).collect();
            // Pin the midpoint and endpoints against rounding.
            grid[points - 1] = half_width;
            if points % 2 == 1 {
                grid[points / 2] = 0.0;
            }
            Ok(grid)
        }
    }
}

impl DesignProblem {
    pub fn new(family: LocationFamily, theta_grid: Vec<f64>, t_grid: Vec<f64>) -> Result<Self> {
        if family.is_uniform() {
            return Err(Error::UnsupportedFamily {
                operation: "threshold density design",
                family: family.to_string(),
            });
        }
        check_grid("theta grid", &theta_grid)?;
        check_grid("threshold grid", &t_grid)?;
        Ok(Self {
            family,
            theta_grid,
            t_grid,
            prior_weights: None,
        })
    }

    /// Identical `points`-point grids for `theta` and `t` over `[-T, T]`.
    pub fn uniform_grid(family: LocationFamily, half_width: f64, points: usize) -> Result<Self> {
        let grid = symmetric_grid(half_width, points)?;
        Self::new(family, grid.clone(), grid)
    }

    pub fn with_prior(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.theta_grid.len() {
            return Err(Error::InvalidArgument(format!(
                "prior has {} weights for {} grid points",
                weights.len(),
                self.theta_grid.len()
            )));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidArgument("prior weights must be non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("prior weights sum to {total}, not 1")));
        }
        self.prior_weights = Some(weights);
        Ok(self)
    }

    /// Equal prior mass on every `theta` grid point.
    pub fn with_uniform_prior(self) -> Result<Self> {
        let m = self.theta_grid.len();
        let mut w = vec![1.0 / m as f64; m];
        w[0] += 1.0 - w.iter().sum::<f64>();
        self.with_prior(w)
    }

    pub fn family(&self) -> &LocationFamily {
        &self.family
    }

    pub fn theta_grid(&self) -> &[f64] {
        &self.theta_grid
    }

    pub fn t_grid(&self) -> &[f64] {
        &self.t_grid
    }

    pub fn prior_weights(&self) -> Option<&[f64]> {
        self.prior_weights.as_deref()
    }

    fn payoff(&self) -> Result<Payoff> {
        Payoff::new(&self.family, &self.theta_grid, &self.t_grid)
    }

    /// `(theta_i, kappa(theta_i))` for a density on this problem's threshold grid.
    pub fn kappa_curve(&self, weights: &[f64]) -> Result<Vec<(f64, f64)>> {
        if weights.len() != self.t_grid.len() {
            return Err(Error::InvalidArgument("weights do not match the threshold grid".into()));
        }
        let values = self.payoff()?.mul(weights);
        Ok(self.theta_grid.iter().copied().zip(values).collect())
    }

    /// Worst-case precision `min_i (M lambda)_i`.
    pub fn minimax_objective(&self, weights: &[f64]) -> Result<f64> {
        Ok(self
            .kappa_curve(weights)?
            .into_iter()
            .map(|(_, k)| k)
            .fold(f64::INFINITY, f64::min))
    }

    /// Asymptotic Bayes risk `sum_i pi_i / (M lambda)_i`.
    pub fn bayes_objective(&self, weights: &[f64]) -> Result<f64> {
        let prior = self.require_prior()?;
        let kappa = self.kappa_curve(weights)?;
        Ok(bayes_risk(prior, kappa.iter().map(|(_, k)| *k)))
    }

    fn require_prior(&self) -> Result<&[f64]> {
        self.prior_weights
            .as_deref()
            .ok_or_else(|| Error::InvalidArgument("Bayes design needs prior weights".into()))
    }
}

fn bayes_risk(prior: &[f64], kappa: impl Iterator<Item = f64>) -> f64 {
    prior
        .iter()
        .zip(kappa)
        .filter(|(p, _)| **p > 0.0)
        .map(|(p, k)| p / k)
        .sum()
}

/// Dense row-major `eta(t_j - theta_i)`.
struct Payoff {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Payoff {
    fn new(family: &LocationFamily, theta_grid: &[f64], t_grid: &[f64]) -> Result<Self> {
        let data: Vec<f64> = theta_grid
            .par_iter()
            .map(|&theta| t_grid.iter().map(|&t| family.eta(t - theta)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?
            .concat();
        Ok(Self {
            rows: theta_grid.len(),
            cols: t_grid.len(),
            data,
        })
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// `M y`.
    fn mul(&self, y: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(y).map(|(m, w)| m * w).sum())
            .collect()
    }

    /// `M^T x`.
    fn tmul(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (o, m) in out.iter_mut().zip(self.row(i)) {
                *o += xi * m;
            }
        }
        out
    }

    fn max_entry(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSolution {
    pub density: ThresholdDensity,
    /// `kappa*` for minimax designs, the asymptotic Bayes risk for Bayes designs.
    pub objective: f64,
    /// Duality gap (minimax) or Frank-Wolfe gap (Bayes) at `density`.
    pub certificate: f64,
    pub iterations: usize,
}

impl DesignSolution {
    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        self.density.write_csv(path)
    }
}

/// Two-column CSV `theta,kappa` of the precision curve of a solution.
pub fn kappa_curve_csv(problem: &DesignProblem, density: &ThresholdDensity) -> Result<String> {
    if density.grid() != problem.t_grid() {
        return Err(Error::InvalidArgument("density is not on the problem's threshold grid".into()));
    }
    let mut out = String::from("theta,kappa\n");
    for (theta, k) in problem.kappa_curve(density.weights())? {
        writeln!(out, "{theta},{k}").expect("writing to a String cannot fail");
    }
    Ok(out)
}

/// In-place softmax of log-weights into `probs`.
fn softmax_into(logits: &[f64], probs: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (p, l) in probs.iter_mut().zip(logits) {
        *p = (l - max).exp();
        total += *p;
    }
    for p in probs.iter_mut() {
        *p /= total;
    }
}

const MINIMAX_MAX_ITER: usize = 200_000;
const CHECK_EVERY: usize = 25;

/// Best strategies seen so far and the bounds they certify.
struct GameBounds {
    lower: f64,
    y: Vec<f64>,
    upper: f64,
}

impl GameBounds {
    fn offer(&mut self, m: &Payoff, x: &[f64], y: &[f64]) {
        let lower = m.mul(y).into_iter().fold(f64::INFINITY, f64::min);
        if lower > self.lower {
            self.lower = lower;
            self.y.copy_from_slice(y);
        }
        let upper = m.tmul(x).into_iter().fold(f64::NEG_INFINITY, f64::max);
        self.upper = self.upper.min(upper);
    }

    fn gap(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Entropic mirror-prox self-play at a fixed step size.
fn mirror_prox(m: &Payoff, step: f64, tol: f64, max_iter: usize) -> (GameBounds, usize) {
    let (r, c) = (m.rows, m.cols);
    let mut lx = vec![0.0; r];
    let mut ly = vec![0.0; c];
    let mut x = vec![1.0 / r as f64; r];
    let mut y = vec![1.0 / c as f64; c];
    let (mut xh, mut yh) = (x.clone(), y.clone());
    let (mut lxh, mut lyh) = (lx.clone(), ly.clone());
    let (mut xsum, mut ysum) = (vec![0.0; r], vec![0.0; c]);
    let mut bounds = GameBounds {
        lower: f64::NEG_INFINITY,
        y: y.clone(),
        upper: f64::INFINITY,
    };
    bounds.offer(m, &x, &y);
    let mut iter = 0;
    while iter < max_iter && bounds.gap() > tol {
        iter += 1;
        // Extrapolation from the current point.
        let my = m.mul(&y);
        let mtx = m.tmul(&x);
        for i in 0..r {
            lxh[i] = lx[i] - step * my[i];
        }
        for j in 0..c {
            lyh[j] = ly[j] + step * mtx[j];
        }
        softmax_into(&lxh, &mut xh);
        softmax_into(&lyh, &mut yh);
        // Update with gradients taken at the extrapolated point.
        let my = m.mul(&yh);
        let mtx = m.tmul(&xh);
        for i in 0..r {
            lx[i] -= step * my[i];
        }
        for j in 0..c {
            ly[j] += step * mtx[j];
        }
        // Re-centre the logits so they stay bounded.
        let cx = lx.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let cy = ly.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        lx.iter_mut().for_each(|v| *v -= cx);
        ly.iter_mut().for_each(|v| *v -= cy);
        softmax_into(&lx, &mut x);
        softmax_into(&ly, &mut y);
        for i in 0..r {
            xsum[i] += xh[i];
        }
        for j in 0..c {
            ysum[j] += yh[j];
        }
        if iter % CHECK_EVERY == 0 {
            let n = iter as f64;
            let xbar: Vec<f64> = xsum.iter().map(|v| v / n).collect();
            let ybar: Vec<f64> = ysum.iter().map(|v| v / n).collect();
            bounds.offer(m, &xbar, &ybar);
            bounds.offer(m, &x, &y);
        }
    }
    (bounds, iter)
}

/// Maximizes `min_i sum_j lambda_j eta(t_j - theta_i)` over the simplex.
///
/// The certificate is `max_j (M^T x)_j - min_i (M lambda)_i` for the best
/// parameter mixture `x` found, so `objective <= kappa* <= objective + certificate`.
pub fn solve_minimax_density(problem: &DesignProblem, tol: f64) -> Result<DesignSolution> {
    solve_minimax_density_capped(problem, tol, MINIMAX_MAX_ITER)
}

/// [`solve_minimax_density`] with an explicit per-pass iteration cap.
pub fn solve_minimax_density_capped(
    problem: &DesignProblem,
    tol: f64,
    max_iter: usize,
) -> Result<DesignSolution> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let m = problem.payoff()?;
    let scale = m.max_entry();
    if scale <= 0.0 {
        return Err(Error::Infeasible("every threshold carries zero information".into()));
    }
    // Aggressive steps usually converge an order of magnitude faster; the
    // conservative step is the textbook fallback.
    let mut best: Option<(GameBounds, usize)> = None;
    let mut total_iter = 0;
    for step in [10.0 / scale, 1.0 / scale] {
        let (bounds, iter) = mirror_prox(&m, step, tol, max_iter);
        total_iter += iter;
        let better = best.as_ref().is_none_or(|(b, _)| bounds.gap() < b.gap());
        if better {
            best = Some((bounds, total_iter));
        }
        if best.as_ref().is_some_and(|(b, _)| b.gap() <= tol) {
            break;
        }
    }
    let (bounds, _) = best.expect("at least one solver pass ran");
    let solution = DesignSolution {
        density: ThresholdDensity::normalized(problem.t_grid.clone(), bounds.y.clone())?,
        objective: bounds.lower,
        certificate: bounds.gap().max(0.0),
        iterations: total_iter,
    };
    if solution.certificate > tol {
        return Err(Error::NonConvergence {
            tol,
            certificate: solution.certificate,
            best: Box::new(solution),
        });
    }
    Ok(solution)
}

const BAYES_MAX_ITER: usize = 200_000;
const ARMIJO_C: f64 = 1e-4;

struct BayesState {
    risk: f64,
    grad: Vec<f64>,
}

impl BayesState {
    fn at(m: &Payoff, prior: &[f64], lambda: &[f64]) -> Self {
        let kappa = m.mul(lambda);
        let risk = bayes_risk(prior, kappa.iter().copied());
        // d/d lambda_j of sum_i pi_i / kappa_i.
        let coef: Vec<f64> = prior
            .iter()
            .zip(&kappa)
            .map(|(p, k)| if *p > 0.0 { -p / (k * k) } else { 0.0 })
            .collect();
        let grad = m.tmul(&coef);
        Self { risk, grad }
    }

    /// `grad . lambda - min_j grad_j`, the Frank-Wolfe gap.
    fn fw_gap(&self, lambda: &[f64]) -> f64 {
        let inner: f64 = self.grad.iter().zip(lambda).map(|(g, l)| g * l).sum();
        let min = self.grad.iter().copied().fold(f64::INFINITY, f64::min);
        inner - min
    }
}

/// Minimizes the asymptotic Bayes risk `sum_i pi_i / kappa(theta_i)` by
/// entropic mirror descent with Armijo backtracking.
pub fn solve_bayes_density(problem: &DesignProblem, tol: f64) -> Result<DesignSolution> {
    solve_bayes_density_capped(problem, tol, BAYES_MAX_ITER)
}

/// [`solve_bayes_density`] with an explicit iteration cap.
pub fn solve_bayes_density_capped(
    problem: &DesignProblem,
    tol: f64,
    max_iter: usize,
) -> Result<DesignSolution> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let prior = problem.require_prior()?;
    let m = problem.payoff()?;
    for (i, (&p, &theta)) in prior.iter().zip(&problem.theta_grid).enumerate() {
        if p > 0.0 && m.row(i).iter().sum::<f64>() <= 0.0 {
            return Err(Error::Infeasible(format!(
                "no threshold carries information about theta = {theta}"
            )));
        }
    }
    let c = m.cols;
    let mut lambda = vec![1.0 / c as f64; c];
    let mut logits = vec![0.0; c];
    let mut state = BayesState::at(&m, prior, &lambda);
    let mut step = 1.0 / state.grad.iter().fold(0.0f64, |a, g| a.max(g.abs()));
    let mut trial = vec![0.0; c];
    let mut trial_logits = vec![0.0; c];
    let mut iter = 0;
    let mut gap = state.fw_gap(&lambda);
    while gap > tol && iter < max_iter {
        iter += 1;
        step *= 2.0;
        loop {
            for j in 0..c {
                trial_logits[j] = logits[j] - step * state.grad[j];
            }
            softmax_into(&trial_logits, &mut trial);
            let next = BayesState::at(&m, prior, &trial);
            let decrease: f64 = state.grad.iter().zip(trial.iter().zip(&lambda)).map(|(g, (t, l))| g * (t - l)).sum();
            if next.risk.is_finite() && next.risk <= state.risk + ARMIJO_C * decrease {
                let max = trial_logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                logits.iter_mut().zip(&trial_logits).for_each(|(l, t)| *l = t - max);
                lambda.copy_from_slice(&trial);
                state = next;
                break;
            }
            step *= 0.5;
            if step < 1e-300 {
                break;
            }
        }
        gap = state.fw_gap(&lambda);
        if step < 1e-300 {
            break;
        }
    }
    let solution = DesignSolution {
        density: ThresholdDensity::normalized(problem.t_grid.clone(), lambda)?,
        objective: state.risk,
        certificate: gap.max(0.0),
        iterations: iter,
    };
    if solution.certificate > tol {
        return Err(Error::NonConvergence {
            tol,
            certificate: solution.certificate,
            best: Box::new(solution),
        });
    }
    Ok(solution)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::kappa_uniform;
    use std::f64::consts::PI;

    fn gaussian(sigma: f64) -> LocationFamily {
        LocationFamily::gaussian(sigma).unwrap()
    }

    #[test]
    fn grid_construction() {
        let g = symmetric_grid(1.0, 201).unwrap();
        assert_eq!(g.len(), 201);
        assert_eq!((g[0], g[100], g[200]), (-1.0, 0.0, 1.0));
        assert_eq!(symmetric_grid(3.0, 1).unwrap(), vec![0.0]);
        assert!(symmetric_grid(0.0, 5).is_err());
        assert!(DesignProblem::new(gaussian(1.0), vec![0.0, 0.0], vec![0.0]).is_err());
        assert!(DesignProblem::new(LocationFamily::uniform(1.0).unwrap(), vec![0.0], vec![0.0]).is_err());
    }

    #[test]
    fn single_row_game_is_point_mass() {
        let p = DesignProblem::new(gaussian(1.0), vec![0.0], vec![0.0]).unwrap();
        let s = solve_minimax_density(&p, 1e-9).unwrap();
        assert_eq!(s.density.weights(), &[1.0]);
        assert!((s.objective - 2.0 / PI).abs() < 1e-12);
    }

    #[test]
    fn minimax_beats_uniform_thresholds() {
        let g = gaussian(1.0);
        let t = 10.0;
        let p = DesignProblem::uniform_grid(g, t, DEFAULT_GRID_POINTS).unwrap();
        let s = solve_minimax_density(&p, 1e-4).unwrap();
        assert!(s.certificate <= 1e-4);
        let ku = kappa_uniform(&g, t).unwrap();
        assert!(s.objective > ku + 1e-3, "{} vs {ku}", s.objective);
        // The saddle brackets: objective is the attained minimum of kappa.
        let attained = p.minimax_objective(s.density.weights()).unwrap();
        assert!((attained - s.objective).abs() < 1e-12);
        let mirrored = p.minimax_objective(s.density.mirrored().weights()).unwrap();
        assert!((mirrored - s.objective).abs() <= 1e-4);
    }

    #[test]
    fn nonconvergence_carries_best_iterate() {
        let p = DesignProblem::uniform_grid(gaussian(1.0), 10.0, 101).unwrap();
        match solve_minimax_density_capped(&p, 1e-14, 500) {
            Err(Error::NonConvergence { certificate, best, .. }) => {
                assert!(certificate > 1e-14);
                assert_eq!(best.density.len(), 101);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn bayes_point_prior_recovers_point_mass() {
        let g = gaussian(1.0);
        let grid = symmetric_grid(1.0, 21).unwrap();
        let mut prior = vec![0.0; 21];
        prior[10] = 1.0;
        let p = DesignProblem::new(g, grid.clone(), grid).unwrap().with_prior(prior).unwrap();
        let s = solve_bayes_density(&p, 1e-10).unwrap();
        assert!((s.objective - PI / 2.0).abs() < 1e-6, "{}", s.objective);
        assert!(s.density.weights()[10] > 0.99);
    }

    #[test]
    fn bayes_uniform_prior_improves_on_uniform_lambda() {
        let g = gaussian(1.0);
        let t = 3f64.sqrt();
        let p = DesignProblem::uniform_grid(g, t, 101).unwrap().with_uniform_prior().unwrap();
        let s = solve_bayes_density(&p, 1e-8).unwrap();
        let flat = vec![1.0 / 101.0; 101];
        assert!(s.objective <= p.bayes_objective(&flat).unwrap());
        assert!((p.bayes_objective(s.density.weights()).unwrap() - s.objective).abs() < 1e-12);
    }

    #[test]
    fn bayes_requires_prior_and_information() {
        let g = gaussian(1.0);
        let p = DesignProblem::uniform_grid(g, 1.0, 11).unwrap();
        assert!(solve_bayes_density(&p, 1e-6).is_err());
        // Thresholds 100 sigma away carry no representable information.
        let far = DesignProblem::new(g, vec![0.0], vec![100.0]).unwrap().with_prior(vec![1.0]).unwrap();
        assert!(matches!(solve_bayes_density(&far, 1e-6), Err(Error::Infeasible(_))));
    }

    #[test]
    fn kappa_curve_csv_shape() {
        let p = DesignProblem::uniform_grid(gaussian(1.0), 1.0, 5).unwrap();
        let d = ThresholdDensity::uniform(p.t_grid().to_vec()).unwrap();
        let csv = kappa_curve_csv(&p, &d).unwrap();
        assert!(csv.starts_with("theta,kappa\n"));
        assert_eq!(csv.lines().count(), 6);
        let other = ThresholdDensity::point_mass(0.5).unwrap();
        assert!(kappa_curve_csv(&p, &other).is_err());
    }
}
