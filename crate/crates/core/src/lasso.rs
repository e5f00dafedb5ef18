//! Weighted-ℓ1 penalized least squares
//! `(1/2n)‖y − Xφ‖² + λ_n Σ_j λ_{n,j}|φ_j|`, solved by cyclic coordinate
//! descent on the sample second moments, with KKT certification and
//! warm-started solution paths.

use nalgebra::DVector;
use serde::Serialize;

use crate::design::{moments, LagDesign, Moments};
use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 100_000;
pub const DEFAULT_GRID_SIZE: usize = 100;
pub const DEFAULT_LAMBDA_MIN_RATIO: f64 = 1e-3;

/// Grand tuning parameter `λ_n` and per-lag weights `λ_{n,j}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PenaltyConfig {
    lambda_n: f64,
    weights: Vec<f64>,
}

impl PenaltyConfig {
    pub fn new(lambda_n: f64, weights: Vec<f64>) -> Result<Self> {
        if !(lambda_n.is_finite() && lambda_n >= 0.0) {
            return Err(Error::invalid(format!(
                "lambda_n must be finite and nonnegative, got {lambda_n}"
            )));
        }
        validate_weights(&weights)?;
        Ok(Self { lambda_n, weights })
    }

    /// Equal weights of one on all `p` lags.
    pub fn unit(lambda_n: f64, p: usize) -> Result<Self> {
        Self::new(lambda_n, vec![1.0; p])
    }

    pub fn lambda_n(&self) -> f64 {
        self.lambda_n
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn p(&self) -> usize {
        self.weights.len()
    }

    pub fn with_lambda(&self, lambda_n: f64) -> Result<Self> {
        Self::new(lambda_n, self.weights.clone())
    }

    /// Effective per-coordinate thresholds `λ_n λ_{n,j}`.
    pub fn thresholds(&self) -> Vec<f64> {
        self.weights.iter().map(|w| self.lambda_n * w).collect()
    }
}

fn validate_weights(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::invalid("weight vector is empty"));
    }
    if let Some((j, w)) = weights
        .iter()
        .enumerate()
        .find(|(_, w)| !(w.is_finite() && **w >= 0.0))
    {
        return Err(Error::invalid(format!(
            "weight for lag {} must be finite and nonnegative, got {w}",
            j + 1
        )));
    }
    Ok(())
}

/// Geometric weight ladder increasing from `first` at lag 1 to `last` at lag `p`,
/// for users who want heavier penalties on distant lags.
pub fn monotone_weights(p: usize, first: f64, last: f64) -> Result<Vec<f64>> {
    if p == 0 || !(first > 0.0 && last >= first && last.is_finite()) {
        return Err(Error::invalid("need p >= 1 and 0 < first <= last"));
    }
    if p == 1 {
        return Ok(vec![first]);
    }
    let ratio = (last / first).powf(1.0 / (p - 1) as f64);
    Ok((0..p).map(|j| first * ratio.powi(j as i32)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

impl SolverOptions {
    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::invalid("solver tolerance must be positive"));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LassoFit {
    pub coefficients: Vec<f64>,
    /// Lags (1-based) with a nonzero coefficient.
    pub support: Vec<usize>,
    pub signs: Vec<i8>,
    pub objective: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub lambda_n: f64,
}

impl LassoFit {
    fn from_coefficients(
        coefficients: Vec<f64>,
        design: &LagDesign,
        penalty: &PenaltyConfig,
        kkt_residual: f64,
        iterations: usize,
    ) -> Result<Self> {
        let objective = objective(&coefficients, design, penalty)?;
        Ok(Self {
            support: support_of(&coefficients),
            signs: coefficients.iter().map(|c| sign(*c)).collect(),
            objective,
            kkt_residual,
            iterations,
            lambda_n: penalty.lambda_n(),
            coefficients,
        })
    }
}

pub fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

pub fn support_of(coefficients: &[f64]) -> Vec<usize> {
    coefficients
        .iter()
        .enumerate()
        .filter(|(_, c)| **c != 0.0)
        .map(|(j, _)| j + 1)
        .collect()
}

fn check_dims(phi_len: usize, design: &LagDesign, penalty: &PenaltyConfig) -> Result<()> {
    if phi_len != design.p() || penalty.p() != design.p() {
        return Err(Error::invalid(format!(
            "dimension mismatch: coefficients {phi_len}, weights {}, design columns {}",
            penalty.p(),
            design.p()
        )));
    }
    Ok(())
}

/// `(1/2n)‖y − Xφ‖² + λ_n Σ_j λ_{n,j}|φ_j|`, evaluated from the design itself.
pub fn objective(phi: &[f64], design: &LagDesign, penalty: &PenaltyConfig) -> Result<f64> {
    check_dims(phi.len(), design, penalty)?;
    let residual = design.y() - design.x() * DVector::from_column_slice(phi);
    let fit = residual.norm_squared() / (2.0 * design.n() as f64);
    let pen: f64 = penalty
        .weights()
        .iter()
        .zip(phi)
        .map(|(w, c)| w * c.abs())
        .sum();
    Ok(fit + penalty.lambda_n() * pen)
}

pub fn soft_threshold(z: f64, t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Largest violation of the subgradient optimality conditions, given the
/// smooth-part gradient `(1/n)(X'Xφ − X'y)`.
pub fn kkt_residual_from_gradient(gradient: &[f64], phi: &[f64], thresholds: &[f64]) -> f64 {
    gradient
        .iter()
        .zip(phi)
        .zip(thresholds)
        .map(|((g, c), t)| {
            if *c != 0.0 {
                (g + t * c.signum()).abs()
            } else {
                (g.abs() - t).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// Standalone KKT check working from the raw design rather than from the
/// solver's cached moments.
pub fn verify_kkt(design: &LagDesign, penalty: &PenaltyConfig, phi: &[f64]) -> Result<f64> {
    check_dims(phi.len(), design, penalty)?;
    let residual = design.y() - design.x() * DVector::from_column_slice(phi);
    let gradient = -(design.x().tr_mul(&residual)) / design.n() as f64;
    Ok(kkt_residual_from_gradient(
        gradient.as_slice(),
        phi,
        &penalty.thresholds(),
    ))
}

fn gradient(m: &Moments, phi: &[f64]) -> Vec<f64> {
    let p = phi.len();
    (0..p)
        .map(|j| {
            let col = m.gram.column(j);
            let gp: f64 = (0..p).filter(|&k| phi[k] != 0.0).map(|k| col[k] * phi[k]).sum();
            gp - m.xty[j]
        })
        .collect()
}

/// Outcome of a coordinate descent run on precomputed moments.
#[derive(Debug, Clone)]
pub struct CdSolution {
    pub coefficients: Vec<f64>,
    pub kkt_residual: f64,
    pub iterations: usize,
}

/// Cyclic coordinate descent on `½φ'Gφ − c'φ + Σ t_j|φ_j|` where `G = X'X/m`
/// and `c = X'y/m`. Converged once a full sweep moves no coefficient by
/// more than `tol` and the KKT residual is below `tol`.
pub fn coordinate_descent(
    m: &Moments,
    thresholds: &[f64],
    init: Option<&[f64]>,
    opts: SolverOptions,
) -> Result<CdSolution> {
    opts.validate()?;
    let p = thresholds.len();
    if m.gram.nrows() != p {
        return Err(Error::invalid(format!(
            "{} thresholds for a {}-column design",
            p,
            m.gram.nrows()
        )));
    }
    let mut phi = match init {
        Some(v) if v.len() == p => v.to_vec(),
        Some(v) => {
            return Err(Error::invalid(format!(
                "warm start has length {}, expected {p}",
                v.len()
            )))
        }
        None => vec![0.0; p],
    };
    let mut grad = gradient(m, &phi);
    let mut kkt = f64::INFINITY;
    for sweep in 1..=opts.max_iter {
        let mut max_change: f64 = 0.0;
        for j in 0..p {
            let gjj = m.gram[(j, j)];
            let new = if gjj > 0.0 {
                soft_threshold(gjj * phi[j] - grad[j], thresholds[j]) / gjj
            } else {
                0.0
            };
            let delta = new - phi[j];
            if delta != 0.0 {
                phi[j] = new;
                let col = m.gram.column(j);
                for (g, c) in grad.iter_mut().zip(col.iter()) {
                    *g += delta * c;
                }
                max_change = max_change.max(delta.abs());
            }
        }
        if max_change < opts.tol {
            grad = gradient(m, &phi);
            kkt = kkt_residual_from_gradient(&grad, &phi, thresholds);
            if kkt < opts.tol {
                return Ok(CdSolution {
                    coefficients: phi,
                    kkt_residual: kkt,
                    iterations: sweep,
                });
            }
        }
    }
    if !kkt.is_finite() {
        grad = gradient(m, &phi);
        kkt = kkt_residual_from_gradient(&grad, &phi, thresholds);
    }
    Err(Error::NonConvergence {
        best: phi,
        kkt_residual: kkt,
        iterations: opts.max_iter,
    })
}

/// Minimize the penalized objective starting from zero.
pub fn fit(design: &LagDesign, penalty: &PenaltyConfig, opts: SolverOptions) -> Result<LassoFit> {
    fit_from(design, penalty, None, opts)
}

/// As [`fit`], with an optional warm start.
pub fn fit_from(
    design: &LagDesign,
    penalty: &PenaltyConfig,
    init: Option<&[f64]>,
    opts: SolverOptions,
) -> Result<LassoFit> {
    check_dims(design.p(), design, penalty)?;
    let m = moments(design, None);
    let sol = coordinate_descent(&m, &penalty.thresholds(), init, opts)?;
    LassoFit::from_coefficients(sol.coefficients, design, penalty, sol.kkt_residual, sol.iterations)
}

fn lambda_max_moments(xty: &DVector<f64>, weights: &[f64]) -> Result<f64> {
    validate_weights(weights)?;
    if weights.len() != xty.len() {
        return Err(Error::invalid(format!(
            "{} weights for {} lags",
            weights.len(),
            xty.len()
        )));
    }
    let mut best: f64 = 0.0;
    for (j, (c, w)) in xty.iter().zip(weights).enumerate() {
        if *w > 0.0 {
            best = best.max(c.abs() / w);
        } else if *c != 0.0 {
            return Err(Error::UnboundedPath { lag: j + 1 });
        }
    }
    Ok(best)
}

/// Smallest `λ_n` at which the zero vector solves the problem:
/// `max_j |(1/n)X_j'y| / λ_{n,j}`.
pub fn lambda_max(design: &LagDesign, weights: &[f64]) -> Result<f64> {
    let m = moments(design, None);
    lambda_max_moments(&m.xty, weights)
}

/// Geometric grid from `lambda_max` down to `ratio · lambda_max`.
pub fn geometric_grid(lambda_max: f64, grid_size: usize, ratio: f64) -> Result<Vec<f64>> {
    if grid_size < 2 {
        return Err(Error::invalid("grid_size must be at least 2"));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::invalid(format!(
            "lambda_min_ratio must lie in (0, 1), got {ratio}"
        )));
    }
    if !(lambda_max > 0.0 && lambda_max.is_finite()) {
        return Err(Error::invalid(
            "lambda_max is zero: the response is uncorrelated with every lag",
        ));
    }
    let step = ratio.ln() / (grid_size - 1) as f64;
    Ok((0..grid_size)
        .map(|k| lambda_max * (step * k as f64).exp())
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathKnot {
    pub lambda_n: f64,
    pub coefficients: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathEvent {
    /// 1-based lag.
    pub lag: usize,
    pub lambda_n: f64,
    pub knot: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolutionPath {
    pub knots: Vec<PathKnot>,
    /// First activation of each lag, in order of occurrence; lags activating
    /// at the same knot are listed by increasing lag.
    pub entry_events: Vec<PathEvent>,
    pub exit_events: Vec<PathEvent>,
}

impl SolutionPath {
    pub fn p(&self) -> usize {
        self.knots.first().map_or(0, |k| k.coefficients.len())
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.knots.iter().map(|k| k.lambda_n).collect()
    }

    /// Entry rank (1 = first entrant) per lag, `None` for lags that never enter.
    pub fn entry_ranks(&self) -> Vec<Option<usize>> {
        let mut ranks = vec![None; self.p()];
        for (i, e) in self.entry_events.iter().enumerate() {
            ranks[e.lag - 1] = Some(i + 1);
        }
        ranks
    }

    /// The first `k` lags to enter the path.
    pub fn first_entrants(&self, k: usize) -> Vec<usize> {
        self.entry_events.iter().take(k).map(|e| e.lag).collect()
    }
}

/// Warm-started fits over a decreasing grid of `λ_n` on fixed moments.
/// Returns the coefficient vector at every grid point.
pub fn path_on_moments(
    m: &Moments,
    weights: &[f64],
    grid: &[f64],
    opts: SolverOptions,
) -> Result<Vec<Vec<f64>>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(grid.len());
    for (i, &lam) in grid.iter().enumerate() {
        let thresholds: Vec<f64> = weights.iter().map(|w| lam * w).collect();
        let init = out.last().map(|v| v.as_slice());
        let sol = coordinate_descent(m, &thresholds, init, opts).map_err(|e| {
            Error::PathNonConvergence {
                grid_index: i,
                source: Box::new(e),
            }
        })?;
        out.push(sol.coefficients);
    }
    Ok(out)
}

/// Solution path on a geometric grid from `lambda_max` down to
/// `lambda_min_ratio · lambda_max`, with entry and exit bookkeeping.
pub fn solution_path(
    design: &LagDesign,
    weights: &[f64],
    grid_size: usize,
    lambda_min_ratio: f64,
    opts: SolverOptions,
) -> Result<SolutionPath> {
    let m = moments(design, None);
    let lmax = lambda_max_moments(&m.xty, weights)?;
    let grid = geometric_grid(lmax, grid_size, lambda_min_ratio)?;
    solution_path_on_grid(&m, weights, &grid, opts)
}

/// Solution path over a caller-supplied strictly decreasing grid.
pub fn solution_path_on_grid(
    m: &Moments,
    weights: &[f64],
    grid: &[f64],
    opts: SolverOptions,
) -> Result<SolutionPath> {
    if grid.is_empty() {
        return Err(Error::invalid("empty penalty grid"));
    }
    if grid.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::invalid("penalty grid must be strictly decreasing"));
    }
    let lmax = lambda_max_moments(&m.xty, weights)?;
    let p = weights.len();
    let mut coefs = Vec::with_capacity(grid.len());
    let mut prev: Option<Vec<f64>> = None;
    for (i, &lam) in grid.iter().enumerate() {
        let c = if lam >= lmax {
            // the null solution is exact here; skip the solve so rounding in
            // λ·w cannot leave a spurious coefficient at the top of the path
            vec![0.0; p]
        } else {
            let thresholds: Vec<f64> = weights.iter().map(|w| lam * w).collect();
            coordinate_descent(m, &thresholds, prev.as_deref(), opts)
                .map_err(|e| Error::PathNonConvergence {
                    grid_index: i,
                    source: Box::new(e),
                })?
                .coefficients
        };
        prev = Some(c.clone());
        coefs.push(c);
    }

    let mut entered = vec![false; p];
    let mut active = vec![false; p];
    let mut entry_events = Vec::new();
    let mut exit_events = Vec::new();
    for (i, c) in coefs.iter().enumerate() {
        for j in 0..p {
            let now = c[j] != 0.0;
            if now && !active[j] && !entered[j] {
                entered[j] = true;
                entry_events.push(PathEvent {
                    lag: j + 1,
                    lambda_n: grid[i],
                    knot: i,
                });
            } else if !now && active[j] {
                exit_events.push(PathEvent {
                    lag: j + 1,
                    lambda_n: grid[i],
                    knot: i,
                });
            }
            active[j] = now;
        }
    }
    let knots = grid
        .iter()
        .zip(coefs)
        .map(|(&lambda_n, coefficients)| PathKnot {
            lambda_n,
            coefficients,
        })
        .collect();
    Ok(SolutionPath {
        knots,
        entry_events,
        exit_events,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn small_design() -> LagDesign {
        LagDesign::from_parts(
            DVector::from_vec(vec![1.0, -0.5, 2.0, 0.3, -1.2]),
            DMatrix::from_row_slice(
                5,
                2,
                &[1.0, 0.2, -0.3, 1.0, 0.8, 0.5, 0.1, -0.7, -1.1, 0.4],
            ),
        )
        .unwrap()
    }

    #[test]
    fn soft_threshold_cases() {
        assert_eq!(soft_threshold(3.0, 1.0), 2.0);
        assert_eq!(soft_threshold(-0.5, 1.0), 0.0);
        assert_eq!(soft_threshold(-3.0, 1.0), -2.0);
        for z in [-2.5, 0.0, 1e-300, 7.0] {
            assert_eq!(soft_threshold(z, 0.0), z);
        }
    }

    #[test]
    fn objective_at_zero() {
        let d = small_design();
        let pen = PenaltyConfig::unit(0.3, 2).unwrap();
        let v = objective(&[0.0, 0.0], &d, &pen).unwrap();
        assert!((v - d.y().norm_squared() / 10.0).abs() < 1e-15);
        assert!(objective(&[0.0], &d, &pen).is_err());
    }

    #[test]
    fn objective_least_squares_residual_only() {
        let d = small_design();
        let x = d.x();
        let ls = (x.tr_mul(x)).lu().solve(&x.tr_mul(d.y())).unwrap();
        let pen = PenaltyConfig::unit(0.0, 2).unwrap();
        let v = objective(ls.as_slice(), &d, &pen).unwrap();
        let r = d.y() - x * &ls;
        assert!((v - r.norm_squared() / 10.0).abs() < 1e-14);
        let f = fit(&d, &pen, SolverOptions::default()).unwrap();
        for (a, b) in f.coefficients.iter().zip(ls.iter()) {
            assert!((a - b).abs() < 1e-7);
        }
    }

    #[test]
    fn penalty_validation() {
        assert!(PenaltyConfig::new(-1.0, vec![1.0]).is_err());
        assert!(PenaltyConfig::new(1.0, vec![1.0, -0.1]).is_err());
        assert!(PenaltyConfig::new(1.0, vec![f64::NAN]).is_err());
        assert!(PenaltyConfig::new(1.0, vec![]).is_err());
    }

    #[test]
    fn null_fit_above_lambda_max() {
        let d = small_design();
        let lmax = lambda_max(&d, &[1.0, 1.0]).unwrap();
        let f = fit(&d, &PenaltyConfig::unit(1.01 * lmax, 2).unwrap(), SolverOptions::default()).unwrap();
        assert!(f.support.is_empty());
        let f = fit(&d, &PenaltyConfig::unit(0.99 * lmax, 2).unwrap(), SolverOptions::default()).unwrap();
        assert!(!f.support.is_empty());
    }

    #[test]
    fn lambda_max_orthogonal_response_is_zero() {
        let d = LagDesign::from_parts(
            DVector::from_vec(vec![1.0, -1.0]),
            DMatrix::from_row_slice(2, 1, &[1.0, 1.0]),
        )
        .unwrap();
        assert_eq!(lambda_max(&d, &[1.0]).unwrap(), 0.0);
    }

    #[test]
    fn zero_weight_with_signal_is_unbounded() {
        let d = small_design();
        assert!(matches!(
            lambda_max(&d, &[1.0, 0.0]),
            Err(Error::UnboundedPath { lag: 2 })
        ));
    }

    #[test]
    fn zero_weight_lag_is_unpenalized() {
        let d = small_design();
        let f = fit(&d, &PenaltyConfig::new(10.0, vec![1.0, 0.0]).unwrap(), SolverOptions::default()).unwrap();
        assert_eq!(f.coefficients[0], 0.0);
        assert!(f.coefficients[1] != 0.0);
        assert!(f.kkt_residual < 1e-8);
    }

    #[test]
    fn non_convergence_carries_iterate() {
        let d = small_design();
        let pen = PenaltyConfig::unit(1e-4, 2).unwrap();
        let err = fit(
            &d,
            &pen,
            SolverOptions {
                tol: 1e-15,
                max_iter: 1,
            },
        )
        .unwrap_err();
        match err {
            Error::NonConvergence { best, iterations, .. } => {
                assert_eq!(best.len(), 2);
                assert_eq!(iterations, 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn path_starts_at_zero_and_records_entries() {
        let d = small_design();
        let path = solution_path(&d, &[1.0, 1.0], 30, 1e-3, SolverOptions::default()).unwrap();
        assert_eq!(path.knots.len(), 30);
        assert!(path.knots[0].coefficients.iter().all(|c| *c == 0.0));
        assert!(path.lambdas().windows(2).all(|w| w[1] < w[0]));
        assert!(!path.entry_events.is_empty());
        let ranks = path.entry_ranks();
        assert_eq!(ranks.iter().filter(|r| r.is_some()).count(), path.entry_events.len());
    }

    #[test]
    fn grid_validation() {
        assert!(geometric_grid(1.0, 1, 0.1).is_err());
        assert!(geometric_grid(1.0, 10, 1.0).is_err());
        assert!(geometric_grid(0.0, 10, 0.1).is_err());
        let g = geometric_grid(2.0, 3, 0.25).unwrap();
        assert!((g[1] - 1.0).abs() < 1e-15 && (g[2] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn monotone_ladder() {
        let w = monotone_weights(4, 1.0, 8.0).unwrap();
        assert!(w.windows(2).all(|p| p[1] > p[0]));
        assert!((w[3] - 8.0).abs() < 1e-12);
    }
}
