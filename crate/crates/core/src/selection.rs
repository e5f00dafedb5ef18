//! Penalty selection by cross-validation, support extraction from a path,
//! and the Yule–Walker/AIC baseline.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::ar_process::{sample_autocovariance, TimeSeries};
use crate::design::{moments, LagDesign};
use crate::error::{Error, Result};
use crate::lasso::{path_on_moments, SolutionPath, SolverOptions};

pub const DEFAULT_FOLDS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FoldScheme {
    /// Rows assigned to folds by a seeded random permutation.
    #[default]
    Random,
    /// Rows split into `folds + 1` contiguous blocks; fold k trains on
    /// blocks `0..=k-1` and is scored on block `k`.
    RollingOrigin,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvResult {
    pub lambda_grid: Vec<f64>,
    pub cv_mean: Vec<f64>,
    pub cv_se: Vec<f64>,
    pub chosen_lambda: f64,
    pub fold_count: usize,
    pub seed: u64,
}

impl CvResult {
    pub fn chosen_index(&self) -> usize {
        self.lambda_grid
            .iter()
            .position(|l| *l == self.chosen_lambda)
            .expect("chosen lambda is drawn from the grid")
    }
}

/// Random K-fold cross-validation with the default solver settings.
pub fn cross_validate(
    design: &LagDesign,
    weights: &[f64],
    grid: &[f64],
    folds: usize,
    seed: u64,
) -> Result<CvResult> {
    cross_validate_with(
        design,
        weights,
        grid,
        folds,
        seed,
        FoldScheme::Random,
        SolverOptions::default(),
    )
}

fn fold_splits(n: usize, folds: usize, seed: u64, scheme: FoldScheme) -> Vec<(Vec<usize>, Vec<usize>)> {
    match scheme {
        FoldScheme::Random => {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut ChaCha20Rng::seed_from_u64(seed));
            let mut assignment = vec![0usize; n];
            for (pos, row) in order.iter().enumerate() {
                assignment[*row] = pos % folds;
            }
            (0..folds)
                .map(|k| {
                    let (test, train): (Vec<usize>, Vec<usize>) =
                        (0..n).partition(|r| assignment[*r] == k);
                    (train, test)
                })
                .collect()
        }
        FoldScheme::RollingOrigin => {
            let blocks = folds + 1;
            let bound = |b: usize| b * n / blocks;
            (1..blocks)
                .map(|k| ((0..bound(k)).collect(), (bound(k)..bound(k + 1)).collect()))
                .collect()
        }
    }
}

/// Held-out mean squared prediction error per grid point, averaged over
/// folds. The chosen penalty minimizes the mean; ties go to the larger λ.
pub fn cross_validate_with(
    design: &LagDesign,
    weights: &[f64],
    grid: &[f64],
    folds: usize,
    seed: u64,
    scheme: FoldScheme,
    opts: SolverOptions,
) -> Result<CvResult> {
    if folds < 2 {
        return Err(Error::invalid("cross-validation needs at least 2 folds"));
    }
    let n = design.n();
    let min_rows = match scheme {
        FoldScheme::Random => folds,
        FoldScheme::RollingOrigin => folds + 1,
    };
    if n < min_rows {
        return Err(Error::invalid(format!(
            "{n} design rows cannot be split into {folds} folds"
        )));
    }
    if weights.len() != design.p() {
        return Err(Error::invalid(format!(
            "{} weights for {} lags",
            weights.len(),
            design.p()
        )));
    }
    if grid.is_empty() || grid.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::invalid("penalty grid must be nonempty and strictly decreasing"));
    }
    if grid.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return Err(Error::invalid("penalty grid values must be finite and nonnegative"));
    }

    let splits = fold_splits(n, folds, seed, scheme);
    let per_fold: Vec<Vec<f64>> = splits
        .par_iter()
        .map(|(train, test)| {
            let m = moments(design, Some(train));
            let coefs = path_on_moments(&m, weights, grid, opts)?;
            Ok(coefs
                .iter()
                .map(|phi| held_out_mse(design, test, phi))
                .collect())
        })
        .collect::<Result<_>>()?;

    let k = per_fold.len() as f64;
    let mut cv_mean = Vec::with_capacity(grid.len());
    let mut cv_se = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let mean = per_fold.iter().map(|f| f[i]).sum::<f64>() / k;
        let var = per_fold.iter().map(|f| (f[i] - mean).powi(2)).sum::<f64>() / (k - 1.0);
        cv_mean.push(mean);
        cv_se.push((var / k).sqrt());
    }
    let mut best = 0;
    for i in 1..grid.len() {
        if cv_mean[i] < cv_mean[best] {
            best = i;
        }
    }
    Ok(CvResult {
        lambda_grid: grid.to_vec(),
        cv_mean,
        cv_se,
        chosen_lambda: grid[best],
        fold_count: splits.len(),
        seed,
    })
}

fn held_out_mse(design: &LagDesign, rows: &[usize], phi: &[f64]) -> f64 {
    let x = design.x();
    let y = design.y();
    let sse: f64 = rows
        .iter()
        .map(|&t| {
            let pred: f64 = phi
                .iter()
                .enumerate()
                .filter(|(_, c)| **c != 0.0)
                .map(|(j, c)| c * x[(t, j)])
                .sum();
            (y[t] - pred).powi(2)
        })
        .sum();
    sse / rows.len() as f64
}

/// Lags active at the path knot nearest to `chosen_lambda` on a log scale.
/// Equidistant knots resolve to the larger λ.
pub fn selected_support(path: &SolutionPath, chosen_lambda: f64) -> Result<Vec<usize>> {
    if path.knots.is_empty() {
        return Err(Error::invalid("solution path has no knots"));
    }
    if !(chosen_lambda > 0.0) {
        return Err(Error::invalid("chosen lambda must be positive"));
    }
    let target = chosen_lambda.ln();
    let mut best = 0;
    let mut best_dist = f64::INFINITY;
    for (i, k) in path.knots.iter().enumerate() {
        let d = if k.lambda_n > 0.0 {
            (k.lambda_n.ln() - target).abs()
        } else {
            f64::INFINITY
        };
        if d < best_dist {
            best = i;
            best_dist = d;
        }
    }
    Ok(crate::lasso::support_of(&path.knots[best].coefficients))
}

/// Output of the Levinson–Durbin recursion on autocovariances.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Levinson {
    /// Coefficients for orders 1..=max_order.
    pub coefficients_by_order: Vec<Vec<f64>>,
    /// Reflection coefficients (partial autocorrelations) for orders 1..=max_order.
    pub reflection: Vec<f64>,
    /// Innovation variance for orders 0..=max_order.
    pub innovation_variance: Vec<f64>,
}

/// Solve the Yule–Walker systems of every order up to `max_order` in O(max_order²).
pub fn levinson_durbin(gamma: &[f64], max_order: usize) -> Result<Levinson> {
    if gamma.len() <= max_order {
        return Err(Error::invalid(format!(
            "need autocovariances up to lag {max_order}, have {}",
            gamma.len().saturating_sub(1)
        )));
    }
    if !(gamma[0] > 0.0) {
        return Err(Error::Degenerate(
            "zero variance: series is constant".to_string(),
        ));
    }
    let mut a: Vec<f64> = Vec::with_capacity(max_order);
    let mut v = gamma[0];
    let mut coefficients_by_order = Vec::with_capacity(max_order);
    let mut reflection = Vec::with_capacity(max_order);
    let mut innovation_variance = vec![v];
    for k in 1..=max_order {
        let acc = gamma[k] - (1..k).map(|j| a[j - 1] * gamma[k - j]).sum::<f64>();
        let refl = if v > 0.0 { acc / v } else { 0.0 };
        let prev = a.clone();
        for j in 1..k {
            a[j - 1] = prev[j - 1] - refl * prev[k - j - 1];
        }
        a.push(refl);
        v *= 1.0 - refl * refl;
        reflection.push(refl);
        innovation_variance.push(v);
        coefficients_by_order.push(a.clone());
    }
    Ok(Levinson {
        coefficients_by_order,
        reflection,
        innovation_variance,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct YwFit {
    pub coefficients_by_order: Vec<Vec<f64>>,
    /// AIC for orders 1..=max_order.
    pub aic: Vec<f64>,
    pub chosen_order: usize,
    pub partial_autocorrelations: Vec<f64>,
    pub innovation_variance: Vec<f64>,
}

/// Yule–Walker fits of orders 1..=max_order on the demeaned observations,
/// with order chosen by `AIC(k) = n log σ̂²_k + 2k` (ties to the smaller order).
pub fn yule_walker(series: &TimeSeries, max_order: usize) -> Result<YwFit> {
    let x = series.observations();
    let n = x.len();
    if max_order == 0 || max_order >= n {
        return Err(Error::invalid(format!(
            "max_order must lie in [1, n), got {max_order} with n = {n}"
        )));
    }
    let gamma = sample_autocovariance(x, max_order, true);
    let lev = levinson_durbin(&gamma, max_order)?;
    let aic: Vec<f64> = lev.innovation_variance[1..]
        .iter()
        .enumerate()
        .map(|(i, v)| n as f64 * v.ln() + 2.0 * (i + 1) as f64)
        .collect();
    let mut chosen = 0;
    for i in 1..aic.len() {
        if aic[i] < aic[chosen] {
            chosen = i;
        }
    }
    Ok(YwFit {
        coefficients_by_order: lev.coefficients_by_order,
        aic,
        chosen_order: chosen + 1,
        partial_autocorrelations: lev.reflection,
        innovation_variance: lev.innovation_variance,
    })
}
