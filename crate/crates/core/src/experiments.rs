//! Monte-Carlo selection study and the smaller empirical checks built on
//! the same simulate → design → fit pipeline.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ar_process::{autocovariance, default_burn_in, simulate, toeplitz_gamma, ArModel};
use crate::design::{build_design, gram_deviation, moments};
use crate::error::{Error, Result};
use crate::lasso::{
    coordinate_descent, solution_path, SolverOptions, DEFAULT_GRID_SIZE,
    DEFAULT_LAMBDA_MIN_RATIO,
};
use crate::selection::{cross_validate_with, selected_support, yule_walker, FoldScheme, DEFAULT_FOLDS};
use crate::theory::{kappa_p, prediction_error_bound, quadratic_norm};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_REPLICATIONS: usize = 200;
pub const FULL_REPLICATIONS: usize = 1000;
pub const DEFAULT_YW_MAX_ORDER: usize = 30;
const MAX_FAILURE_FRACTION: f64 = 0.05;

/// The sparse AR(15) model of the selection study: nonzero coefficients
/// 0.2, 0.1, 0.2, 0.3, 0.1 at lags 1, 3, 5, 10, 15 and σ = 0.1.
pub fn paper_model() -> ArModel {
    let mut phi = vec![0.0; 15];
    phi[0] = 0.2;
    phi[2] = 0.1;
    phi[4] = 0.2;
    phi[9] = 0.3;
    phi[14] = 0.1;
    ArModel::new(phi, 0.1).expect("study model is causal")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum WeightScheme {
    #[default]
    Unit,
    User(Vec<f64>),
}

impl WeightScheme {
    pub fn weights(&self, p: usize) -> Result<Vec<f64>> {
        match self {
            WeightScheme::Unit => Ok(vec![1.0; p]),
            WeightScheme::User(w) if w.len() == p => Ok(w.clone()),
            WeightScheme::User(w) => Err(Error::invalid(format!(
                "user weights have length {}, expected p = {p}",
                w.len()
            ))),
        }
    }
}

fn default_replications() -> usize {
    DEFAULT_REPLICATIONS
}
fn default_folds() -> usize {
    DEFAULT_FOLDS
}
fn default_grid_size() -> usize {
    DEFAULT_GRID_SIZE
}
fn default_ratio() -> f64 {
    DEFAULT_LAMBDA_MIN_RATIO
}
fn default_yw_order() -> usize {
    DEFAULT_YW_MAX_ORDER
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub model: ArModel,
    pub n: usize,
    pub p: usize,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default = "default_folds")]
    pub cv_folds: usize,
    #[serde(default = "default_grid_size")]
    pub grid_size: usize,
    #[serde(default = "default_ratio")]
    pub lambda_min_ratio: f64,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub weight_scheme: WeightScheme,
    #[serde(default = "default_yw_order")]
    pub yw_max_order: usize,
    #[serde(default)]
    pub rolling_cv: bool,
}

impl McConfig {
    /// The study configuration: n = 1000, p = 50, unit weights.
    pub fn paper(replications: usize, base_seed: u64) -> Self {
        Self {
            model: paper_model(),
            n: 1000,
            p: 50,
            replications,
            cv_folds: DEFAULT_FOLDS,
            grid_size: DEFAULT_GRID_SIZE,
            lambda_min_ratio: DEFAULT_LAMBDA_MIN_RATIO,
            base_seed,
            weight_scheme: WeightScheme::Unit,
            yw_max_order: DEFAULT_YW_MAX_ORDER,
            rolling_cv: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::invalid("replications must be at least 1"));
        }
        if self.n == 0 || self.p == 0 {
            return Err(Error::invalid("n and p must be at least 1"));
        }
        if self.cv_folds < 2 || self.cv_folds > self.n {
            return Err(Error::invalid(format!(
                "cv_folds must lie in [2, n], got {}",
                self.cv_folds
            )));
        }
        if self.grid_size < 2 {
            return Err(Error::invalid("grid_size must be at least 2"));
        }
        if !(self.lambda_min_ratio > 0.0 && self.lambda_min_ratio < 1.0) {
            return Err(Error::invalid("lambda_min_ratio must lie in (0, 1)"));
        }
        if self.yw_max_order == 0 {
            return Err(Error::invalid("yw_max_order must be at least 1"));
        }
        self.weight_scheme.weights(self.p)?;
        Ok(())
    }

    pub fn seed_for(&self, replication: usize) -> u64 {
        self.base_seed.wrapping_add(replication as u64)
    }
}

/// What one replication contributes to the report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationOutcome {
    pub index: usize,
    pub seed: u64,
    pub chosen_lambda: f64,
    /// Lags (1-based) selected at the cross-validated penalty.
    pub selected: Vec<usize>,
    /// Path entry rank per lag; `None` for lags that never enter.
    pub entry_ranks: Vec<Option<usize>>,
    pub yw_order: usize,
}

pub fn run_replication(config: &McConfig, index: usize) -> Result<ReplicationOutcome> {
    let seed = config.seed_for(index);
    let p = config.p;
    let series = simulate(&config.model, config.n, p, default_burn_in(p), seed)?;
    let design = build_design(&series, p)?;
    let weights = config.weight_scheme.weights(p)?;
    let opts = SolverOptions::default();
    let path = solution_path(&design, &weights, config.grid_size, config.lambda_min_ratio, opts)?;
    let scheme = if config.rolling_cv {
        FoldScheme::RollingOrigin
    } else {
        FoldScheme::Random
    };
    let cv = cross_validate_with(
        &design,
        &weights,
        &path.lambdas(),
        config.cv_folds,
        seed,
        scheme,
        opts,
    )?;
    let selected = selected_support(&path, cv.chosen_lambda)?;
    let yw = yule_walker(&series, config.yw_max_order.min(config.n - 1))?;
    Ok(ReplicationOutcome {
        index,
        seed,
        chosen_lambda: cv.chosen_lambda,
        selected,
        entry_ranks: path.entry_ranks(),
        yw_order: yw.chosen_order,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub sd: f64,
    pub min: usize,
    pub median: f64,
    pub max: usize,
}

impl Summary {
    pub fn of(values: &[usize]) -> Self {
        if values.is_empty() {
            return Self {
                mean: f64::NAN,
                sd: f64::NAN,
                min: 0,
                median: f64::NAN,
                max: 0,
            };
        }
        let k = values.len() as f64;
        let mean = values.iter().sum::<usize>() as f64 / k;
        let sd = if values.len() > 1 {
            (values.iter().map(|v| (*v as f64 - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
        } else {
            0.0
        };
        let mut sorted = values.to_vec();
        sorted.sort_unstable();
        let mid = sorted.len() / 2;
        let median = if sorted.len() % 2 == 1 {
            sorted[mid] as f64
        } else {
            0.5 * (sorted[mid - 1] + sorted[mid]) as f64
        };
        Self {
            mean,
            sd,
            min: sorted[0],
            median,
            max: *sorted.last().unwrap(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McReport {
    pub schema_version: u32,
    pub n: usize,
    pub p: usize,
    pub replications: usize,
    pub base_seed: u64,
    pub true_coefficients: Vec<f64>,
    pub failures: usize,
    pub selected_count_per_lag: Vec<usize>,
    /// Replications where the lag was selected and was among the first five path entrants.
    pub among_first_five_per_lag: Vec<usize>,
    /// Support size per successful replication, in replication order.
    pub num_selected: Vec<usize>,
    /// Per lag, entry rank → count. Lags that never enter are not counted.
    pub entry_order_histogram: Vec<BTreeMap<usize, usize>>,
    pub never_entered_per_lag: Vec<usize>,
    pub yw_order_histogram: BTreeMap<usize, usize>,
    pub summary: Summary,
}

impl McReport {
    pub fn successes(&self) -> usize {
        self.num_selected.len()
    }

    pub fn selection_fraction(&self, lag: usize) -> f64 {
        self.selected_count_per_lag[lag - 1] as f64 / self.successes() as f64
    }

    /// Number of replications in which `lag` was the first path entrant.
    pub fn first_entrant_count(&self, lag: usize) -> usize {
        self.entry_order_histogram[lag - 1].get(&1).copied().unwrap_or(0)
    }

    /// Mean entry rank of `lag` over replications where it entered.
    pub fn mean_entry_rank(&self, lag: usize) -> f64 {
        let h = &self.entry_order_histogram[lag - 1];
        let count: usize = h.values().sum();
        h.iter().map(|(r, c)| (r * c) as f64).sum::<f64>() / count as f64
    }

    pub fn modal_yw_order(&self) -> Option<(usize, usize)> {
        // max_by_key keeps the last maximum; iterate in reverse so ties favour the smaller order
        self.yw_order_histogram
            .iter()
            .rev()
            .max_by_key(|(_, c)| **c)
            .map(|(o, c)| (*o, *c))
    }
}

/// Fold replication outcomes into the report. The result does not depend
/// on the order of `outcomes`.
pub fn aggregate(config: &McConfig, outcomes: &[ReplicationOutcome], failures: usize) -> McReport {
    let p = config.p;
    let mut sorted: Vec<&ReplicationOutcome> = outcomes.iter().collect();
    sorted.sort_by_key(|o| o.index);
    let mut selected_count = vec![0usize; p];
    let mut first_five = vec![0usize; p];
    let mut entry_hist = vec![BTreeMap::new(); p];
    let mut never = vec![0usize; p];
    let mut yw_hist = BTreeMap::new();
    let mut num_selected = Vec::with_capacity(sorted.len());
    for o in &sorted {
        for &lag in &o.selected {
            selected_count[lag - 1] += 1;
            if o.entry_ranks[lag - 1].is_some_and(|r| r <= 5) {
                first_five[lag - 1] += 1;
            }
        }
        for (j, r) in o.entry_ranks.iter().enumerate() {
            match r {
                Some(r) => *entry_hist[j].entry(*r).or_insert(0) += 1,
                None => never[j] += 1,
            }
        }
        *yw_hist.entry(o.yw_order).or_insert(0) += 1;
        num_selected.push(o.selected.len());
    }
    McReport {
        schema_version: SCHEMA_VERSION,
        n: config.n,
        p,
        replications: config.replications,
        base_seed: config.base_seed,
        true_coefficients: config.model.padded_coefficients(p),
        failures,
        selected_count_per_lag: selected_count,
        among_first_five_per_lag: first_five,
        summary: Summary::of(&num_selected),
        num_selected,
        entry_order_histogram: entry_hist,
        never_entered_per_lag: never,
        yw_order_histogram: yw_hist,
    }
}

/// Simulate, fit, cross-validate and select for every replication, then aggregate.
pub fn run_monte_carlo(config: &McConfig) -> Result<McReport> {
    config.validate()?;
    let results: Vec<Result<ReplicationOutcome>> = (0..config.replications)
        .into_par_iter()
        .map(|i| run_replication(config, i))
        .collect();
    let mut outcomes = Vec::with_capacity(results.len());
    let mut failures = 0;
    for r in results {
        match r {
            Ok(o) => outcomes.push(o),
            Err(e) if e.is_validation() && !matches!(e, Error::Degenerate(_)) => return Err(e),
            Err(_) => failures += 1,
        }
    }
    if failures as f64 > MAX_FAILURE_FRACTION * config.replications as f64 {
        return Err(Error::Experiment(format!(
            "{failures} of {} replications failed",
            config.replications
        )));
    }
    Ok(aggregate(config, &outcomes, failures))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => Error::Format {
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    }
}

fn write_csv<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Write the report files into `dir`, overwriting any previous run, and
/// return the paths written.
pub fn emit_report(report: &McReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let json_path = dir.join("report.json");
    let body = serde_json::to_string_pretty(report).expect("report serializes");
    fs::write(&json_path, body).map_err(|source| Error::Io {
        path: json_path.clone(),
        source,
    })?;

    let table = dir.join("table1.csv");
    write_csv(
        &table,
        &["lag", "value", "selected_count", "among_first_five"],
        (0..report.p).map(|j| {
            vec![
                (j + 1).to_string(),
                report.true_coefficients[j].to_string(),
                report.selected_count_per_lag[j].to_string(),
                report.among_first_five_per_lag[j].to_string(),
            ]
        }),
    )?;

    let num = dir.join("num_selected.csv");
    write_csv(
        &num,
        &["replication", "num_selected"],
        report
            .num_selected
            .iter()
            .enumerate()
            .map(|(i, k)| vec![i.to_string(), k.to_string()]),
    )?;

    let entry = dir.join("entry_order.csv");
    write_csv(
        &entry,
        &["lag", "order", "count"],
        report.entry_order_histogram.iter().enumerate().flat_map(|(j, h)| {
            h.iter()
                .map(move |(o, c)| vec![(j + 1).to_string(), o.to_string(), c.to_string()])
        }),
    )?;

    let yw = dir.join("yw_orders.csv");
    write_csv(
        &yw,
        &["order", "count"],
        report
            .yw_order_histogram
            .iter()
            .map(|(o, c)| vec![o.to_string(), c.to_string()]),
    )?;

    Ok(vec![json_path, table, num, entry, yw])
}

/// Entrywise max deviation of `X'X/n` from `Γ_p` for each seed.
pub fn gram_deviation_study(model: &ArModel, p: usize, n: usize, seeds: &[u64]) -> Result<Vec<f64>> {
    let acov = autocovariance(model, p - 1, 1e-14)?;
    let gamma_p = toeplitz_gamma(&acov, p)?;
    seeds
        .par_iter()
        .map(|&seed| {
            let s = simulate(model, n, p, default_burn_in(p), seed)?;
            let d = build_design(&s, p)?;
            Ok(gram_deviation(&d, &gamma_p)?.max_abs)
        })
        .collect()
}

/// Per-replication `‖φ̂ − φ*‖²_{Γ_p}` at `λ_n = n^{−α}` with unit weights,
/// compared against the prediction bound with `M = 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictionStudy {
    pub lambda_n: f64,
    pub kappa_p: f64,
    pub bound: f64,
    pub errors: Vec<f64>,
}

impl PredictionStudy {
    pub fn fraction_within(&self) -> f64 {
        self.errors.iter().filter(|e| **e <= self.bound).count() as f64 / self.errors.len() as f64
    }
}

fn fixed_penalty_fits(
    model: &ArModel,
    n: usize,
    p: usize,
    lambda_n: f64,
    replications: usize,
    base_seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let thresholds = vec![lambda_n; p];
    (0..replications)
        .into_par_iter()
        .map(|i| {
            let s = simulate(model, n, p, default_burn_in(p), base_seed.wrapping_add(i as u64))?;
            let d = build_design(&s, p)?;
            let m = moments(&d, None);
            Ok(coordinate_descent(&m, &thresholds, None, SolverOptions::default())?.coefficients)
        })
        .collect()
}

pub fn prediction_error_study(
    model: &ArModel,
    n: usize,
    p: usize,
    alpha: f64,
    replications: usize,
    base_seed: u64,
) -> Result<PredictionStudy> {
    let lambda_n = (n as f64).powf(-alpha);
    let acov = autocovariance(model, p - 1, 1e-14)?;
    let gamma_p = toeplitz_gamma(&acov, p)?;
    let kappa = kappa_p(&gamma_p, 1e-12)?;
    let phi_star = model.padded_coefficients(p);
    let s = phi_star.iter().filter(|c| **c != 0.0).count();
    let bound = prediction_error_bound(lambda_n, s, kappa, 1.0)?;
    let errors = fixed_penalty_fits(model, n, p, lambda_n, replications, base_seed)?
        .iter()
        .map(|phi| {
            let diff: Vec<f64> = phi.iter().zip(&phi_star).map(|(a, b)| a - b).collect();
            quadratic_norm(&diff, &gamma_p)
        })
        .collect();
    Ok(PredictionStudy {
        lambda_n,
        kappa_p: kappa,
        bound,
        errors,
    })
}

/// Fraction of replications where `sgn(φ̂) = sgn(φ*)` at `λ_n = n^{−α}`, unit weights.
pub fn sign_recovery_fraction(
    model: &ArModel,
    n: usize,
    p: usize,
    alpha: f64,
    replications: usize,
    base_seed: u64,
) -> Result<f64> {
    let lambda_n = (n as f64).powf(-alpha);
    let truth: Vec<i8> = model
        .padded_coefficients(p)
        .iter()
        .map(|c| crate::lasso::sign(*c))
        .collect();
    let fits = fixed_penalty_fits(model, n, p, lambda_n, replications, base_seed)?;
    let hits = fits
        .iter()
        .filter(|phi| phi.iter().map(|c| crate::lasso::sign(*c)).eq(truth.iter().copied()))
        .count();
    Ok(hits as f64 / replications as f64)
}
