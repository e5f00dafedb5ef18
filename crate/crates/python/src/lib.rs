//! Python bindings: `import pyarlasso`.

use arlasso::experiments::{self, McConfig};
use arlasso::lasso::{self, SolverOptions};
use arlasso::selection::{self, FoldScheme};
use arlasso::theory::{self, Family};
use arlasso::{ar_process, design, DesignMode, Error};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: Error) -> PyErr {
    if e.is_validation() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn unit_or(weights: Option<Vec<f64>>, p: usize) -> Vec<f64> {
    weights.unwrap_or_else(|| vec![1.0; p])
}

fn solver(tol: f64, max_iter: usize) -> SolverOptions {
    SolverOptions { tol, max_iter }
}

#[pyclass(name = "ArModel", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyArModel(ar_process::ArModel);

#[pymethods]
impl PyArModel {
    #[new]
    fn new(phi: Vec<f64>, sigma: f64) -> PyResult<Self> {
        ar_process::ArModel::new(phi, sigma).map(Self).map_err(to_py)
    }

    #[getter]
    fn phi(&self) -> Vec<f64> {
        self.0.coefficients().to_vec()
    }

    #[getter]
    fn sigma(&self) -> f64 {
        self.0.noise_sd()
    }

    #[getter]
    fn order(&self) -> usize {
        self.0.order()
    }

    /// Distance of the nearest characteristic root beyond the unit circle.
    #[getter]
    fn margin(&self) -> f64 {
        self.0.margin()
    }

    fn support(&self) -> Vec<usize> {
        self.0.support()
    }

    fn __repr__(&self) -> String {
        format!("ArModel(phi={:?}, sigma={})", self.0.coefficients(), self.0.noise_sd())
    }
}

#[pyclass(name = "TimeSeries", frozen, skip_from_py_object)]
struct PyTimeSeries(ar_process::TimeSeries);

#[pymethods]
impl PyTimeSeries {
    #[new]
    #[pyo3(signature = (values, p_presample = 0))]
    fn new(values: Vec<f64>, p_presample: usize) -> PyResult<Self> {
        ar_process::TimeSeries::new(values, p_presample, None)
            .map(Self)
            .map_err(to_py)
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.0.values().to_vec()
    }

    #[getter]
    fn observations(&self) -> Vec<f64> {
        self.0.observations().to_vec()
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    #[getter]
    fn p_presample(&self) -> usize {
        self.0.p_presample()
    }

    #[getter]
    fn seed(&self) -> Option<u64> {
        self.0.seed()
    }

    fn __len__(&self) -> usize {
        self.0.values().len()
    }
}

#[pyclass(name = "LagDesign", frozen, skip_from_py_object)]
struct PyLagDesign(design::LagDesign);

#[pymethods]
impl PyLagDesign {
    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    #[getter]
    fn p(&self) -> usize {
        self.0.p()
    }

    #[getter]
    fn y(&self) -> Vec<f64> {
        self.0.y().iter().copied().collect()
    }

    /// `X'X / n` as a list of rows.
    fn gram(&self) -> Vec<Vec<f64>> {
        let g = design::gram(&self.0);
        g.row_iter().map(|r| r.iter().copied().collect()).collect()
    }
}

#[pyclass(name = "LassoFit", frozen, get_all, skip_from_py_object)]
struct PyLassoFit {
    coefficients: Vec<f64>,
    support: Vec<usize>,
    signs: Vec<i8>,
    objective: f64,
    kkt_residual: f64,
    iterations: usize,
    lambda_n: f64,
}

impl From<lasso::LassoFit> for PyLassoFit {
    fn from(f: lasso::LassoFit) -> Self {
        Self {
            coefficients: f.coefficients,
            support: f.support,
            signs: f.signs,
            objective: f.objective,
            kkt_residual: f.kkt_residual,
            iterations: f.iterations,
            lambda_n: f.lambda_n,
        }
    }
}

#[pyclass(name = "SolutionPath", frozen, skip_from_py_object)]
struct PySolutionPath(lasso::SolutionPath);

#[pymethods]
impl PySolutionPath {
    #[getter]
    fn lambdas(&self) -> Vec<f64> {
        self.0.lambdas()
    }

    /// One coefficient vector per knot, in grid order.
    #[getter]
    fn coefficients(&self) -> Vec<Vec<f64>> {
        self.0.knots.iter().map(|k| k.coefficients.clone()).collect()
    }

    #[getter]
    fn entry_ranks(&self) -> Vec<Option<usize>> {
        self.0.entry_ranks()
    }

    fn first_entrants(&self, k: usize) -> Vec<usize> {
        self.0.first_entrants(k)
    }

    fn selected_support(&self, chosen_lambda: f64) -> PyResult<Vec<usize>> {
        selection::selected_support(&self.0, chosen_lambda).map_err(to_py)
    }
}

#[pyclass(name = "CvResult", frozen, get_all, skip_from_py_object)]
struct PyCvResult {
    lambda_grid: Vec<f64>,
    cv_mean: Vec<f64>,
    cv_se: Vec<f64>,
    chosen_lambda: f64,
    fold_count: usize,
    seed: u64,
}

#[pyclass(name = "YwFit", frozen, get_all, skip_from_py_object)]
struct PyYwFit {
    coefficients_by_order: Vec<Vec<f64>>,
    aic: Vec<f64>,
    chosen_order: usize,
    partial_autocorrelations: Vec<f64>,
    innovation_variance: Vec<f64>,
}

#[pyclass(name = "McReport", frozen, skip_from_py_object)]
struct PyMcReport(experiments::McReport);

#[pymethods]
impl PyMcReport {
    #[getter]
    fn replications(&self) -> usize {
        self.0.replications
    }

    #[getter]
    fn failures(&self) -> usize {
        self.0.failures
    }

    #[getter]
    fn selected_count_per_lag(&self) -> Vec<usize> {
        self.0.selected_count_per_lag.clone()
    }

    #[getter]
    fn among_first_five_per_lag(&self) -> Vec<usize> {
        self.0.among_first_five_per_lag.clone()
    }

    #[getter]
    fn num_selected(&self) -> Vec<usize> {
        self.0.num_selected.clone()
    }

    fn selection_fraction(&self, lag: usize) -> f64 {
        self.0.selection_fraction(lag)
    }

    fn modal_yw_order(&self) -> Option<(usize, usize)> {
        self.0.modal_yw_order()
    }

    /// The full report as the JSON written by `emit_report`.
    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.0).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    fn emit(&self, dir: std::path::PathBuf) -> PyResult<Vec<std::path::PathBuf>> {
        experiments::emit_report(&self.0, &dir).map_err(to_py)
    }
}

#[pyfunction]
fn paper_model() -> PyArModel {
    PyArModel(experiments::paper_model())
}

/// `(causal, margin)` for a coefficient vector.
#[pyfunction]
fn check_causality(phi: Vec<f64>) -> PyResult<(bool, f64)> {
    let c = ar_process::check_causality(&phi).map_err(to_py)?;
    Ok((c.causal, c.margin))
}

/// `(psi_0..psi_k, tail_bound)`.
#[pyfunction]
fn ma_coefficients(model: PyRef<'_, PyArModel>, k: usize) -> (Vec<f64>, f64) {
    let e = ar_process::ma_coefficients(&model.0, k);
    (e.psi, e.tail_bound)
}

#[pyfunction]
#[pyo3(signature = (model, max_lag, tol = 1e-12))]
fn autocovariance(model: PyRef<'_, PyArModel>, max_lag: usize, tol: f64) -> PyResult<Vec<f64>> {
    ar_process::autocovariance(&model.0, max_lag, tol)
        .map(|g| g.gamma)
        .map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (model, n, p_presample = 0, seed = 0, burn_in = None))]
fn simulate(
    model: PyRef<'_, PyArModel>,
    n: usize,
    p_presample: usize,
    seed: u64,
    burn_in: Option<usize>,
) -> PyResult<PyTimeSeries> {
    let burn = burn_in.unwrap_or_else(|| ar_process::default_burn_in(p_presample.max(model.0.order())));
    ar_process::simulate(&model.0, n, p_presample, burn, seed)
        .map(PyTimeSeries)
        .map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (series, p, trim_presample = false))]
fn build_design(series: PyRef<'_, PyTimeSeries>, p: usize, trim_presample: bool) -> PyResult<PyLagDesign> {
    let mode = if trim_presample {
        DesignMode::Trim
    } else {
        DesignMode::PreSample
    };
    design::build_design_with(&series.0, p, mode)
        .map(PyLagDesign)
        .map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (design, lambda_n, weights = None, tol = lasso::DEFAULT_TOL, max_iter = lasso::DEFAULT_MAX_ITER))]
fn fit(
    design: PyRef<'_, PyLagDesign>,
    lambda_n: f64,
    weights: Option<Vec<f64>>,
    tol: f64,
    max_iter: usize,
) -> PyResult<PyLassoFit> {
    let pen = lasso::PenaltyConfig::new(lambda_n, unit_or(weights, design.0.p())).map_err(to_py)?;
    lasso::fit(&design.0, &pen, solver(tol, max_iter))
        .map(PyLassoFit::from)
        .map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (design, weights = None))]
fn lambda_max(design: PyRef<'_, PyLagDesign>, weights: Option<Vec<f64>>) -> PyResult<f64> {
    lasso::lambda_max(&design.0, &unit_or(weights, design.0.p())).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (design, weights = None, grid_size = lasso::DEFAULT_GRID_SIZE, lambda_min_ratio = lasso::DEFAULT_LAMBDA_MIN_RATIO))]
fn solution_path(
    design: PyRef<'_, PyLagDesign>,
    weights: Option<Vec<f64>>,
    grid_size: usize,
    lambda_min_ratio: f64,
) -> PyResult<PySolutionPath> {
    let w = unit_or(weights, design.0.p());
    lasso::solution_path(&design.0, &w, grid_size, lambda_min_ratio, SolverOptions::default())
        .map(PySolutionPath)
        .map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (design, grid, weights = None, folds = selection::DEFAULT_FOLDS, seed = 0, rolling = false))]
fn cross_validate(
    design: PyRef<'_, PyLagDesign>,
    grid: Vec<f64>,
    weights: Option<Vec<f64>>,
    folds: usize,
    seed: u64,
    rolling: bool,
) -> PyResult<PyCvResult> {
    let scheme = if rolling {
        FoldScheme::RollingOrigin
    } else {
        FoldScheme::Random
    };
    let w = unit_or(weights, design.0.p());
    let cv = selection::cross_validate_with(&design.0, &w, &grid, folds, seed, scheme, SolverOptions::default())
        .map_err(to_py)?;
    Ok(PyCvResult {
        lambda_grid: cv.lambda_grid,
        cv_mean: cv.cv_mean,
        cv_se: cv.cv_se,
        chosen_lambda: cv.chosen_lambda,
        fold_count: cv.fold_count,
        seed: cv.seed,
    })
}

#[pyfunction]
fn yule_walker(series: PyRef<'_, PyTimeSeries>, max_order: usize) -> PyResult<PyYwFit> {
    let yw = selection::yule_walker(&series.0, max_order).map_err(to_py)?;
    Ok(PyYwFit {
        coefficients_by_order: yw.coefficients_by_order,
        aic: yw.aic,
        chosen_order: yw.chosen_order,
        partial_autocorrelations: yw.partial_autocorrelations,
        innovation_variance: yw.innovation_variance,
    })
}

/// Condition table rows `(name, value, status)` for a model, sample size and penalty.
/// `family` is an optional `(rho, l, L)` triple.
#[pyfunction]
#[pyo3(signature = (model, n, lambda_n, p = None, weights = None, family = None))]
fn check(
    model: PyRef<'_, PyArModel>,
    n: usize,
    lambda_n: f64,
    p: Option<usize>,
    weights: Option<Vec<f64>>,
    family: Option<(f64, f64, f64)>,
) -> PyResult<Vec<(String, Option<f64>, String)>> {
    let p = p.unwrap_or(model.0.order());
    let pen = lasso::PenaltyConfig::new(lambda_n, unit_or(weights, p)).map_err(to_py)?;
    let fam = family.map(|(rho, l, big_l)| Family { rho, l, big_l });
    let rep = theory::condition_report(&model.0, n, &pen, fam).map_err(to_py)?;
    Ok(rep
        .rows
        .into_iter()
        .map(|r| (r.name, r.value, r.status.to_string()))
        .collect())
}

#[pyfunction]
#[pyo3(signature = (replications = experiments::DEFAULT_REPLICATIONS, seed = 1, n = 1000, p = 50, model = None))]
fn run_monte_carlo(
    py: Python<'_>,
    replications: usize,
    seed: u64,
    n: usize,
    p: usize,
    model: Option<PyRef<'_, PyArModel>>,
) -> PyResult<PyMcReport> {
    let mut cfg = McConfig::paper(replications, seed);
    cfg.n = n;
    cfg.p = p;
    if let Some(m) = model {
        cfg.model = m.0.clone();
    }
    py.detach(|| experiments::run_monte_carlo(&cfg))
        .map(PyMcReport)
        .map_err(to_py)
}

#[pymodule]
pub fn pyarlasso(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyArModel>()?;
    m.add_class::<PyTimeSeries>()?;
    m.add_class::<PyLagDesign>()?;
    m.add_class::<PyLassoFit>()?;
    m.add_class::<PySolutionPath>()?;
    m.add_class::<PyCvResult>()?;
    m.add_class::<PyYwFit>()?;
    m.add_class::<PyMcReport>()?;
    m.add_function(wrap_pyfunction!(paper_model, m)?)?;
    m.add_function(wrap_pyfunction!(check_causality, m)?)?;
    m.add_function(wrap_pyfunction!(ma_coefficients, m)?)?;
    m.add_function(wrap_pyfunction!(autocovariance, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(build_design, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(lambda_max, m)?)?;
    m.add_function(wrap_pyfunction!(solution_path, m)?)?;
    m.add_function(wrap_pyfunction!(cross_validate, m)?)?;
    m.add_function(wrap_pyfunction!(yule_walker, m)?)?;
    m.add_function(wrap_pyfunction!(check, m)?)?;
    m.add_function(wrap_pyfunction!(run_monte_carlo, m)?)?;
    Ok(())
}
