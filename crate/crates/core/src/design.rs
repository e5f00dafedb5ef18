//! Lagged regression representation of a series.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::ar_process::TimeSeries;
use crate::error::{Error, Result};

/// How rows whose lags reach before the first observation are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DesignMode {
    /// Lags for the first rows come from retained pre-sample values; all n rows are used.
    #[default]
    PreSample,
    /// Pre-sample values are treated as ordinary data and the first `p` values
    /// of the whole record only feed lags. For series without pre-sample data.
    Trim,
}

/// Response `y = (X_1, …, X_n)'` and the n×p matrix whose row t, column j
/// holds `X_{t−j}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LagDesign {
    y: DVector<f64>,
    x: DMatrix<f64>,
}

impl LagDesign {
    /// Assemble a design from raw parts; used for synthetic designs.
    pub fn from_parts(y: DVector<f64>, x: DMatrix<f64>) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::invalid("design needs n >= 1 rows and p >= 1 columns"));
        }
        if y.len() != x.nrows() {
            return Err(Error::invalid(format!(
                "response length {} does not match {} design rows",
                y.len(),
                x.nrows()
            )));
        }
        Ok(Self { y, x })
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }
}

pub fn build_design(series: &TimeSeries, p: usize) -> Result<LagDesign> {
    build_design_with(series, p, DesignMode::PreSample)
}

pub fn build_design_with(series: &TimeSeries, p: usize, mode: DesignMode) -> Result<LagDesign> {
    if p == 0 {
        return Err(Error::invalid("maximal lag p must be at least 1"));
    }
    let values = series.values();
    let offset = match mode {
        DesignMode::PreSample => {
            if series.p_presample() < p {
                return Err(Error::invalid(format!(
                    "lag order {p} needs p_presample >= {p}, series has {}",
                    series.p_presample()
                )));
            }
            series.p_presample()
        }
        DesignMode::Trim => {
            if values.len() <= p {
                return Err(Error::invalid(format!(
                    "series of length {} is too short for lag order {p}",
                    values.len()
                )));
            }
            p
        }
    };
    let n = values.len() - offset;
    let y = DVector::from_iterator(n, values[offset..].iter().copied());
    let x = DMatrix::from_fn(n, p, |t, j| values[offset + t - j - 1]);
    LagDesign::from_parts(y, x)
}

/// Second moments of a design restricted to a subset of rows, all scaled by
/// the number of rows used.
#[derive(Debug, Clone)]
pub struct Moments {
    /// `X'X / m`
    pub gram: DMatrix<f64>,
    /// `X'y / m`
    pub xty: DVector<f64>,
    /// `y'y / m`
    pub yty: f64,
    pub rows: usize,
}

/// Accumulate `X'X`, `X'y`, `y'y` over the given rows (all rows if `None`)
/// and scale by the row count.
pub fn moments(design: &LagDesign, rows: Option<&[usize]>) -> Moments {
    let p = design.p();
    let x = design.x();
    let y = design.y();
    let mut g = DMatrix::<f64>::zeros(p, p);
    let mut xty = DVector::<f64>::zeros(p);
    let mut yty = 0.0;
    let mut count = 0usize;
    let mut add_row = |t: usize| {
        let row = x.row(t);
        for j in 0..p {
            let a = row[j];
            if a == 0.0 {
                continue;
            }
            for k in j..p {
                g[(j, k)] += a * row[k];
            }
            xty[j] += a * y[t];
        }
        yty += y[t] * y[t];
        count += 1;
    };
    match rows {
        Some(r) => r.iter().for_each(|&t| add_row(t)),
        None => (0..design.n()).for_each(&mut add_row),
    }
    let scale = if count == 0 { 0.0 } else { 1.0 / count as f64 };
    for j in 0..p {
        for k in j..p {
            let v = g[(j, k)] * scale;
            g[(j, k)] = v;
            g[(k, j)] = v;
        }
    }
    Moments {
        gram: g,
        xty: xty * scale,
        yty: yty * scale,
        rows: count,
    }
}

/// `X'X / n`.
pub fn gram(design: &LagDesign) -> DMatrix<f64> {
    moments(design, None).gram
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GramDeviation {
    pub frobenius: f64,
    pub max_abs: f64,
}

/// Distance between the normalized sample Gram matrix and `Γ_p`.
pub fn gram_deviation(design: &LagDesign, gamma_p: &DMatrix<f64>) -> Result<GramDeviation> {
    let p = design.p();
    if gamma_p.nrows() != p || gamma_p.ncols() != p {
        return Err(Error::invalid(format!(
            "reference matrix is {}x{}, design has p = {p}",
            gamma_p.nrows(),
            gamma_p.ncols()
        )));
    }
    let diff = gram(design) - gamma_p;
    Ok(GramDeviation {
        frobenius: diff.norm(),
        max_abs: diff.amax(),
    })
}
