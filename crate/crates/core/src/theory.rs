//! Evaluators for the consistency conditions, rates, constants and
//! probability bounds attached to the Lasso-for-AR estimator.
//!
//! Nothing here is estimated from data. Each function takes a concrete
//! instance (autocovariance matrix, true coefficients, penalty, sample size,
//! family parameters) and returns the number the corresponding condition or
//! bound asks for. Bounds of one or more are flagged as vacuous by
//! [`is_vacuous`] rather than clipped.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::Serialize;

use crate::ar_process::{autocovariance, check_causality, toeplitz_gamma, ArModel};
use crate::error::{Error, Result};
use crate::lasso::PenaltyConfig;

/// Universal constant from the moderate-deviation cumulant bound.
pub const C1: f64 = 147_456.0; // 2^10 · 12^2
/// Universal constant from the moderate-deviation cumulant bound.
pub const C2: f64 = 1.0 / 1152.0; // 2^-3 · 12^-2

pub fn is_vacuous(bound: f64) -> bool {
    bound >= 1.0
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignConditionReport {
    pub s: usize,
    pub nu: usize,
    /// Spectral norm `‖Γ_SS^{-1}‖_2`.
    pub c_max: Option<f64>,
    /// Max-row-sum norm `‖Γ_SS^{-1}‖_∞`.
    pub c_max_inf: Option<f64>,
    /// `‖Γ_{S^cS} Γ_SS^{-1}‖_∞`.
    pub incoherence: Option<f64>,
    pub epsilon: Option<f64>,
    /// Smallest nonzero true coefficient in modulus.
    pub min_signal: Option<f64>,
    /// `max_{i∈S} λ_{n,i} / min_{j∈S^c} λ_{n,j}`.
    pub cond1_ratio: Option<f64>,
    /// `(√(s/n) + λ_n ‖λ_{n,S}‖_∞) / min_signal`.
    pub cond2_value: Option<f64>,
    /// `n λ_n² (min_{i∈S^c} λ_{n,i})² / max{s, ν}`.
    pub cond3_value: Option<f64>,
}

fn check_square(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::invalid(format!("{what} must be a nonempty square matrix")));
    }
    Ok(())
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    let scale = m.amax().max(f64::MIN_POSITIVE);
    for i in 0..m.nrows() {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale {
                return Err(Error::invalid(format!(
                    "matrix is not symmetric at ({}, {})",
                    i + 1,
                    j + 1
                )));
            }
        }
    }
    Ok(())
}

fn submatrix(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

fn max_row_sum(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Largest eigenvalue of `A^{-1}` for symmetric positive definite `A`, by
/// power iteration on Cholesky solves.
pub fn inverse_spectral_norm(chol: &Cholesky<f64, Dyn>, dim: usize) -> f64 {
    let mut v = DVector::from_fn(dim, |i, _| 1.0 + 0.1 * i as f64);
    v /= v.norm();
    let mut est = 0.0;
    for _ in 0..100_000 {
        let w = chol.solve(&v);
        let next = v.dot(&w);
        let norm = w.norm();
        v = w / norm;
        if (next - est).abs() <= 1e-15 * next.abs() {
            return next;
        }
        est = next;
    }
    est
}

/// Evaluate the sign-consistency hypotheses for a concrete instance.
/// `phi_star` may be shorter than `p`; missing lags are zero.
pub fn sign_conditions(
    gamma_p: &DMatrix<f64>,
    phi_star: &[f64],
    penalty: &PenaltyConfig,
    n: usize,
) -> Result<SignConditionReport> {
    check_square(gamma_p, "autocovariance matrix")?;
    let p = gamma_p.nrows();
    if phi_star.len() > p {
        return Err(Error::invalid(format!(
            "true coefficient vector has {} lags, matrix is {p}x{p}",
            phi_star.len()
        )));
    }
    if penalty.p() != p {
        return Err(Error::invalid(format!("{} weights for p = {p}", penalty.p())));
    }
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    let coef = |j: usize| phi_star.get(j).copied().unwrap_or(0.0);
    let s_idx: Vec<usize> = (0..p).filter(|&j| coef(j) != 0.0).collect();
    let sc_idx: Vec<usize> = (0..p).filter(|&j| coef(j) == 0.0).collect();
    let (s, nu) = (s_idx.len(), sc_idx.len());
    let w = penalty.weights();
    let lam = penalty.lambda_n();

    let max_w = |idx: &[usize]| idx.iter().map(|&j| w[j]).fold(f64::NEG_INFINITY, f64::max);
    let min_w = |idx: &[usize]| idx.iter().map(|&j| w[j]).fold(f64::INFINITY, f64::min);

    let mut report = SignConditionReport {
        s,
        nu,
        c_max: None,
        c_max_inf: None,
        incoherence: None,
        epsilon: None,
        min_signal: None,
        cond1_ratio: None,
        cond2_value: None,
        cond3_value: None,
    };

    if !sc_idx.is_empty() {
        report.cond3_value =
            Some(n as f64 * lam * lam * min_w(&sc_idx).powi(2) / s.max(nu) as f64);
    }
    if s_idx.is_empty() {
        return Ok(report);
    }

    let min_signal = s_idx.iter().map(|&j| coef(j).abs()).fold(f64::INFINITY, f64::min);
    report.min_signal = Some(min_signal);
    report.cond2_value = Some(((s as f64 / n as f64).sqrt() + lam * max_w(&s_idx)) / min_signal);

    let g_ss = submatrix(gamma_p, &s_idx, &s_idx);
    let chol = Cholesky::new(g_ss.clone())
        .ok_or_else(|| Error::Singular("Γ_SS is not positive definite".to_string()))?;
    report.c_max = Some(inverse_spectral_norm(&chol, s));
    report.c_max_inf = Some(max_row_sum(&chol.inverse()));

    if !sc_idx.is_empty() {
        report.cond1_ratio = Some(max_w(&s_idx) / min_w(&sc_idx));
        // Γ_SS^{-1} Γ_{S S^c} is the transpose of Γ_{S^cS} Γ_SS^{-1}
        let g_s_sc = submatrix(gamma_p, &s_idx, &sc_idx);
        let inc = max_row_sum(&chol.solve(&g_s_sc).transpose());
        report.incoherence = Some(inc);
        report.epsilon = Some(1.0 - inc);
    }
    Ok(report)
}

/// `p^{1/2} (n^{-1/2} + λ_n ‖λ_{n,S}‖)`.
pub fn estimation_rate(n: usize, p: usize, lambda_n: f64, weights_s_norm: f64) -> Result<f64> {
    if n == 0 || p == 0 {
        return Err(Error::invalid("n and p must be at least 1"));
    }
    Ok((p as f64).sqrt() * ((n as f64).powf(-0.5) + lambda_n * weights_s_norm))
}

fn psd_with_shift(r: &DMatrix<f64>, kappa: f64) -> bool {
    let p = r.nrows();
    let mut m = r.clone();
    for i in 0..p {
        m[(i, i)] -= kappa - 1e-13;
    }
    Cholesky::new(m).is_some()
}

/// Largest `κ` such that `Γ_p − κ diag(Γ_p)` is positive semi-definite, by
/// bisection on Cholesky feasibility of the correlation-scaled matrix.
pub fn kappa_p(gamma_p: &DMatrix<f64>, tol: f64) -> Result<f64> {
    check_square(gamma_p, "autocovariance matrix")?;
    check_symmetric(gamma_p)?;
    if !(tol > 0.0) {
        return Err(Error::invalid("bisection tolerance must be positive"));
    }
    let p = gamma_p.nrows();
    if (0..p).any(|i| !(gamma_p[(i, i)] > 0.0)) {
        return Err(Error::invalid("diagonal entries must be positive"));
    }
    let d: Vec<f64> = (0..p).map(|i| gamma_p[(i, i)].sqrt()).collect();
    let r = DMatrix::from_fn(p, p, |i, j| gamma_p[(i, j)] / (d[i] * d[j]));
    if psd_with_shift(&r, 1.0) {
        return Ok(1.0);
    }
    // Gershgorin lower bound on the smallest eigenvalue is always feasible.
    let gersh = (0..p)
        .map(|i| 1.0 - (0..p).filter(|&j| j != i).map(|j| r[(i, j)].abs()).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    let mut lo = gersh.min(0.0) - 1.0;
    let mut hi = 1.0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if psd_with_shift(&r, mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

fn check_family(rho: f64, l: f64, big_l: f64) -> Result<()> {
    if !(rho > 1.0 && rho.is_finite()) {
        return Err(Error::invalid(format!("rho must exceed 1, got {rho}")));
    }
    if !(l > 0.0 && l < 1.0) {
        return Err(Error::invalid(format!("l must lie in (0, 1), got {l}")));
    }
    if !(big_l > 1.0 && big_l.is_finite()) {
        return Err(Error::invalid(format!("L must exceed 1, got {big_l}")));
    }
    Ok(())
}

/// Geometric strong-mixing bound `2 (Lρ / (l(ρ−1)))² ρ^{-m}`.
pub fn mixing_bound(rho: f64, l: f64, big_l: f64, m: u32) -> Result<f64> {
    check_family(rho, l, big_l)?;
    let base = big_l * rho / (l * (rho - 1.0));
    Ok(2.0 * base * base * rho.powi(-(m as i32)))
}

/// Constants of the prediction bound for a family `(ρ, l, L)`, penalty
/// weight bound `M` and restricted-eigenvalue constant `κ_p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PredictionConstants {
    pub rho: f64,
    pub l: f64,
    #[serde(rename = "L")]
    pub big_l: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub big_d: f64,
    pub c1: f64,
    pub c2: f64,
    pub f1: f64,
    pub f2: f64,
    pub kappa_p: f64,
    pub m_bound: f64,
}

impl PredictionConstants {
    pub fn new(rho: f64, l: f64, big_l: f64, m_bound: f64, kappa_p: f64) -> Result<Self> {
        check_family(rho, l, big_l)?;
        if !(m_bound > 0.0 && m_bound.is_finite()) {
            return Err(Error::invalid("weight bound M must be positive and finite"));
        }
        let beta1 = 1.0 + 1.0 / rho.ln();
        let beta2 = 1.0 + big_l * rho / (l * (rho - 1.0));
        let big_d = (C1.powi(3) * C2 * beta1.powi(2) * beta2.powi(3)).powf(0.2);
        let f1 = ((C2 / beta1).powf(0.25) / 4.0).min(2f64.powi(-9)).min(0.125);
        let f2 = 1.0 / (4.0 * C1 * beta1 * beta2);
        let out = Self {
            rho,
            l,
            big_l,
            beta1,
            beta2,
            big_d,
            c1: C1,
            c2: C2,
            f1,
            f2,
            kappa_p,
            m_bound,
        };
        debug_assert!(out.identities_hold());
        Ok(out)
    }

    /// Recompute every derived constant from its definition and compare.
    pub fn identities_hold(&self) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs().max(1.0);
        close(self.beta1, 1.0 + 1.0 / self.rho.ln())
            && close(self.beta2, 1.0 + self.big_l * self.rho / (self.l * (self.rho - 1.0)))
            && close(
                self.big_d,
                (self.c1.powi(3) * self.c2 * self.beta1.powi(2) * self.beta2.powi(3)).powf(0.2),
            )
            && close(self.c1, 2f64.powi(10) * 144.0)
            && close(self.c2, 2f64.powi(-3) / 144.0)
            && close(
                self.f1,
                [(self.c2 / self.beta1).powf(0.25) / 4.0, 2f64.powi(-9), 0.125]
                    .into_iter()
                    .fold(f64::INFINITY, f64::min),
            )
            && close(self.f2, 1.0 / (4.0 * self.c1 * self.beta1 * self.beta2))
    }

    /// `σ² (n + D n^{3/5})`; the deviation level `y` must exceed this.
    pub fn y_threshold(&self, n: usize, sigma: f64) -> f64 {
        sigma * sigma * (n as f64 + self.big_d * (n as f64).powf(0.6))
    }

    /// `λ_n (s/p)^{1/2} ≤ D n^{-2/5}`.
    pub fn rate_condition_holds(&self, n: usize, p: usize, s: usize, lambda_n: f64) -> bool {
        lambda_n * (s as f64 / p as f64).sqrt() <= self.big_d * (n as f64).powf(-0.4)
    }
}

/// Upper bound on the probability that the prediction bound fails.
#[allow(clippy::too_many_arguments)]
pub fn pi_bound(
    n: usize,
    p: usize,
    s: usize,
    lambda_n: f64,
    lambda_min: f64,
    lambda_max_w: f64,
    sigma: f64,
    c: f64,
    y: f64,
    consts: &PredictionConstants,
) -> Result<f64> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::invalid(format!("c must be positive and finite, got {c}")));
    }
    if !(sigma > 0.0) {
        return Err(Error::invalid("sigma must be positive"));
    }
    let threshold = consts.y_threshold(n, sigma);
    if !(y > threshold) {
        return Err(Error::domain(format!(
            "y = {y} must exceed sigma^2 (n + D n^(3/5)) = {threshold}"
        )));
    }
    let (nf, pf, sf) = (n as f64, p as f64, s as f64);
    let s2 = sigma * sigma;
    let a = (y / s2 - nf).cbrt();
    let b = c * c / s2;
    let d = nf * nf * lambda_n * lambda_n * lambda_min * lambda_min
        / (y + c * nf * lambda_n * lambda_max_w / 2.0);
    let first = 6.0 * pf * (-consts.f1 * a.min(b).min(d)).exp();
    let second = pf * pf * (-consts.f2 * nf * lambda_n * lambda_n * (sf / (pf * pf))).exp();
    Ok(first + second)
}

/// `p² exp{−f min{n^{1/3}, n^{2α}/λ_max², n^{1−2α} λ_min², n^{1−2α} s/p²}}`
/// for `λ_n = n^{−α}`.
pub fn corollary_bound(
    n: usize,
    p: usize,
    s: usize,
    alpha: f64,
    lambda_min: f64,
    lambda_max_w: f64,
    f: f64,
) -> Result<f64> {
    if !(alpha > 0.4 && alpha < 0.5) {
        return Err(Error::domain(format!("alpha must lie in (2/5, 1/2), got {alpha}")));
    }
    if !(f > 0.0) {
        return Err(Error::invalid("f must be positive"));
    }
    if n == 0 || p == 0 {
        return Err(Error::invalid("n and p must be at least 1"));
    }
    let (nf, pf, sf) = (n as f64, p as f64, s as f64);
    let m = [
        nf.cbrt(),
        nf.powf(2.0 * alpha) / (lambda_max_w * lambda_max_w),
        nf.powf(1.0 - 2.0 * alpha) * lambda_min * lambda_min,
        nf.powf(1.0 - 2.0 * alpha) * sf / (pf * pf),
    ]
    .into_iter()
    .fold(f64::INFINITY, f64::min);
    Ok(pf * pf * (-f * m).exp())
}

/// `4 (1/2 + 2M)² λ_n² s / κ`.
pub fn prediction_error_bound(lambda_n: f64, s: usize, kappa: f64, m_bound: f64) -> Result<f64> {
    if !(kappa > 0.0) {
        return Err(Error::domain(format!("kappa must be positive, got {kappa}")));
    }
    Ok(4.0 * (0.5 + 2.0 * m_bound).powi(2) * lambda_n * lambda_n * s as f64 / kappa)
}

/// `‖a‖²_A = a' A a`.
pub fn quadratic_norm(a: &[f64], m: &DMatrix<f64>) -> f64 {
    let v = DVector::from_column_slice(a);
    v.dot(&(m * &v))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransferRange {
    pub rho: f64,
    pub min_modulus: f64,
    pub max_modulus: f64,
}

impl TransferRange {
    pub fn within(&self, l: f64, big_l: f64) -> bool {
        l <= self.min_modulus && self.max_modulus <= big_l
    }
}

/// Range of `|ψ(z)| = 1/|1 − Σ φ_j z^j|` on the circle `|z| = ρ`. Since ψ is
/// analytic and zero-free inside the nearest AR root, the extremes over the
/// disc `|z| ≤ ρ` are attained on this circle.
pub fn transfer_modulus_range(coefficients: &[f64], rho: f64, grid_points: usize) -> Result<TransferRange> {
    if !(rho > 0.0) || grid_points == 0 {
        return Err(Error::invalid("need rho > 0 and at least one grid point"));
    }
    let c = check_causality(coefficients)?;
    if rho >= 1.0 + c.margin {
        return Err(Error::domain(format!(
            "rho = {rho} reaches the nearest AR root at modulus {}",
            1.0 + c.margin
        )));
    }
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for k in 0..grid_points {
        let theta = 2.0 * std::f64::consts::PI * k as f64 / grid_points as f64;
        let (mut re, mut im) = (1.0, 0.0);
        for (j, phi) in coefficients.iter().enumerate() {
            let ang = theta * (j + 1) as f64;
            let r = rho.powi(j as i32 + 1);
            re -= phi * r * ang.cos();
            im -= phi * r * ang.sin();
        }
        let modulus = 1.0 / re.hypot(im);
        lo = lo.min(modulus);
        hi = hi.max(modulus);
    }
    Ok(TransferRange {
        rho,
        min_modulus: lo,
        max_modulus: hi,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Status {
    #[serde(rename = "PASS")]
    Pass,
    #[serde(rename = "FAIL")]
    Fail,
    #[serde(rename = "VACUOUS")]
    Vacuous,
    #[serde(rename = "N-A")]
    NotApplicable,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Vacuous => "VACUOUS",
            Status::NotApplicable => "N-A",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionRow {
    pub name: String,
    pub value: Option<f64>,
    pub status: Status,
}

/// `(ρ, l, L)` describing a family the model is assumed to belong to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Family {
    pub rho: f64,
    pub l: f64,
    #[serde(rename = "L")]
    pub big_l: f64,
}

/// Everything the theory module can say about one `(model, n, penalty)` instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub n: usize,
    pub p: usize,
    pub lambda_n: f64,
    pub sign: SignConditionReport,
    pub estimation_rate: f64,
    pub kappa_p: f64,
    pub prediction_bound: f64,
    pub true_prediction_norm: f64,
    pub constants: Option<PredictionConstants>,
    pub transfer: Option<TransferRange>,
    pub pi_bound: Option<f64>,
    pub rows: Vec<ConditionRow>,
}

/// Assemble the condition table for `check`.
///
/// Finite-sample statuses: the limit conditions are scored by their natural
/// unit thresholds (ratio ≤ 1, signal-to-bias value < 1, growth term > 1).
/// The probability bound uses `y = 2σ²(n + D n^{3/5})` and
/// `c = y / (n λ_n λ_max)`.
pub fn condition_report(
    model: &ArModel,
    n: usize,
    penalty: &PenaltyConfig,
    family: Option<Family>,
) -> Result<ConditionReport> {
    let p = penalty.p();
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    let sigma = model.noise_sd();
    let acov = autocovariance(model, p - 1, 1e-12 * sigma * sigma)?;
    let gamma_p = toeplitz_gamma(&acov, p)?;
    let phi_star = model.padded_coefficients(p);
    if model.coefficients()[p.min(model.order())..].iter().any(|c| *c != 0.0) {
        return Err(Error::invalid(format!(
            "model has nonzero coefficients beyond lag p = {p}"
        )));
    }
    let sign = sign_conditions(&gamma_p, &phi_star, penalty, n)?;
    let w = penalty.weights();
    let lam = penalty.lambda_n();
    let s_norm = phi_star
        .iter()
        .zip(w)
        .filter(|(c, _)| **c != 0.0)
        .map(|(_, w)| w * w)
        .sum::<f64>()
        .sqrt();
    let rate = estimation_rate(n, p, lam, s_norm)?;
    let kappa = kappa_p(&gamma_p, 1e-10)?;
    let m_bound = w.iter().copied().fold(0.0, f64::max);
    let lambda_min = w.iter().copied().fold(f64::INFINITY, f64::min);
    let pred = if kappa > 0.0 {
        prediction_error_bound(lam, sign.s, kappa, m_bound)?
    } else {
        f64::INFINITY
    };
    let true_norm = quadratic_norm(&phi_star, &gamma_p);

    let mut rows = Vec::new();
    let mut row = |name: &str, value: Option<f64>, status: Status| {
        rows.push(ConditionRow {
            name: name.to_string(),
            value,
            status,
        })
    };
    let na_or = |v: Option<f64>, pass: &dyn Fn(f64) -> bool| match v {
        None => Status::NotApplicable,
        Some(x) if pass(x) => Status::Pass,
        Some(_) => Status::Fail,
    };
    row("T1(i) ||Gamma_SS^-1||_2", sign.c_max, na_or(sign.c_max, &|x| x.is_finite()));
    row("T1(i) ||Gamma_SS^-1||_inf", sign.c_max_inf, na_or(sign.c_max_inf, &|x| x.is_finite()));
    row("T1(ii) incoherence", sign.incoherence, na_or(sign.incoherence, &|x| x < 1.0));
    row("T1 weight ratio <= 1", sign.cond1_ratio, na_or(sign.cond1_ratio, &|x| x <= 1.0));
    row("T1 signal-to-bias < 1", sign.cond2_value, na_or(sign.cond2_value, &|x| x < 1.0));
    row("T1 penalty growth > 1", sign.cond3_value, na_or(sign.cond3_value, &|x| x > 1.0));
    row("T3(i) M = max weight", Some(m_bound), Status::Pass);
    row("T3(ii) kappa_p > 0", Some(kappa), if kappa > 0.0 { Status::Pass } else { Status::Fail });
    row(
        "T3 prediction bound vs ||phi*||_Gamma^2",
        Some(pred),
        if pred < true_norm {
            Status::Pass
        } else {
            Status::Vacuous
        },
    );

    let mut constants = None;
    let mut transfer = None;
    let mut pi = None;
    match family {
        None => {
            row("T3 H_rho(l, L) membership", None, Status::NotApplicable);
            row("T3 rate lambda (s/p)^1/2 <= D n^-2/5", None, Status::NotApplicable);
            row("T3 pi_n bound", None, Status::NotApplicable);
        }
        Some(fam) => {
            let consts = PredictionConstants::new(fam.rho, fam.l, fam.big_l, m_bound.max(f64::MIN_POSITIVE), kappa)?;
            match transfer_modulus_range(model.coefficients(), fam.rho, 10_000) {
                Ok(tr) => {
                    let ok = tr.within(fam.l, fam.big_l);
                    row(
                        "T3 H_rho(l, L) membership",
                        Some(tr.min_modulus),
                        if ok { Status::Pass } else { Status::Fail },
                    );
                    transfer = Some(tr);
                }
                Err(_) => row("T3 H_rho(l, L) membership", None, Status::Fail),
            }
            let lhs = lam * (sign.s as f64 / p as f64).sqrt();
            row(
                "T3 rate lambda (s/p)^1/2 <= D n^-2/5",
                Some(lhs),
                if consts.rate_condition_holds(n, p, sign.s, lam) {
                    Status::Pass
                } else {
                    Status::Fail
                },
            );
            let y = 2.0 * consts.y_threshold(n, sigma);
            let denom = n as f64 * lam * m_bound;
            let c = if denom > 0.0 { y / denom } else { 1.0 };
            let v = pi_bound(n, p, sign.s, lam, lambda_min, m_bound, sigma, c, y, &consts)?;
            row(
                "T3 pi_n bound",
                Some(v),
                if is_vacuous(v) {
                    Status::Vacuous
                } else {
                    Status::Pass
                },
            );
            pi = Some(v);
            constants = Some(consts);
        }
    }

    Ok(ConditionReport {
        n,
        p,
        lambda_n: lam,
        sign,
        estimation_rate: rate,
        kappa_p: kappa,
        prediction_bound: pred,
        true_prediction_norm: true_norm,
        constants,
        transfer,
        pi_bound: pi,
        rows,
    })
}
