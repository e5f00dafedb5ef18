//! Causal AR(p) models: stability checks, MA(∞) expansion, autocovariances
//! and seeded Gaussian simulation.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Longest ψ expansion we are willing to build when truncating a series.
const MAX_TRUNCATION: usize = 20_000_000;

/// A causal autoregressive model `X_t = φ_1 X_{t-1} + … + φ_p X_{t-p} + Z_t`
/// driven by i.i.d. Gaussian innovations with standard deviation `σ`.
///
/// Construction fails unless the AR polynomial has all of its roots strictly
/// outside the closed unit disc.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelFile", into = "ModelFile")]
pub struct ArModel {
    coefficients: Vec<f64>,
    noise_sd: f64,
    margin: f64,
}

/// On-disk shape of a model: `{"phi": [...], "sigma": s}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelFile {
    phi: Vec<f64>,
    sigma: f64,
}

impl TryFrom<ModelFile> for ArModel {
    type Error = Error;

    fn try_from(f: ModelFile) -> Result<Self> {
        ArModel::new(f.phi, f.sigma)
    }
}

impl From<ArModel> for ModelFile {
    fn from(m: ArModel) -> Self {
        ModelFile {
            phi: m.coefficients,
            sigma: m.noise_sd,
        }
    }
}

impl ArModel {
    pub fn new(coefficients: Vec<f64>, noise_sd: f64) -> Result<Self> {
        if !(noise_sd.is_finite() && noise_sd > 0.0) {
            return Err(Error::invalid(format!(
                "noise standard deviation must be positive and finite, got {noise_sd}"
            )));
        }
        let c = check_causality(&coefficients)?;
        if !c.causal {
            return Err(Error::domain(format!(
                "AR polynomial has a root inside or on the unit circle (smallest root modulus {:.6})",
                1.0 + c.margin
            )));
        }
        Ok(Self {
            coefficients,
            noise_sd,
            margin: c.margin,
        })
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn noise_sd(&self) -> f64 {
        self.noise_sd
    }

    pub fn order(&self) -> usize {
        self.coefficients.len()
    }

    /// Smallest root modulus of the AR polynomial minus one. Infinite for white noise.
    pub fn margin(&self) -> f64 {
        self.margin
    }

    /// Coefficient vector padded with zeros (or truncated) to length `p`.
    pub fn padded_coefficients(&self, p: usize) -> Vec<f64> {
        let mut v = vec![0.0; p];
        for (dst, src) in v.iter_mut().zip(&self.coefficients) {
            *dst = *src;
        }
        v
    }

    /// Lags (1-based) carrying a nonzero coefficient.
    pub fn support(&self) -> Vec<usize> {
        self.coefficients
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(j, _)| j + 1)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Causality {
    pub causal: bool,
    /// Smallest root modulus minus one; `+inf` when the polynomial is constant.
    pub margin: f64,
}

/// Index of the last nonzero coefficient plus one.
fn effective_order(phi: &[f64]) -> usize {
    phi.iter().rposition(|c| *c != 0.0).map_or(0, |i| i + 1)
}

/// Schur–Cohn stability test via the Levinson step-down recursion: the
/// polynomial `1 - Σ φ_j z^j` has no zeros in the closed unit disc iff every
/// reflection coefficient has modulus strictly below one.
pub fn schur_cohn_causal(phi: &[f64]) -> bool {
    let d = effective_order(phi);
    let mut a: Vec<f64> = phi[..d].to_vec();
    for m in (1..=d).rev() {
        let k = a[m - 1];
        if !(k.abs() < 1.0) {
            return false;
        }
        let denom = 1.0 - k * k;
        let prev: Vec<f64> = (1..m).map(|j| (a[j - 1] + k * a[m - j - 1]) / denom).collect();
        a = prev;
    }
    true
}

/// Decide causality and measure the distance of the nearest polynomial root
/// from the unit circle.
///
/// The boolean comes from the exact Schur–Cohn recursion. The root modulus
/// is found by bisection on the radius `r`, testing the rescaled polynomial
/// `1 - Σ φ_j r^j w^j` for stability on the unit disc.
pub fn check_causality(coefficients: &[f64]) -> Result<Causality> {
    if coefficients.is_empty() {
        return Err(Error::invalid("coefficient vector is empty"));
    }
    if coefficients.iter().any(|c| !c.is_finite()) {
        return Err(Error::invalid("coefficients must be finite"));
    }
    let causal = schur_cohn_causal(coefficients);
    let d = effective_order(coefficients);
    if d == 0 {
        return Ok(Causality {
            causal,
            margin: f64::INFINITY,
        });
    }
    Ok(Causality {
        causal,
        margin: smallest_root_modulus(&coefficients[..d]) - 1.0,
    })
}

fn smallest_root_modulus(phi: &[f64]) -> f64 {
    let d = phi.len();
    let max_abs = phi.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    // Cauchy bound on the reciprocal polynomial gives the lower bracket, the
    // product of root moduli (1/|φ_d|) the upper one.
    let mut lo = 0.5 / (1.0 + max_abs);
    let mut hi = phi[d - 1].abs().powf(-1.0 / d as f64) * 1.001;
    let scaled_stable = |r: f64| {
        let mut rk = 1.0;
        let s: Vec<f64> = phi
            .iter()
            .map(|c| {
                rk *= r;
                c * rk
            })
            .collect();
        schur_cohn_causal(&s)
    };
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi {
            break;
        }
        if scaled_stable(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Spectral radius of the AR companion matrix by power iteration.
///
/// Returns `None` when the norm ratio has not settled within `max_iter`
/// steps, which happens when the dominant eigenvalues form a complex pair
/// or when two of them have equal modulus.
pub fn companion_spectral_radius(phi: &[f64], max_iter: usize) -> Option<f64> {
    let d = effective_order(phi);
    if d == 0 {
        return Some(0.0);
    }
    let mut v: Vec<f64> = (0..d).map(|i| 1.0 / (1.0 + i as f64)).collect();
    let mut prev = f64::NAN;
    let mut settled = 0;
    for _ in 0..max_iter {
        let head: f64 = phi[..d].iter().zip(&v).map(|(a, b)| a * b).sum();
        let mut w = Vec::with_capacity(d);
        w.push(head);
        w.extend_from_slice(&v[..d - 1]);
        let norm_v = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let norm_w = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm_w == 0.0 {
            return Some(0.0);
        }
        let ratio = norm_w / norm_v;
        if (ratio - prev).abs() <= 1e-14 * ratio {
            settled += 1;
            if settled >= 20 {
                return Some(ratio);
            }
        } else {
            settled = 0;
        }
        prev = ratio;
        v = w.into_iter().map(|x| x / norm_w).collect();
    }
    None
}

/// Truncated MA(∞) expansion `X_t = Σ ψ_j Z_{t-j}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaExpansion {
    pub psi: Vec<f64>,
    pub truncation_order: usize,
    /// Estimate of `Σ_{j>K} |ψ_j|` from a geometric envelope of the ψ weights.
    pub tail_bound: f64,
}

/// Geometric envelope `|ψ_k| ≤ scale · rate^k` for a causal model.
///
/// The rate sits halfway (in modulus) between the unit circle and the
/// nearest AR root, which absorbs the polynomial factor that repeated
/// roots introduce. The scale is the largest observed ratio over a horizon
/// long enough for that factor to have peaked. `None` for white noise.
#[derive(Debug, Clone, Copy)]
struct Envelope {
    scale: f64,
    rate: f64,
}

fn envelope(model: &ArModel) -> Option<Envelope> {
    if !model.margin.is_finite() {
        return None;
    }
    let root = 1.0 + model.margin;
    let rate = 1.0 / (1.0 + 0.5 * model.margin);
    let shrink = (root * rate).ln();
    let p = model.order().max(1) as f64;
    let horizon = ((4.0 * p / shrink).ceil().max(4.0 * p) as usize).min(200_000);
    let psi = psi_recursion(model.coefficients(), horizon);
    let mut scale: f64 = 1.0;
    let mut inv = 1.0;
    for v in &psi {
        scale = scale.max(v.abs() * inv);
        inv /= rate;
        if !inv.is_finite() {
            break;
        }
    }
    Some(Envelope { scale, rate })
}

fn psi_recursion(phi: &[f64], k: usize) -> Vec<f64> {
    let mut psi = vec![0.0; k + 1];
    psi[0] = 1.0;
    for i in 1..=k {
        let top = i.min(phi.len());
        psi[i] = (1..=top).map(|j| phi[j - 1] * psi[i - j]).sum();
    }
    psi
}

/// ψ_0..ψ_K from `ψ_k = Σ_{j ≤ min(k,p)} φ_j ψ_{k-j}`.
pub fn ma_coefficients(model: &ArModel, k: usize) -> MaExpansion {
    let psi = psi_recursion(model.coefficients(), k);
    let tail_bound = match envelope(model) {
        None => 0.0,
        Some(e) => e.scale * e.rate.powi((k + 1) as i32) / (1.0 - e.rate),
    };
    MaExpansion {
        psi,
        truncation_order: k,
        tail_bound,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AutocovSequence {
    pub gamma: Vec<f64>,
}

impl AutocovSequence {
    pub fn max_lag(&self) -> usize {
        self.gamma.len() - 1
    }
}

/// γ(0..=K) from `γ(h) = σ² Σ_j ψ_j ψ_{j+h}`, truncating the ψ series once
/// the neglected tail contributes less than `tol` to every lag.
pub fn autocovariance(model: &ArModel, k: usize, tol: f64) -> Result<AutocovSequence> {
    if !(tol > 0.0) {
        return Err(Error::invalid("autocovariance tolerance must be positive"));
    }
    let s2 = model.noise_sd() * model.noise_sd();
    let terms = match envelope(model) {
        None => 0,
        Some(e) => {
            // σ² scale² Σ_{j>J} rate^{2j} ≤ tol
            let r2 = e.rate * e.rate;
            let lead = s2 * e.scale * e.scale / (1.0 - r2);
            if lead <= tol {
                0
            } else {
                let j = ((tol / lead).ln() / r2.ln()).ceil();
                if !(j.is_finite() && (j as usize) < MAX_TRUNCATION) {
                    return Err(Error::domain(format!(
                        "model too close to the unit circle (margin {:.3e}) to truncate the MA expansion",
                        model.margin()
                    )));
                }
                j as usize
            }
        }
    };
    let psi = psi_recursion(model.coefficients(), terms + k);
    let gamma = (0..=k)
        .map(|h| s2 * (0..=terms).map(|j| psi[j] * psi[j + h]).sum::<f64>())
        .collect();
    Ok(AutocovSequence { gamma })
}

/// The p×p symmetric Toeplitz matrix `(γ(|i−j|))`.
pub fn toeplitz_gamma(gamma: &AutocovSequence, p: usize) -> Result<DMatrix<f64>> {
    if p == 0 {
        return Err(Error::invalid("Toeplitz dimension must be at least 1"));
    }
    if p > gamma.gamma.len() {
        return Err(Error::invalid(format!(
            "need autocovariances up to lag {} for a {p}x{p} matrix, have {}",
            p - 1,
            gamma.max_lag()
        )));
    }
    Ok(DMatrix::from_fn(p, p, |i, j| gamma.gamma[i.abs_diff(j)]))
}

/// A realized series. `values` holds `p_presample` leading values followed
/// by the `n` observations.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: Vec<f64>,
    n: usize,
    p_presample: usize,
    seed: Option<u64>,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>, p_presample: usize, seed: Option<u64>) -> Result<Self> {
        if values.len() <= p_presample {
            return Err(Error::invalid(format!(
                "series of length {} leaves no observations after {p_presample} pre-sample values",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("series contains non-finite values"));
        }
        let n = values.len() - p_presample;
        Ok(Self {
            values,
            n,
            p_presample,
            seed,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The `n` observations, without pre-sample values.
    pub fn observations(&self) -> &[f64] {
        &self.values[self.p_presample..]
    }

    pub fn presample(&self) -> &[f64] {
        &self.values[..self.p_presample]
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p_presample(&self) -> usize {
        self.p_presample
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }
}

pub fn default_burn_in(p: usize) -> usize {
    10 * p + 1000
}

/// Run the AR recursion over a given innovation sequence starting from a zero state.
pub fn filter_innovations(coefficients: &[f64], innovations: &[f64]) -> Vec<f64> {
    let mut x = Vec::with_capacity(innovations.len());
    for (t, z) in innovations.iter().enumerate() {
        let ar: f64 = coefficients
            .iter()
            .enumerate()
            .take_while(|(j, _)| *j < t)
            .map(|(j, c)| c * x[t - 1 - j])
            .sum();
        x.push(ar + z);
    }
    x
}

/// Draw a Gaussian realization. The recursion starts from zeros, discards
/// `burn_in` values, and keeps the final `n + p_presample`.
pub fn simulate(
    model: &ArModel,
    n: usize,
    p_presample: usize,
    burn_in: usize,
    seed: u64,
) -> Result<TimeSeries> {
    if n == 0 {
        return Err(Error::invalid("series length n must be at least 1"));
    }
    let total = burn_in + n + p_presample;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, model.noise_sd())
        .map_err(|e| Error::invalid(format!("innovation distribution: {e}")))?;
    let innovations: Vec<f64> = (0..total).map(|_| normal.sample(&mut rng)).collect();
    let mut x = filter_innovations(model.coefficients(), &innovations);
    let values = x.split_off(burn_in);
    TimeSeries::new(values, p_presample, Some(seed))
}

/// Sample autocovariances `(1/n) Σ_t (x_t − x̄)(x_{t+h} − x̄)` for `h = 0..=max_lag`.
/// With `demean = false` the process mean is taken to be zero.
pub fn sample_autocovariance(x: &[f64], max_lag: usize, demean: bool) -> Vec<f64> {
    let n = x.len();
    let mean = if demean && n > 0 {
        x.iter().sum::<f64>() / n as f64
    } else {
        0.0
    };
    let c: Vec<f64> = x.iter().map(|v| v - mean).collect();
    (0..=max_lag)
        .map(|h| {
            if h >= n {
                0.0
            } else {
                c[..n - h].iter().zip(&c[h..]).map(|(a, b)| a * b).sum::<f64>() / n as f64
            }
        })
        .collect()
}
