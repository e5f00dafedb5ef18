#![allow(dead_code)]

use arlasso::{ArModel, LagDesign};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Step-up recursion from reflection coefficients; any |k| < 1 gives a causal model.
pub fn from_reflections(k: &[f64]) -> Vec<f64> {
    let mut a: Vec<f64> = Vec::new();
    for (m, &r) in k.iter().enumerate() {
        let prev = a.clone();
        for j in 0..m {
            a[j] = prev[j] - r * prev[m - 1 - j];
        }
        a.push(r);
    }
    a
}

pub fn random_causal(r: &mut impl Rng, order: usize, max_reflection: f64) -> Vec<f64> {
    let k: Vec<f64> = (0..order)
        .map(|_| r.random_range(-max_reflection..max_reflection))
        .collect();
    from_reflections(&k)
}

pub fn random_model(r: &mut impl Rng, order: usize) -> ArModel {
    let phi = random_causal(r, order, 0.8);
    let sigma = r.random_range(0.2..2.0);
    ArModel::new(phi, sigma).unwrap()
}

pub fn gaussian_design(r: &mut impl Rng, n: usize, p: usize, truth: &[f64], noise: f64) -> LagDesign {
    let x = DMatrix::from_fn(n, p, |_, _| normal(r));
    let beta = DVector::from_column_slice(truth);
    let y = &x * beta + DVector::from_fn(n, |_, _| noise * normal(r));
    LagDesign::from_parts(y, x).unwrap()
}

pub fn normal(r: &mut impl Rng) -> f64 {
    // Box-Muller
    let u1: f64 = r.random_range(f64::EPSILON..1.0);
    let u2: f64 = r.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Objective evaluated with plain loops, independent of the library.
pub fn objective_loops(phi: &[f64], d: &LagDesign, lambda: f64, w: &[f64]) -> f64 {
    let (n, p) = (d.n(), d.p());
    let mut rss = 0.0;
    for t in 0..n {
        let mut pred = 0.0;
        for j in 0..p {
            pred += d.x()[(t, j)] * phi[j];
        }
        rss += (d.y()[t] - pred).powi(2);
    }
    let mut pen = 0.0;
    for j in 0..p {
        pen += w[j] * phi[j].abs();
    }
    rss / (2.0 * n as f64) + lambda * pen
}

/// Largest eigenvalue of a symmetric PD matrix by plain power iteration.
pub fn power_max_eig(m: &DMatrix<f64>) -> f64 {
    let p = m.nrows();
    let mut v = DVector::from_element(p, 1.0 / (p as f64).sqrt());
    let mut lam = 0.0;
    for _ in 0..200_000 {
        let w = m * &v;
        let next = v.dot(&w);
        v = &w / w.norm();
        if (next - lam).abs() < 1e-15 * next.abs() {
            return next;
        }
        lam = next;
    }
    lam
}
