//! Numerically stable probit pieces and Gauss–Hermite expectations.

use std::f64::consts::{PI, SQRT_2};
use std::sync::OnceLock;

use nalgebra::{DMatrix, SymmetricEigen};
use statrs::function::erf::erfc;

/// Number of Gauss–Hermite nodes.
pub const GH_NODES: usize = 32;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Standard normal CDF.
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// log Φ(z), accurate far into the lower tail.
pub fn log_norm_cdf(z: f64) -> f64 {
    if z > -30.0 {
        norm_cdf(z).ln()
    } else {
        // Φ(z) = φ(z)/(-z) * (1 - 1/z² + 3/z⁴ - 15/z⁶ + ...)
        let z2 = z * z;
        let series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2);
        -0.5 * z2 - LN_SQRT_2PI - (-z).ln() + series.ln()
    }
}

/// Inverse Mills ratio φ(z)/Φ(z).
pub fn mills_ratio(z: f64) -> f64 {
    (-0.5 * z * z - LN_SQRT_2PI - log_norm_cdf(z)).exp()
}

/// Physicists' Gauss–Hermite rule (weight e^{-x²}) via Golub–Welsch.
pub fn gauss_hermite() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GH_NODES;
        let jacobi = DMatrix::from_fn(n, n, |i, j| {
            if i.abs_diff(j) == 1 {
                (i.max(j) as f64 / 2.0).sqrt()
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(jacobi);
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|k| (eig.eigenvalues[k], PI.sqrt() * eig.eigenvectors[(0, k)].powi(2)))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        pairs.into_iter().unzip()
    })
}

/// E[h(f)] for f ~ N(m, v) by Gauss–Hermite quadrature.
pub fn gaussian_expectation(m: f64, v: f64, h: impl Fn(f64) -> f64) -> f64 {
    let (x, w) = gauss_hermite();
    let s = (2.0 * v.max(0.0)).sqrt();
    x.iter().zip(w).map(|(&xi, &wi)| wi * h(m + s * xi)).sum::<f64>() / PI.sqrt()
}

/// E[log Φ(y f)] for f ~ N(m, v), with its first and second derivatives in m.
pub(crate) fn expected_log_probit(y: f64, m: f64, v: f64) -> (f64, f64, f64) {
    let (x, w) = gauss_hermite();
    let s = (2.0 * v.max(0.0)).sqrt();
    let (mut e, mut g, mut h) = (0.0, 0.0, 0.0);
    for (&xi, &wi) in x.iter().zip(w) {
        let z = y * (m + s * xi);
        let r = mills_ratio(z);
        e += wi * log_norm_cdf(z);
        g += wi * y * r;
        h -= wi * r * (z + r);
    }
    let c = PI.sqrt();
    (e / c, g / c, h / c)
}
