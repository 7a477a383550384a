use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{chol_logdet, cholesky_with_jitter};

/// Search box for both hyperparameters.
pub const HYPER_MIN: f64 = 1e-6;
pub const HYPER_MAX: f64 = 1e6;
/// Points per axis of the coarse log grid.
pub const GRID_POINTS: usize = 9;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Exact GP regression on a precomputed kernel with covariance
/// `s² K + τ² I`.
#[derive(Debug, Clone)]
pub struct GpRegressor {
    pub noise_var: f64,
    pub signal_scale: f64,
    /// Absolute diagonal jitter that was needed to factor the covariance.
    pub jitter: f64,
    pub lml: f64,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionSummary {
    pub objective: f64,
    pub noise_var: f64,
    pub signal_scale: f64,
    pub jitter: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub held_out_lpd: Option<f64>,
}

struct Factored {
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    jitter: f64,
    lml: f64,
}

fn check_inputs(k: &DMatrix<f64>, y: &[f64]) -> Result<()> {
    if !k.is_square() || k.nrows() != y.len() {
        return Err(Error::Dimension(format!(
            "{} targets for a {}x{} kernel",
            y.len(),
            k.nrows(),
            k.ncols()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidData("non-finite regression target".into()));
    }
    if k.diagonal().iter().any(|&d| !(d >= 0.0)) {
        return Err(Error::InvalidData("kernel has a negative or non-finite diagonal entry".into()));
    }
    Ok(())
}

fn factor(k: &DMatrix<f64>, y: &DVector<f64>, tau2: f64, s2: f64) -> Result<Factored> {
    if !(tau2 > 0.0 && s2 > 0.0) {
        return Err(Error::Config(format!("need τ² > 0 and s² > 0, got {tau2} and {s2}")));
    }
    let n = y.len();
    let mut m = k * s2;
    for i in 0..n {
        m[(i, i)] += tau2;
    }
    let (chol, jitter) = cholesky_with_jitter(&m)?;
    let alpha = chol.solve(y);
    let lml = -0.5 * y.dot(&alpha) - 0.5 * chol_logdet(&chol) - 0.5 * n as f64 * LN_2PI;
    Ok(Factored {
        chol,
        alpha,
        jitter,
        lml,
    })
}

/// Log marginal likelihood of `y` under `N(0, s² K + τ² I)`.
pub fn lml(k: &DMatrix<f64>, y: &[f64], tau2: f64, s2: f64) -> Result<f64> {
    check_inputs(k, y)?;
    Ok(factor(k, &DVector::from_column_slice(y), tau2, s2)?.lml)
}

/// Log marginal likelihood and its gradient with respect to
/// `(log τ², log s²)`.
pub fn lml_with_grad(k: &DMatrix<f64>, y: &[f64], tau2: f64, s2: f64) -> Result<(f64, [f64; 2])> {
    check_inputs(k, y)?;
    let f = factor(k, &DVector::from_column_slice(y), tau2, s2)?;
    Ok((f.lml, gradient(k, &f, tau2, s2)))
}

// ½ tr((ααᵀ − M⁻¹) dM) with dM = τ² I and dM = s² K.
fn gradient(k: &DMatrix<f64>, f: &Factored, tau2: f64, s2: f64) -> [f64; 2] {
    let minv = f.chol.inverse();
    let ka = k * &f.alpha;
    let d_tau = 0.5 * tau2 * (f.alpha.norm_squared() - minv.trace());
    let d_s = 0.5 * s2 * (f.alpha.dot(&ka) - minv.component_mul(k).sum());
    [d_tau, d_s]
}

fn log_grid() -> Vec<f64> {
    let (lo, hi) = (HYPER_MIN.ln(), HYPER_MAX.ln());
    (0..GRID_POINTS)
        .map(|i| lo + (hi - lo) * i as f64 / (GRID_POINTS - 1) as f64)
        .collect()
}

/// Fits `(τ², s²)` by maximizing the log marginal likelihood: a 9×9 log
/// grid over the search box, then gradient ascent with backtracking from
/// the best grid point.
pub fn fit_regression(k: &DMatrix<f64>, y: &[f64]) -> Result<GpRegressor> {
    check_inputs(k, y)?;
    if y.len() < 2 {
        return Err(Error::InvalidData("GP regression needs at least 2 training points".into()));
    }
    let yv = DVector::from_column_slice(y);
    let eval = |p: [f64; 2]| -> Option<Factored> {
        factor(k, &yv, p[0].exp(), p[1].exp())
            .ok()
            .filter(|f| f.lml.is_finite())
    };

    let grid = log_grid();
    let mut best: Option<([f64; 2], Factored)> = None;
    for &lt in &grid {
        for &ls in &grid {
            if let Some(f) = eval([lt, ls]) {
                if best.as_ref().is_none_or(|(_, b)| f.lml > b.lml) {
                    best = Some(([lt, ls], f));
                }
            }
        }
    }
    let (mut p, mut cur) = best.ok_or_else(|| {
        Error::Numerical("log marginal likelihood non-finite at every grid point".into())
    })?;

    let (lo, hi) = (HYPER_MIN.ln(), HYPER_MAX.ln());
    let mut step = 1.0;
    for _ in 0..500 {
        let g = gradient(k, &cur, p[0].exp(), p[1].exp());
        // drop components pushing against an active bound
        let g = [0, 1].map(|i| {
            if (p[i] <= lo && g[i] < 0.0) || (p[i] >= hi && g[i] > 0.0) {
                0.0
            } else {
                g[i]
            }
        });
        let gnorm = g[0].hypot(g[1]);
        if gnorm < 1e-9 {
            break;
        }
        let dir = [g[0] / gnorm, g[1] / gnorm];
        let mut accepted = None;
        let mut t = step;
        while t > 1e-10 {
            let q = [0, 1].map(|i| (p[i] + t * dir[i]).clamp(lo, hi));
            if let Some(f) = eval(q) {
                if f.lml > cur.lml {
                    accepted = Some((q, f, t));
                    break;
                }
            }
            t *= 0.5;
        }
        match accepted {
            Some((q, f, t)) => {
                let gain = f.lml - cur.lml;
                p = q;
                cur = f;
                step = (2.0 * t).min(4.0);
                if gain < 1e-12 * (1.0 + cur.lml.abs()) {
                    break;
                }
            }
            None => break,
        }
    }

    Ok(GpRegressor {
        noise_var: p[0].exp(),
        signal_scale: p[1].exp(),
        jitter: cur.jitter,
        lml: cur.lml,
        chol: cur.chol,
        alpha: cur.alpha,
    })
}

impl GpRegressor {
    /// Model with fixed hyperparameters.
    pub fn with_hyperparameters(k: &DMatrix<f64>, y: &[f64], tau2: f64, s2: f64) -> Result<Self> {
        check_inputs(k, y)?;
        let f = factor(k, &DVector::from_column_slice(y), tau2, s2)?;
        Ok(GpRegressor {
            noise_var: tau2,
            signal_scale: s2,
            jitter: f.jitter,
            lml: f.lml,
            chol: f.chol,
            alpha: f.alpha,
        })
    }

    pub fn n_train(&self) -> usize {
        self.alpha.len()
    }

    /// Predictive mean and variance (noise included) per test point.
    pub fn predict(&self, k_cross: &DMatrix<f64>, k_test_diag: &[f64]) -> Result<Vec<(f64, f64)>> {
        if k_cross.ncols() != self.n_train() || k_cross.nrows() != k_test_diag.len() {
            return Err(Error::Dimension(format!(
                "cross kernel {}x{} against {} training and {} test points",
                k_cross.nrows(),
                k_cross.ncols(),
                self.n_train(),
                k_test_diag.len()
            )));
        }
        let s2 = self.signal_scale;
        let kc = k_cross * s2;
        let mean = &kc * &self.alpha;
        let v = self.chol.l().solve_lower_triangular(&kc.transpose()).ok_or_else(|| {
            Error::Numerical("triangular solve failed".into())
        })?;
        Ok((0..k_test_diag.len())
            .map(|i| {
                let quad = v.column(i).norm_squared();
                (mean[i], s2 * k_test_diag[i] - quad + self.noise_var)
            })
            .collect())
    }

    /// Mean log predictive density of `y_test`.
    pub fn lpd(&self, k_cross: &DMatrix<f64>, k_test_diag: &[f64], y_test: &[f64]) -> Result<f64> {
        if y_test.len() != k_test_diag.len() {
            return Err(Error::Dimension("test targets and kernel differ in length".into()));
        }
        let preds = self.predict(k_cross, k_test_diag)?;
        gaussian_lpd(&preds, y_test)
    }

    pub fn summary(&self, held_out_lpd: Option<f64>) -> RegressionSummary {
        RegressionSummary {
            objective: self.lml,
            noise_var: self.noise_var,
            signal_scale: self.signal_scale,
            jitter: self.jitter,
            held_out_lpd,
        }
    }
}

/// Mean of `log N(y_i | mean_i, var_i)`.
pub fn gaussian_lpd(preds: &[(f64, f64)], y: &[f64]) -> Result<f64> {
    if preds.is_empty() {
        return Err(Error::InvalidData("no test points".into()));
    }
    let mut total = 0.0;
    for (&(m, v), &yi) in preds.iter().zip(y) {
        if !(v > 0.0) {
            return Err(Error::Numerical(format!("predictive variance {v} is not positive")));
        }
        total += -0.5 * (2.0 * PI * v).ln() - 0.5 * (yi - m).powi(2) / v;
    }
    Ok(total / preds.len() as f64)
}

pub fn predict_regression(
    model: &GpRegressor,
    k_cross: &DMatrix<f64>,
    k_test_diag: &[f64],
) -> Result<Vec<(f64, f64)>> {
    model.predict(k_cross, k_test_diag)
}

pub fn lpd_regression(
    model: &GpRegressor,
    k_cross: &DMatrix<f64>,
    k_test_diag: &[f64],
    y_test: &[f64],
) -> Result<f64> {
    model.lpd(k_cross, k_test_diag, y_test)
}
