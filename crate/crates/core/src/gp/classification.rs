//! Variational GP classification with a probit likelihood.
//!
//! The Gaussian posterior q(f) = N(μ, Σ) is held through diagonal site
//! parameters: Σ⁻¹ = K⁻¹ + diag(λ) and Σ⁻¹μ = ν. The ELBO optimum has
//! exactly this form, and every quantity below is computed from
//! B = I + Λ^½ K Λ^½ (eigenvalues ≥ 1), so K is never inverted and
//! low-rank string kernels are handled without special cases.
//!
//! Each step moves the sites toward the local Gaussian fit of the expected
//! log-likelihood (a natural-gradient step of size ρ). A step is kept only
//! if the ELBO increases; otherwise ρ is halved.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use super::probit::{expected_log_probit, norm_cdf};
use crate::error::{Error, Result};
use crate::linalg::{chol_logdet, cholesky_with_jitter};

/// Relative prior scales tried by [`fit_classifier`], applied to the kernel
/// after dividing it by its mean diagonal.
pub const SCALE_GRID: [f64; 9] = [0.01, 0.0316, 0.1, 0.316, 1.0, 3.16, 10.0, 31.6, 100.0];

const MAX_ITER: usize = 1000;
const MIN_STEP: f64 = 1.0 / 1024.0;

#[derive(Debug, Clone)]
pub struct GpClassifier {
    /// Prior covariance is `signal_scale * K`.
    pub signal_scale: f64,
    pub mu: DVector<f64>,
    /// Lower-triangular factor of Σ.
    pub sigma_factor: DMatrix<f64>,
    /// Absolute jitter needed to factor Σ.
    pub jitter: f64,
    pub elbo_trace: Vec<f64>,
    sqrt_lambda: DVector<f64>,
    chol_b: Cholesky<f64, Dyn>,
    /// K_p⁻¹ μ, computed without inverting K_p.
    weights: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationSummary {
    pub objective: f64,
    pub signal_scale: f64,
    pub jitter: f64,
    pub iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub held_out_lpd: Option<f64>,
}

/// Maps {0,1} (as false/true) to {−1,+1}.
pub fn signed_labels(labels: &[bool]) -> Vec<f64> {
    labels.iter().map(|&l| if l { 1.0 } else { -1.0 }).collect()
}

/// Σ_i E_q[log Φ(y_i f_i)] over the marginals N(μ_i, v_i).
pub fn expected_log_lik(y: &[f64], mu: &[f64], var: &[f64]) -> f64 {
    y.iter()
        .zip(mu)
        .zip(var)
        .map(|((&yi, &m), &v)| expected_log_probit(yi, m, v).0)
        .sum()
}

fn check_signs(y: &[f64]) -> Result<()> {
    if y.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(Error::InvalidData("classification labels must be -1 or +1".into()));
    }
    Ok(())
}

/// ELBO of q = N(μ, Σ) under the prior N(0, K) and probit likelihood, with
/// the KL term evaluated from Cholesky factors of K and Σ.
pub fn elbo(k: &DMatrix<f64>, y: &[f64], mu: &[f64], sigma: &DMatrix<f64>) -> Result<f64> {
    let n = y.len();
    if k.shape() != (n, n) || sigma.shape() != (n, n) || mu.len() != n {
        return Err(Error::Dimension("ELBO inputs disagree in size".into()));
    }
    check_signs(y)?;
    let (lk, _) = cholesky_with_jitter(k)?;
    let (ls, _) = cholesky_with_jitter(sigma)
        .map_err(|_| Error::Numerical("variational covariance is not PSD".into()))?;
    let muv = DVector::from_column_slice(mu);
    let trace = lk.solve(sigma).trace();
    let maha = muv.dot(&lk.solve(&muv));
    let kl = 0.5 * (trace + maha - n as f64 + chol_logdet(&lk) - chol_logdet(&ls));
    let var: Vec<f64> = sigma.diagonal().iter().copied().collect();
    Ok(expected_log_lik(y, mu, &var) - kl)
}

/// Posterior implied by the sites, and its ELBO.
struct State {
    lambda: DVector<f64>,
    nu: DVector<f64>,
    sqrt_lambda: DVector<f64>,
    chol_b: Cholesky<f64, Dyn>,
    mu: DVector<f64>,
    var: DVector<f64>,
    weights: DVector<f64>,
    elbo: f64,
}

fn state(kp: &DMatrix<f64>, y: &[f64], lambda: DVector<f64>, nu: DVector<f64>) -> Result<State> {
    let n = y.len();
    let sqrt_lambda = lambda.map(|l| l.max(0.0).sqrt());
    let skp = DMatrix::from_fn(n, n, |i, j| sqrt_lambda[i] * kp[(i, j)]);
    let mut b = DMatrix::from_fn(n, n, |i, j| skp[(i, j)] * sqrt_lambda[j]);
    for i in 0..n {
        b[(i, i)] += 1.0;
    }
    let chol_b = Cholesky::new(b)
        .ok_or_else(|| Error::Numerical("I + Λ^½KΛ^½ is not positive definite".into()))?;
    // Σ = K − (SK)ᵀ B⁻¹ (SK)
    let v = chol_b
        .l()
        .solve_lower_triangular(&skp)
        .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
    let var = DVector::from_fn(n, |i, _| kp[(i, i)] - v.column(i).norm_squared());
    let kp_nu = kp * &nu;
    let s_kp_nu = sqrt_lambda.component_mul(&kp_nu);
    let b_solve = chol_b.solve(&s_kp_nu);
    let weights = &nu - sqrt_lambda.component_mul(&b_solve);
    let mu = kp * &weights;
    // KL = ½(tr B⁻¹ + μᵀK⁻¹μ − n + log|B|)
    let b_inv_trace = chol_b.inverse().trace();
    let kl = 0.5 * (b_inv_trace + mu.dot(&weights) - n as f64 + chol_logdet(&chol_b));
    let ell = expected_log_lik(y, mu.as_slice(), var.as_slice());
    Ok(State {
        lambda,
        nu,
        sqrt_lambda,
        chol_b,
        mu,
        var,
        weights,
        elbo: ell - kl,
    })
}

fn full_sigma(kp: &DMatrix<f64>, s: &State) -> Result<DMatrix<f64>> {
    let n = kp.nrows();
    let skp = DMatrix::from_fn(n, n, |i, j| s.sqrt_lambda[i] * kp[(i, j)]);
    let v = s
        .chol_b
        .l()
        .solve_lower_triangular(&skp)
        .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
    let sigma = kp - v.transpose() * v;
    Ok((&sigma + sigma.transpose()) * 0.5)
}

fn check_inputs(k: &DMatrix<f64>, labels: &[bool]) -> Result<()> {
    if !k.is_square() || k.nrows() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} labels for a {}x{} kernel",
            labels.len(),
            k.nrows(),
            k.ncols()
        )));
    }
    if labels.len() < 2 {
        return Err(Error::InvalidData("GP classification needs at least 2 training points".into()));
    }
    Ok(())
}

/// Fits q(f) for the prior `N(0, signal_scale * K)`.
pub fn fit_classifier_with_scale(k: &DMatrix<f64>, labels: &[bool], signal_scale: f64) -> Result<GpClassifier> {
    check_inputs(k, labels)?;
    if !(signal_scale > 0.0) {
        return Err(Error::Config(format!("signal scale must be positive, got {signal_scale}")));
    }
    let n = labels.len();
    let y = signed_labels(labels);
    let kp = k * signal_scale;
    let mut cur = state(&kp, &y, DVector::zeros(n), DVector::zeros(n))?;
    if !cur.elbo.is_finite() {
        return Err(Error::Numerical("ELBO is not finite at the prior".into()));
    }
    let mut trace = vec![cur.elbo];
    let mut rho = 1.0;
    for _ in 0..MAX_ITER {
        let mut lam_t = DVector::zeros(n);
        let mut nu_t = DVector::zeros(n);
        for i in 0..n {
            let (_, g, h) = expected_log_probit(y[i], cur.mu[i], cur.var[i]);
            lam_t[i] = (-h).max(0.0);
            nu_t[i] = g + lam_t[i] * cur.mu[i];
        }
        let mut accepted = None;
        while rho >= MIN_STEP {
            let lam = &cur.lambda * (1.0 - rho) + &lam_t * rho;
            let nu = &cur.nu * (1.0 - rho) + &nu_t * rho;
            match state(&kp, &y, lam, nu) {
                Ok(s) if s.elbo.is_finite() && s.elbo > cur.elbo => {
                    accepted = Some(s);
                    break;
                }
                _ => rho *= 0.5,
            }
        }
        let Some(next) = accepted else { break };
        let gain = next.elbo - cur.elbo;
        cur = next;
        trace.push(cur.elbo);
        rho = (2.0 * rho).min(1.0);
        if gain < 1e-10 * (1.0 + cur.elbo.abs()) {
            break;
        }
    }
    let sigma = full_sigma(&kp, &cur)?;
    let (chol_s, jitter) = cholesky_with_jitter(&sigma)?;
    Ok(GpClassifier {
        signal_scale,
        mu: cur.mu,
        sigma_factor: chol_s.l(),
        jitter,
        elbo_trace: trace,
        sqrt_lambda: cur.sqrt_lambda,
        chol_b: cur.chol_b,
        weights: cur.weights,
    })
}

/// Fits the classifier, choosing the prior scale from [`SCALE_GRID`]
/// (relative to the kernel's mean diagonal) by final ELBO.
pub fn fit_classifier(k: &DMatrix<f64>, labels: &[bool]) -> Result<GpClassifier> {
    check_inputs(k, labels)?;
    let mean_diag = k.trace() / k.nrows() as f64;
    if !(mean_diag > 0.0 && mean_diag.is_finite()) {
        return Err(Error::InvalidData("kernel has no positive diagonal mass".into()));
    }
    let mut best: Option<GpClassifier> = None;
    for rel in SCALE_GRID {
        if let Ok(m) = fit_classifier_with_scale(k, labels, rel / mean_diag) {
            if best.as_ref().is_none_or(|b| m.elbo() > b.elbo()) {
                best = Some(m);
            }
        }
    }
    best.ok_or_else(|| Error::Numerical("no finite ELBO at any prior scale".into()))
}

impl GpClassifier {
    pub fn elbo(&self) -> f64 {
        *self.elbo_trace.last().expect("trace starts with the prior ELBO")
    }

    pub fn n_train(&self) -> usize {
        self.mu.len()
    }

    pub fn sigma(&self) -> DMatrix<f64> {
        &self.sigma_factor * self.sigma_factor.transpose()
    }

    /// Latent predictive mean and variance per test point.
    pub fn predict_latent(&self, k_cross: &DMatrix<f64>, k_test_diag: &[f64]) -> Result<Vec<(f64, f64)>> {
        if k_cross.ncols() != self.n_train() || k_cross.nrows() != k_test_diag.len() {
            return Err(Error::Dimension(format!(
                "cross kernel {}x{} against {} training and {} test points",
                k_cross.nrows(),
                k_cross.ncols(),
                self.n_train(),
                k_test_diag.len()
            )));
        }
        let kc = k_cross * self.signal_scale;
        let mean = &kc * &self.weights;
        let skc = DMatrix::from_fn(self.n_train(), kc.nrows(), |i, t| self.sqrt_lambda[i] * kc[(t, i)]);
        let v = self
            .chol_b
            .l()
            .solve_lower_triangular(&skc)
            .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
        Ok((0..k_test_diag.len())
            .map(|t| {
                let var = self.signal_scale * k_test_diag[t] - v.column(t).norm_squared();
                (mean[t], var.max(0.0))
            })
            .collect())
    }

    /// P(y = 1) per test point.
    pub fn predict_proba(&self, k_cross: &DMatrix<f64>, k_test_diag: &[f64]) -> Result<Vec<f64>> {
        Ok(self
            .predict_latent(k_cross, k_test_diag)?
            .into_iter()
            .map(|(m, v)| probit_predictive(m, v))
            .collect())
    }

    pub fn summary(&self, held_out_lpd: Option<f64>) -> ClassificationSummary {
        ClassificationSummary {
            objective: self.elbo(),
            signal_scale: self.signal_scale,
            jitter: self.jitter,
            iterations: self.elbo_trace.len() - 1,
            held_out_lpd,
        }
    }
}

/// Φ(m / √(1 + v)): the exact probit predictive for f ~ N(m, v).
pub fn probit_predictive(m: f64, v: f64) -> f64 {
    norm_cdf(m / (1.0 + v).sqrt())
}

pub fn predict_proba(model: &GpClassifier, k_cross: &DMatrix<f64>, k_test_diag: &[f64]) -> Result<Vec<f64>> {
    model.predict_proba(k_cross, k_test_diag)
}

/// Mean log probability assigned to the observed test labels.
pub fn lpd_classification(probs: &[f64], labels: &[bool]) -> Result<f64> {
    if probs.len() != labels.len() || probs.is_empty() {
        return Err(Error::Dimension("probabilities and labels differ in length".into()));
    }
    let total: f64 = probs
        .iter()
        .zip(labels)
        .map(|(&p, &l)| if l { p.ln() } else { (1.0 - p).ln() })
        .sum();
    Ok(total / probs.len() as f64)
}
