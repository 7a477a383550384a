use rand::Rng;
use rand_distr::{Binomial, Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{digamma, ln_gamma};

use crate::bioio::OtuTable;
use crate::error::{Error, Result};

/// Concentration given to OTUs never observed in the fitting data.
pub const ALPHA_FLOOR: f64 = 1e-6;
pub const DMN_TOL: f64 = 1e-8;
pub const DMN_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmnParams {
    pub alpha: Vec<f64>,
    pub log_likelihood: f64,
    pub iterations: usize,
    /// False when the iteration cap was hit first; `alpha` is then the last
    /// (and best) iterate.
    pub converged: bool,
}

/// DMN log-likelihood of a count table, multinomial coefficients included.
pub fn dmn_log_likelihood(table: &OtuTable, alpha: &[f64]) -> f64 {
    let a: f64 = alpha.iter().sum();
    let lg_alpha: Vec<f64> = alpha.iter().map(|&x| ln_gamma(x)).collect();
    table
        .rows()
        .map(|row| {
            let n: u64 = row.iter().sum();
            let mut ll = ln_gamma(n as f64 + 1.0) + ln_gamma(a) - ln_gamma(n as f64 + a);
            for (j, &x) in row.iter().enumerate() {
                if x > 0 {
                    let x = x as f64;
                    ll += ln_gamma(x + alpha[j]) - lg_alpha[j] - ln_gamma(x + 1.0);
                }
            }
            ll
        })
        .sum()
}

/// Moment-matched starting point: mean proportions scaled by a precision
/// estimated from the spread of per-sample proportions.
fn moment_init(table: &OtuTable, observed: &[bool]) -> Vec<f64> {
    let n = table.n_samples() as f64;
    let p = table.n_otus();
    let props: Vec<Vec<f64>> = table
        .rows()
        .map(|r| {
            let t: u64 = r.iter().sum();
            r.iter().map(|&x| x as f64 / t.max(1) as f64).collect()
        })
        .collect();
    let mean: Vec<f64> = (0..p).map(|j| props.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let var: Vec<f64> = (0..p)
        .map(|j| props.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / (n - 1.0))
        .collect();
    let num: f64 = (0..p).map(|j| mean[j] * (1.0 - mean[j])).sum();
    let den: f64 = var.iter().sum();
    let precision = if den > 0.0 { (num / den - 1.0).clamp(1e-2, 1e6) } else { 1e6 };
    (0..p)
        .map(|j| if observed[j] { (precision * mean[j]).max(ALPHA_FLOOR) } else { ALPHA_FLOOR })
        .collect()
}

/// Maximum-likelihood DMN concentrations by the digamma fixed-point update
/// `α_j ← α_j Σ_i[ψ(x_ij+α_j) − ψ(α_j)] / Σ_i[ψ(N_i+A) − ψ(A)]`.
/// OTUs with no counts are pinned at [`ALPHA_FLOOR`].
pub fn fit_dmn_ml(table: &OtuTable) -> Result<DmnParams> {
    fit_dmn_traced(table).map(|(params, _)| params)
}

/// As [`fit_dmn_ml`], also returning the log-likelihood after every
/// iteration (starting with the initializer).
pub fn fit_dmn_traced(table: &OtuTable) -> Result<(DmnParams, Vec<f64>)> {
    if table.n_samples() < 2 {
        return Err(Error::InvalidData("DMN fitting needs at least 2 samples".into()));
    }
    let totals = table.row_totals();
    if let Some(i) = totals.iter().position(|&t| t == 0) {
        return Err(Error::InvalidData(format!(
            "sample {} has no reads",
            table.sample_ids()[i]
        )));
    }
    let p = table.n_otus();
    let observed: Vec<bool> = (0..p).map(|j| table.rows().any(|r| r[j] > 0)).collect();
    let mut alpha = moment_init(table, &observed);
    let mut ll = dmn_log_likelihood(table, &alpha);
    let mut trace = vec![ll];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < DMN_MAX_ITER {
        iterations += 1;
        let a: f64 = alpha.iter().sum();
        let psi_a = digamma(a);
        let denom: f64 = totals.iter().map(|&t| digamma(t as f64 + a) - psi_a).sum();
        let mut next = alpha.clone();
        let mut max_rel = 0.0f64;
        for j in (0..p).filter(|&j| observed[j]) {
            let psi_j = digamma(alpha[j]);
            let numer: f64 = table
                .rows()
                .filter(|r| r[j] > 0)
                .map(|r| digamma(r[j] as f64 + alpha[j]) - psi_j)
                .sum();
            next[j] = (alpha[j] * numer / denom).max(ALPHA_FLOOR);
            max_rel = max_rel.max((next[j] - alpha[j]).abs() / alpha[j]);
        }
        let next_ll = dmn_log_likelihood(table, &next);
        if !next_ll.is_finite() || next_ll < ll {
            // the update is an ascent step; a decrease is rounding noise at the optimum
            converged = true;
            break;
        }
        alpha = next;
        ll = next_ll;
        trace.push(ll);
        if max_rel < DMN_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("DMN fit stopped after {DMN_MAX_ITER} iterations without converging");
    }
    Ok((
        DmnParams {
            alpha,
            log_likelihood: ll,
            iterations,
            converged,
        },
        trace,
    ))
}

/// Negative binomial read-depth model: mean `a`, dispersion `b`, variance
/// `a + a²/b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NbReadModel {
    pub a: f64,
    pub b: f64,
}

impl Default for NbReadModel {
    fn default() -> Self {
        NbReadModel { a: 1e5, b: 10.0 }
    }
}

impl NbReadModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.b > 0.0 && self.a.is_finite() && self.b.is_finite()) {
            return Err(Error::Config(format!(
                "read model needs a, b > 0, got a = {}, b = {}",
                self.a, self.b
            )));
        }
        Ok(())
    }
}

/// Read depths as a gamma-Poisson mixture. Zero draws are redrawn.
pub fn sample_reads<R: Rng + ?Sized>(model: NbReadModel, n: usize, rng: &mut R) -> Result<Vec<u64>> {
    model.validate()?;
    let gamma = Gamma::new(model.b, model.a / model.b).map_err(|e| Error::Config(e.to_string()))?;
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let rate: f64 = gamma.sample(rng);
        if rate <= 0.0 {
            continue;
        }
        let draw = Poisson::new(rate)
            .map_err(|e| Error::Numerical(e.to_string()))?
            .sample(rng) as u64;
        if draw > 0 {
            out.push(draw);
        }
    }
    Ok(out)
}

/// log of a Gamma(α, 1) draw, stable for tiny α via
/// `Gamma(α) = Gamma(α + 1) · U^{1/α}`.
fn log_gamma_draw<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    if alpha >= 1.0 {
        Gamma::new(alpha, 1.0).expect("positive shape").sample(rng).ln()
    } else {
        let g: f64 = Gamma::new(alpha + 1.0, 1.0).expect("positive shape").sample(rng);
        let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
        g.ln() + u.ln() / alpha
    }
}

/// Dirichlet proportions, normalized in log space.
pub fn sample_dirichlet<R: Rng + ?Sized>(alpha: &[f64], rng: &mut R) -> Vec<f64> {
    let logs: Vec<f64> = alpha.iter().map(|&a| log_gamma_draw(a, rng)).collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// Multinomial draw by sequential conditional binomials.
pub fn sample_multinomial<R: Rng + ?Sized>(n: u64, probs: &[f64], rng: &mut R) -> Vec<u64> {
    let mut out = vec![0u64; probs.len()];
    let mut remaining = n;
    let mut mass = 1.0f64;
    for (j, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if j + 1 == probs.len() {
            out[j] = remaining;
            break;
        }
        let q = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 1.0 };
        let x = Binomial::new(remaining, q).expect("probability in [0, 1]").sample(rng);
        out[j] = x;
        remaining -= x;
        mass -= p;
    }
    out
}

/// One DMN draw per read depth: θ ~ Dirichlet(α), x ~ Multinomial(N, θ).
pub fn sample_dmn<R: Rng + ?Sized>(
    alpha: &[f64],
    reads: &[u64],
    otu_ids: &[String],
    sample_prefix: &str,
    rng: &mut R,
) -> Result<OtuTable> {
    if alpha.len() != otu_ids.len() {
        return Err(Error::Dimension(format!(
            "{} concentrations for {} OTUs",
            alpha.len(),
            otu_ids.len()
        )));
    }
    if alpha.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
        return Err(Error::InvalidData("DMN concentrations must be positive".into()));
    }
    let mut counts = Vec::with_capacity(reads.len() * alpha.len());
    for &n in reads {
        let theta = sample_dirichlet(alpha, rng);
        counts.extend(sample_multinomial(n, &theta, rng));
    }
    let sample_ids = (0..reads.len()).map(|i| format!("{sample_prefix}{i}")).collect();
    OtuTable::new(sample_ids, otu_ids.to_vec(), counts)
}
