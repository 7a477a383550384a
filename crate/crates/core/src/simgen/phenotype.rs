use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::clusters::{choose_clusters, ClusterAssignment};
use crate::bioio::OtuTable;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraitKind {
    Regression,
    Classification,
}

/// How OTU effect clusters are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectScenario {
    /// Scenario 1: clusters follow the phylogeny.
    PhyloClustered,
    /// Scenario 2: clusters of the same sizes with random membership.
    RandomClustered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhenotypeSpec {
    pub kind: TraitKind,
    pub noise_var: f64,
    pub n_effect_clusters: usize,
    pub cluster_effect_var: f64,
    pub scenario: EffectScenario,
}

impl PhenotypeSpec {
    pub fn regression(noise_var: f64, scenario: EffectScenario) -> Self {
        PhenotypeSpec {
            kind: TraitKind::Regression,
            noise_var,
            n_effect_clusters: 10,
            cluster_effect_var: 10.0,
            scenario,
        }
    }

    pub fn classification(scenario: EffectScenario) -> Self {
        PhenotypeSpec {
            kind: TraitKind::Classification,
            noise_var: 0.1,
            ..Self::regression(0.1, scenario)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectSizes {
    pub beta: Vec<f64>,
    /// Chosen cluster ids, in draw order.
    pub chosen_clusters: Vec<usize>,
    pub cluster_effects: Vec<f64>,
}

/// Picks `n_effect` clusters without replacement; members of chosen
/// cluster k share the effect β̃_k ~ N(0, effect_var), all others get 0.
pub fn make_effect_sizes<R: Rng + ?Sized>(
    clusters: &ClusterAssignment,
    n_effect: usize,
    effect_var: f64,
    rng: &mut R,
) -> Result<EffectSizes> {
    let n_clusters = clusters.n_clusters();
    if n_clusters < n_effect {
        return Err(Error::InvalidData(format!(
            "{n_clusters} clusters, need at least {n_effect} for effect sizes"
        )));
    }
    let normal = Normal::new(0.0, effect_var.sqrt()).map_err(|e| Error::Config(e.to_string()))?;
    let chosen = choose_clusters(n_clusters, n_effect, rng);
    let effects: Vec<f64> = chosen.iter().map(|_| normal.sample(rng)).collect();
    let mut per_cluster = vec![0.0; n_clusters];
    for (&c, &e) in chosen.iter().zip(&effects) {
        per_cluster[c] = e;
    }
    Ok(EffectSizes {
        beta: clusters.labels.iter().map(|&c| per_cluster[c]).collect(),
        chosen_clusters: chosen,
        cluster_effects: effects,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phenotype {
    /// Responses; 0.0/1.0 for classification.
    pub y: Vec<f64>,
    /// Noise-free signal Zβ after rescaling to unit variance.
    pub signal: Vec<f64>,
    /// Factor applied to β.
    pub beta_scale: f64,
}

fn sample_variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Host trait from relative abundances Z: β is rescaled so Zβ has sample
/// variance 1, then `y = Zβ + η` (regression) or `y = 1(Zβ + η ≥ 0)`.
pub fn generate_phenotype<R: Rng + ?Sized>(
    table: &OtuTable,
    beta: &[f64],
    spec: &PhenotypeSpec,
    rng: &mut R,
) -> Result<Phenotype> {
    if beta.len() != table.n_otus() {
        return Err(Error::Dimension(format!(
            "{} effect sizes for {} OTUs",
            beta.len(),
            table.n_otus()
        )));
    }
    if table.n_samples() < 2 {
        return Err(Error::InvalidData("need at least 2 samples".into()));
    }
    if !(spec.noise_var >= 0.0) {
        return Err(Error::Config("noise variance must be non-negative".into()));
    }
    let raw: Vec<f64> = table
        .rows()
        .map(|r| {
            let total: u64 = r.iter().sum();
            if total == 0 {
                return 0.0;
            }
            r.iter().zip(beta).map(|(&x, &b)| x as f64 * b).sum::<f64>() / total as f64
        })
        .collect();
    let var = sample_variance(&raw);
    if !(var > 0.0 && var.is_finite()) {
        return Err(Error::InvalidData("Zβ is constant across samples; cannot rescale".into()));
    }
    let scale = 1.0 / var.sqrt();
    let signal: Vec<f64> = raw.iter().map(|s| s * scale).collect();
    let sd = spec.noise_var.sqrt();
    let y = signal
        .iter()
        .map(|&s| {
            let eta = if sd > 0.0 {
                Normal::new(0.0, sd).expect("finite sd").sample(rng)
            } else {
                0.0
            };
            match spec.kind {
                TraitKind::Regression => s + eta,
                TraitKind::Classification => ((s + eta) >= 0.0) as u8 as f64,
            }
        })
        .collect();
    Ok(Phenotype {
        y,
        signal,
        beta_scale: scale,
    })
}
