use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{KernelContext, SampleKernelSpec, CONFIG_SCHEMA_VERSION, FIGURE1};
use crate::bioio::cophenetic;
use crate::error::{Error, Result};
use crate::mmdtest::{permutation_test, stacked_labels, Estimator};
use crate::rng;
use crate::seqkernel::KmerConfig;
use crate::simgen::{synthetic_dataset, two_sample_scenario, NbReadModel, SyntheticConfig, EPSILON_GRID};

/// Rejection rates of the MMD permutation test across ε.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Figure1Config {
    pub schema_version: u32,
    pub seed: u64,
    pub synthetic: SyntheticConfig,
    pub reads: NbReadModel,
    pub n_x: usize,
    pub n_y: usize,
    pub replicates: usize,
    pub n_perm: usize,
    pub level: f64,
    pub epsilons: Vec<f64>,
    pub kernels: Vec<SampleKernelSpec>,
}

impl Default for Figure1Config {
    fn default() -> Self {
        Figure1Config {
            schema_version: CONFIG_SCHEMA_VERSION,
            seed: 1,
            synthetic: SyntheticConfig::default(),
            reads: NbReadModel::default(),
            n_x: 50,
            n_y: 50,
            replicates: 100,
            n_perm: 200,
            level: 0.1,
            epsilons: EPSILON_GRID.to_vec(),
            kernels: vec![
                SampleKernelSpec::String(KmerConfig::spectrum(30)),
                SampleKernelSpec::UnifracU,
                SampleKernelSpec::UnifracW,
                SampleKernelSpec::Linear,
                SampleKernelSpec::Rbf,
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Figure1Row {
    pub kernel: String,
    pub epsilon: f64,
    pub replicate: usize,
    pub mmd2: f64,
    pub p_value: f64,
    pub reject: bool,
}

fn validate(cfg: &Figure1Config) -> Result<()> {
    if cfg.replicates == 0 || cfg.n_perm == 0 || cfg.epsilons.is_empty() || cfg.kernels.is_empty() {
        return Err(Error::Config("replicates, n_perm, epsilons and kernels must be non-empty".into()));
    }
    if let Some(e) = cfg.epsilons.iter().find(|e| !(0.0..=1.0).contains(*e)) {
        return Err(Error::Config(format!("epsilon {e} outside [0, 1]")));
    }
    if !(cfg.level > 0.0 && cfg.level < 1.0) {
        return Err(Error::Config("level must lie in (0, 1)".into()));
    }
    Ok(())
}

/// Runs every (ε, replicate) cell; rows are ordered by ε, replicate, kernel.
pub fn run_figure1(cfg: &Figure1Config) -> Result<Vec<Figure1Row>> {
    validate(cfg)?;
    let cells: Vec<(usize, usize)> = (0..cfg.epsilons.len())
        .flat_map(|e| (0..cfg.replicates).map(move |r| (e, r)))
        .collect();
    let chunks: Vec<Vec<Figure1Row>> = cells
        .par_iter()
        .map(|&(e, r)| -> Result<Vec<Figure1Row>> {
            let epsilon = cfg.epsilons[e];
            let data = synthetic_dataset(&cfg.synthetic, &mut rng::stream(cfg.seed, &[FIGURE1, 0, r as u64]))?;
            let coph = cophenetic(&data.tree, &data.otu_ids())?;
            let ctx = KernelContext::for_synthetic(&data, &cfg.kernels)?;
            let mut g = rng::stream(cfg.seed, &[FIGURE1, 1, e as u64, r as u64]);
            let sim = two_sample_scenario(&data.alpha, &coph, epsilon, cfg.reads, cfg.n_x, cfg.n_y, &mut g)?;
            let pooled = sim.pooled();
            let labels = stacked_labels(cfg.n_x, cfg.n_y);
            cfg.kernels
                .iter()
                .enumerate()
                .map(|(ki, &spec)| {
                    let k = ctx.kernel(&pooled, spec)?;
                    let perm_seed = rng::derive_seed(cfg.seed, &[FIGURE1, 2, e as u64, r as u64, ki as u64]);
                    let res = permutation_test(&k, &labels, cfg.n_perm, perm_seed, Estimator::BlockMeans)?;
                    Ok(Figure1Row {
                        kernel: spec.to_string(),
                        epsilon,
                        replicate: r,
                        mmd2: res.mmd2,
                        p_value: res.p_value,
                        reject: res.p_value <= cfg.level,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(chunks.into_iter().flatten().collect())
}
