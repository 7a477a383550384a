use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{KernelContext, SampleKernelSpec, CONFIG_SCHEMA_VERSION, FIGURE2};
use crate::bioio::cophenetic;
use crate::error::{Error, Result};
use crate::mmdtest::{mmd2, stacked_labels, Estimator};
use crate::rng;
use crate::seqkernel::KmerConfig;
use crate::simgen::{
    sample_dmn, sample_reads, scenario_clusters, within_cluster_permutation, ClusterMode, NbReadModel,
    SyntheticConfig,
};

/// MMD² at a small and at the full phylogenetic scale, plus the small scale
/// with randomly labelled clusters of the same sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Figure2Config {
    pub schema_version: u32,
    pub seed: u64,
    pub synthetic: SyntheticConfig,
    pub reads: NbReadModel,
    pub n_x: usize,
    pub n_y: usize,
    pub replicates: usize,
    pub epsilon_small: f64,
    pub epsilon_large: f64,
    pub kernels: Vec<SampleKernelSpec>,
}

impl Default for Figure2Config {
    fn default() -> Self {
        Figure2Config {
            schema_version: CONFIG_SCHEMA_VERSION,
            seed: 1,
            synthetic: SyntheticConfig::default(),
            reads: NbReadModel::default(),
            n_x: 50,
            n_y: 50,
            replicates: 50,
            epsilon_small: 0.1,
            epsilon_large: 1.0,
            kernels: vec![
                SampleKernelSpec::String(KmerConfig::spectrum(30)),
                SampleKernelSpec::UnifracU,
                SampleKernelSpec::Linear,
                SampleKernelSpec::Rbf,
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Figure2Row {
    pub kernel: String,
    pub replicate: usize,
    /// MMD² with α₂ = π_ε(α₁) at `epsilon_small`.
    pub mmd2_small: f64,
    /// MMD² at `epsilon_large`.
    pub mmd2_large: f64,
    pub ratio: f64,
    /// MMD² at `epsilon_small` with randomly labelled clusters.
    pub mmd2_random_labels: f64,
}

/// Within a replicate the X sample and both read-depth vectors are shared
/// by the three conditions, so the MMD² values are paired.
pub fn run_figure2(cfg: &Figure2Config) -> Result<Vec<Figure2Row>> {
    if cfg.replicates == 0 || cfg.kernels.is_empty() || cfg.n_x == 0 || cfg.n_y == 0 {
        return Err(Error::Config("replicates, kernels and group sizes must be non-empty".into()));
    }
    for e in [cfg.epsilon_small, cfg.epsilon_large] {
        if !(e > 0.0 && e <= 1.0) {
            return Err(Error::Config(format!("epsilon {e} outside (0, 1]")));
        }
    }
    let chunks: Vec<Vec<Figure2Row>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| -> Result<Vec<Figure2Row>> {
            let r64 = r as u64;
            let data = crate::simgen::synthetic_dataset(&cfg.synthetic, &mut rng::stream(cfg.seed, &[FIGURE2, 0, r64]))?;
            let ids = data.otu_ids();
            let coph = cophenetic(&data.tree, &ids)?;
            let ctx = KernelContext::for_synthetic(&data, &cfg.kernels)?;

            let mut g = rng::stream(cfg.seed, &[FIGURE2, 1, r64]);
            let reads_x = sample_reads(cfg.reads, cfg.n_x, &mut g)?;
            let reads_y = sample_reads(cfg.reads, cfg.n_y, &mut g)?;
            let x = sample_dmn(&data.alpha, &reads_x, &ids, "X", &mut g)?;

            let conditions = [
                (cfg.epsilon_small, ClusterMode::Phylogenetic),
                (cfg.epsilon_large, ClusterMode::Phylogenetic),
                (cfg.epsilon_small, ClusterMode::RandomLabels),
            ];
            let mut pooled = Vec::with_capacity(3);
            for (c, &(eps, mode)) in conditions.iter().enumerate() {
                let mut gc = rng::stream(cfg.seed, &[FIGURE2, 2, r64, c as u64]);
                let clusters = scenario_clusters(&coph, eps, mode, &mut gc)?.expect("epsilon > 0");
                let alpha2 = within_cluster_permutation(&data.alpha, &clusters, &mut gc)?;
                // Y uses the same stream in every condition
                let mut gy = rng::stream(cfg.seed, &[FIGURE2, 3, r64]);
                let y = sample_dmn(&alpha2, &reads_y, &ids, "Y", &mut gy)?;
                pooled.push(x.vstack(&y)?);
            }
            let labels = stacked_labels(cfg.n_x, cfg.n_y);
            cfg.kernels
                .iter()
                .map(|&spec| {
                    let stat = |t| -> Result<f64> { mmd2(&ctx.kernel(t, spec)?, &labels, Estimator::BlockMeans) };
                    let (small, large, random) = (stat(&pooled[0])?, stat(&pooled[1])?, stat(&pooled[2])?);
                    Ok(Figure2Row {
                        kernel: spec.to_string(),
                        replicate: r,
                        mmd2_small: small,
                        mmd2_large: large,
                        ratio: small / large,
                        mmd2_random_labels: random,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(chunks.into_iter().flatten().collect())
}
