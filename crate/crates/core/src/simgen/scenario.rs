use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::clusters::{phylo_clusters, random_label_clusters, within_cluster_permutation, ClusterAssignment};
use super::dmn::{sample_dmn, sample_reads, NbReadModel};
use super::phenotype::{generate_phenotype, make_effect_sizes, EffectScenario, EffectSizes, Phenotype, PhenotypeSpec};
use crate::bioio::{CopheneticMatrix, OtuTable};
use crate::error::{Error, Result};

/// Version of the manifest JSON layout.
pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

/// Which clusters confine the difference between the two populations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterMode {
    /// C_ε from the tree (π_ε).
    #[default]
    Phylogenetic,
    /// Random clusters with the sizes of C_ε (π_ε̃).
    RandomLabels,
}

#[derive(Debug, Clone)]
pub struct TwoSampleData {
    pub x: OtuTable,
    pub y: OtuTable,
    pub alpha2: Vec<f64>,
    /// None when ε = 0 (no permutation).
    pub clusters: Option<ClusterAssignment>,
}

impl TwoSampleData {
    /// X rows followed by Y rows.
    pub fn pooled(&self) -> OtuTable {
        self.x.vstack(&self.y).expect("both tables share the OTU columns")
    }
}

/// Clusters used by π for a given ε and mode; `None` for ε = 0.
pub fn scenario_clusters<R: Rng + ?Sized>(
    coph: &CopheneticMatrix,
    epsilon: f64,
    mode: ClusterMode,
    rng: &mut R,
) -> Result<Option<ClusterAssignment>> {
    if epsilon == 0.0 {
        return Ok(None);
    }
    let phylo = phylo_clusters(coph, epsilon)?;
    Ok(Some(match mode {
        ClusterMode::Phylogenetic => phylo,
        ClusterMode::RandomLabels => random_label_clusters(&phylo.sizes(), phylo.n_otus(), rng)?,
    }))
}

/// Two populations P = DMN(α₁, N) and Q = DMN(α₂, N) with α₂ = π(α₁).
/// `clusters = None` means ε = 0, so α₂ = α₁ and H₀ holds.
pub fn two_sample_from_clusters<R: Rng + ?Sized>(
    alpha1: &[f64],
    otu_ids: &[String],
    clusters: Option<ClusterAssignment>,
    reads: NbReadModel,
    n_x: usize,
    n_y: usize,
    rng: &mut R,
) -> Result<TwoSampleData> {
    if n_x == 0 || n_y == 0 {
        return Err(Error::Config("both groups need at least one sample".into()));
    }
    let alpha2 = match &clusters {
        None => alpha1.to_vec(),
        Some(c) => within_cluster_permutation(alpha1, c, rng)?,
    };
    let reads_x = sample_reads(reads, n_x, rng)?;
    let reads_y = sample_reads(reads, n_y, rng)?;
    let x = sample_dmn(alpha1, &reads_x, otu_ids, "X", rng)?;
    let y = sample_dmn(&alpha2, &reads_y, otu_ids, "Y", rng)?;
    Ok(TwoSampleData {
        x,
        y,
        alpha2,
        clusters,
    })
}

/// Two-sample scenario with phylogenetic clusters C_ε.
pub fn two_sample_scenario<R: Rng + ?Sized>(
    alpha1: &[f64],
    coph: &CopheneticMatrix,
    epsilon: f64,
    reads: NbReadModel,
    n_x: usize,
    n_y: usize,
    rng: &mut R,
) -> Result<TwoSampleData> {
    if alpha1.len() != coph.otu_ids.len() {
        return Err(Error::Dimension("concentrations and distance matrix disagree".into()));
    }
    let clusters = scenario_clusters(coph, epsilon, ClusterMode::Phylogenetic, rng)?;
    two_sample_from_clusters(alpha1, &coph.otu_ids, clusters, reads, n_x, n_y, rng)
}

#[derive(Debug, Clone)]
pub struct HostTraitData {
    pub table: OtuTable,
    /// Concentrations after the per-replicate shuffle.
    pub alpha: Vec<f64>,
    pub clusters: ClusterAssignment,
    pub effects: EffectSizes,
    pub phenotype: Phenotype,
}

/// Single-population host-trait dataset. α is shuffled uniformly, effect
/// clusters are C_ε (Scenario 1) or random clusters of the same sizes
/// (Scenario 2), then counts and phenotype are drawn.
#[allow(clippy::too_many_arguments)]
pub fn host_trait_scenario<R: Rng + ?Sized>(
    alpha: &[f64],
    coph: &CopheneticMatrix,
    epsilon: f64,
    reads: NbReadModel,
    n: usize,
    spec: &PhenotypeSpec,
    rng: &mut R,
) -> Result<HostTraitData> {
    if alpha.len() != coph.otu_ids.len() {
        return Err(Error::Dimension("concentrations and distance matrix disagree".into()));
    }
    let mut alpha = alpha.to_vec();
    alpha.shuffle(rng);
    let mode = match spec.scenario {
        EffectScenario::PhyloClustered => ClusterMode::Phylogenetic,
        EffectScenario::RandomClustered => ClusterMode::RandomLabels,
    };
    let clusters = scenario_clusters(coph, epsilon, mode, rng)?
        .ok_or_else(|| Error::Config("host-trait clustering needs epsilon > 0".into()))?;
    let effects = make_effect_sizes(&clusters, spec.n_effect_clusters, spec.cluster_effect_var, rng)?;
    let depths = sample_reads(reads, n, rng)?;
    let table = sample_dmn(&alpha, &depths, &coph.otu_ids, "S", rng)?;
    let phenotype = generate_phenotype(&table, &effects.beta, spec, rng)?;
    Ok(HostTraitData {
        table,
        alpha,
        clusters,
        effects,
        phenotype,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoSampleManifest {
    pub schema_version: u32,
    pub seed: u64,
    pub epsilon: f64,
    pub cluster_mode: ClusterMode,
    pub reads: NbReadModel,
    pub n_x: usize,
    pub n_y: usize,
    pub otu_ids: Vec<String>,
    pub alpha1: Vec<f64>,
    pub alpha2: Vec<f64>,
    pub alpha_unchanged: bool,
    pub n_clusters: Option<usize>,
    pub log10_perm_space: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HostTraitManifest {
    pub schema_version: u32,
    pub seed: u64,
    pub epsilon: f64,
    pub reads: NbReadModel,
    pub n_samples: usize,
    pub phenotype: PhenotypeSpec,
    pub otu_ids: Vec<String>,
    pub alpha: Vec<f64>,
    pub chosen_clusters: Vec<usize>,
    pub cluster_effects: Vec<f64>,
    pub cluster_labels: Vec<usize>,
    pub beta_scale: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use nalgebra::DMatrix;

    fn coph(p: usize) -> CopheneticMatrix {
        // two clades of p/2 leaves at distance 0.1 within, 1.0 between
        let d = DMatrix::from_fn(p, p, |i, j| {
            if i == j {
                0.0
            } else if (i < p / 2) == (j < p / 2) {
                0.1
            } else {
                1.0
            }
        });
        CopheneticMatrix {
            otu_ids: (0..p).map(|i| format!("o{i}")).collect(),
            dist: d,
            max_dist: 1.0,
        }
    }

    #[test]
    fn epsilon_zero_keeps_alpha() {
        let alpha: Vec<f64> = (1..=6).map(|v| v as f64).collect();
        let reads = NbReadModel { a: 100.0, b: 10.0 };
        let d = two_sample_scenario(&alpha, &coph(6), 0.0, reads, 3, 4, &mut rng::stream(1, &[])).unwrap();
        assert_eq!(d.alpha2, alpha);
        assert_eq!(d.pooled().n_samples(), 7);
    }

    #[test]
    fn small_epsilon_permutes_within_clade() {
        let alpha: Vec<f64> = (1..=6).map(|v| v as f64).collect();
        let reads = NbReadModel { a: 100.0, b: 10.0 };
        let d = two_sample_scenario(&alpha, &coph(6), 0.5, reads, 2, 2, &mut rng::stream(3, &[])).unwrap();
        let mut left = d.alpha2[..3].to_vec();
        left.sort_by(f64::total_cmp);
        assert_eq!(left, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn host_trait_lists_ten_clusters() {
        let alpha = vec![0.5; 40];
        let mut c = coph(40);
        // spread clades into many small clusters
        c.dist = DMatrix::from_fn(40, 40, |i, j| if i == j { 0.0 } else if i / 2 == j / 2 { 0.05 } else { 1.0 });
        let spec = PhenotypeSpec::regression(0.3, EffectScenario::PhyloClustered);
        let reads = NbReadModel { a: 1000.0, b: 10.0 };
        let d = host_trait_scenario(&alpha, &c, 0.1, reads, 30, &spec, &mut rng::stream(4, &[])).unwrap();
        assert_eq!(d.effects.chosen_clusters.len(), 10);
        assert_eq!(d.clusters.n_clusters(), 20);
        assert_eq!(d.phenotype.y.len(), 30);
    }
}
