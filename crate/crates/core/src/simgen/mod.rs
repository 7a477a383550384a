//! Simulated 16S datasets: Dirichlet-multinomial counts with negative
//! binomial read depths, phylogenetic OTU clusters, the within-cluster
//! permutation operator and host-trait phenotype models.

mod clusters;
mod dmn;
mod phenotype;
mod scenario;
pub mod synthetic;

pub use clusters::{
    complete_linkage, log10_perm_space, max_within_cluster_distance, phylo_clusters,
    random_label_clusters, within_cluster_permutation, ClusterAssignment,
};
pub use dmn::{
    dmn_log_likelihood, fit_dmn_ml, fit_dmn_traced, sample_dirichlet, sample_dmn,
    sample_multinomial, sample_reads, DmnParams, NbReadModel, ALPHA_FLOOR, DMN_MAX_ITER, DMN_TOL,
};
pub use phenotype::{
    generate_phenotype, make_effect_sizes, EffectScenario, EffectSizes, Phenotype, PhenotypeSpec,
    TraitKind,
};
pub use scenario::{
    host_trait_scenario, scenario_clusters, two_sample_from_clusters, two_sample_scenario,
    ClusterMode, HostTraitData, HostTraitManifest, TwoSampleData, TwoSampleManifest,
    MANIFEST_SCHEMA_VERSION,
};
pub use synthetic::{synthetic_dataset, SyntheticConfig, SyntheticDataset, TreeModel};

/// Default ε grid of the two-sample study.
pub const EPSILON_GRID: [f64; 8] = [0.0, 0.001, 0.003, 0.01, 0.03, 0.1, 0.3, 1.0];
