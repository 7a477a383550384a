use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Subcommand};
use phylokern::bioio::{cophenetic, load_dataset, write_fasta, CopheneticMatrix, OtuTable, ParseMode, PhyloTree, SequenceRecord};
use phylokern::harness::CONFIG_SCHEMA_VERSION;
use phylokern::rng;
use phylokern::simgen::{
    fit_dmn_ml, host_trait_scenario, log10_perm_space, scenario_clusters, synthetic_dataset,
    two_sample_from_clusters, ClusterMode, EffectScenario, HostTraitManifest, NbReadModel, PhenotypeSpec,
    SyntheticConfig, TraitKind, TwoSampleManifest, MANIFEST_SCHEMA_VERSION,
};
use phylokern::Error;
use serde::{Deserialize, Serialize};

use crate::io::{write_atomic, write_json, write_rows};
use crate::{CliError, CliResult, Reporter};

#[derive(Subcommand)]
pub enum SimulateCommand {
    /// Two DMN populations whose concentrations differ by π_ε.
    TwoSample(SimArgs),
    /// One DMN population with a phenotype driven by clustered OTU effects.
    HostTrait(SimArgs),
}

#[derive(Args)]
pub struct SimArgs {
    /// JSON config; omitted fields take their defaults (see --print-config).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the config ε.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Print the effective config as JSON and exit.
    #[arg(long)]
    pub print_config: bool,
    /// Directory receiving the dataset files and manifest.json.
    #[arg(long, required_unless_present = "print_config")]
    pub out_dir: Option<PathBuf>,
}

/// A real dataset whose ML DMN concentrations seed the simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetPaths {
    pub fasta: PathBuf,
    pub tree: PathBuf,
    pub counts: PathBuf,
    #[serde(default)]
    pub lenient: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TwoSampleConfig {
    pub schema_version: u32,
    pub seed: u64,
    /// Seed dataset; the synthetic generator is used when absent.
    pub dataset: Option<DatasetPaths>,
    pub synthetic: SyntheticConfig,
    pub reads: NbReadModel,
    pub n_x: usize,
    pub n_y: usize,
    pub epsilon: f64,
    pub cluster_mode: ClusterMode,
}

impl Default for TwoSampleConfig {
    fn default() -> Self {
        TwoSampleConfig {
            schema_version: CONFIG_SCHEMA_VERSION,
            seed: 1,
            dataset: None,
            synthetic: SyntheticConfig::default(),
            reads: NbReadModel::default(),
            n_x: 50,
            n_y: 50,
            epsilon: 0.1,
            cluster_mode: ClusterMode::Phylogenetic,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HostTraitConfig {
    pub schema_version: u32,
    pub seed: u64,
    pub dataset: Option<DatasetPaths>,
    pub synthetic: SyntheticConfig,
    pub reads: NbReadModel,
    pub n_samples: usize,
    pub epsilon: f64,
    pub phenotype: PhenotypeSpec,
}

impl Default for HostTraitConfig {
    fn default() -> Self {
        HostTraitConfig {
            schema_version: CONFIG_SCHEMA_VERSION,
            seed: 1,
            dataset: None,
            synthetic: SyntheticConfig { n_otus: 200, ..SyntheticConfig::default() },
            reads: NbReadModel::default(),
            n_samples: 200,
            epsilon: 0.1,
            phenotype: PhenotypeSpec::regression(0.3, EffectScenario::PhyloClustered),
        }
    }
}

/// Sequences, tree and concentrations the simulation starts from.
struct Seed {
    sequences: Vec<SequenceRecord>,
    tree: PhyloTree,
    alpha: Vec<f64>,
    coph: CopheneticMatrix,
}

impl Seed {
    fn otu_ids(&self) -> Vec<String> {
        self.sequences.iter().map(|s| s.id.clone()).collect()
    }
}

// stream labels
const SEED_DATA: u64 = 0;
const SCENARIO: u64 = 1;

fn load_seed(dataset: &Option<DatasetPaths>, synthetic: &SyntheticConfig, seed: u64) -> CliResult<Seed> {
    let (sequences, tree, alpha) = match dataset {
        Some(d) => {
            let mode = if d.lenient { ParseMode::Lenient } else { ParseMode::Strict };
            let data = load_dataset(&d.fasta, &d.tree, &d.counts, mode)?;
            let fit = fit_dmn_ml(&data.table)?;
            if !fit.converged {
                log::warn!("DMN fit stopped after {} iterations without converging", fit.iterations);
            }
            (data.sequences, data.tree, fit.alpha)
        }
        None => {
            let s = synthetic_dataset(synthetic, &mut rng::stream(seed, &[SEED_DATA]))?;
            (s.sequences, s.tree, s.alpha)
        }
    };
    let ids: Vec<String> = sequences.iter().map(|s| s.id.clone()).collect();
    let coph = cophenetic(&tree, &ids)?;
    Ok(Seed { sequences, tree, alpha, coph })
}

fn read_config<T: for<'de> Deserialize<'de> + Default>(path: &Option<PathBuf>) -> CliResult<T> {
    match path {
        Some(p) => {
            let text = crate::io::read_text(p)?;
            Ok(serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?)
        }
        None => Ok(T::default()),
    }
}

fn check_version(v: u32) -> CliResult<()> {
    if v != CONFIG_SCHEMA_VERSION {
        return Err(Error::Config(format!("config schema version {v} is not supported (expected {CONFIG_SCHEMA_VERSION})")).into());
    }
    Ok(())
}

fn check_epsilon(e: f64) -> CliResult<()> {
    if !(0.0..=1.0).contains(&e) {
        return Err(CliError::Usage(format!("epsilon {e} outside [0, 1]")));
    }
    Ok(())
}

fn print_config<T: Serialize>(cfg: &T) -> CliResult<()> {
    crate::io::print_json(cfg)?;
    Ok(())
}

fn write_seed_files(dir: &Path, seed: &Seed) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(Error::from)?;
    write_atomic(&dir.join("sequences.fasta"), |w| write_fasta(w, &seed.sequences))?;
    write_atomic(&dir.join("tree.nwk"), |w| {
        writeln!(w, "{}", seed.tree.to_newick())?;
        Ok(())
    })?;
    Ok(())
}

fn write_table(path: &Path, table: &OtuTable) -> CliResult<()> {
    write_atomic(path, |w| table.write_tsv(w))
}

#[derive(Serialize)]
struct LabelRow<'a> {
    sample_id: &'a str,
    group: &'a str,
}

#[derive(Serialize)]
struct TraitRow<'a> {
    sample_id: &'a str,
    y: f64,
}

pub fn run(cmd: SimulateCommand, rep: &Reporter) -> CliResult<()> {
    match cmd {
        SimulateCommand::TwoSample(a) => run_two_sample(a, rep),
        SimulateCommand::HostTrait(a) => run_host_trait(a, rep),
    }
}

fn run_two_sample(a: SimArgs, rep: &Reporter) -> CliResult<()> {
    let mut cfg: TwoSampleConfig = read_config(&a.config)?;
    cfg.seed = a.seed.unwrap_or(cfg.seed);
    cfg.epsilon = a.epsilon.unwrap_or(cfg.epsilon);
    check_version(cfg.schema_version)?;
    check_epsilon(cfg.epsilon)?;
    if a.print_config {
        return print_config(&cfg);
    }
    let dir = a.out_dir.expect("clap requires --out-dir");
    let start = Instant::now();
    let seed = load_seed(&cfg.dataset, &cfg.synthetic, cfg.seed)?;
    let ids = seed.otu_ids();
    let mut g = rng::stream(cfg.seed, &[SCENARIO]);
    let clusters = scenario_clusters(&seed.coph, cfg.epsilon, cfg.cluster_mode, &mut g)?;
    let n_clusters = clusters.as_ref().map(|c| c.n_clusters());
    let perm_space = clusters.as_ref().map(log10_perm_space);
    let data = two_sample_from_clusters(&seed.alpha, &ids, clusters, cfg.reads, cfg.n_x, cfg.n_y, &mut g)?;

    write_seed_files(&dir, &seed)?;
    let pooled = data.pooled();
    write_table(&dir.join("counts.tsv"), &pooled)?;
    let labels: Vec<LabelRow> = pooled
        .sample_ids()
        .iter()
        .enumerate()
        .map(|(i, s)| LabelRow { sample_id: s, group: if i < cfg.n_x { "X" } else { "Y" } })
        .collect();
    write_rows(&dir.join("labels.tsv"), &labels)?;
    let manifest = TwoSampleManifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        seed: cfg.seed,
        epsilon: cfg.epsilon,
        cluster_mode: cfg.cluster_mode,
        reads: cfg.reads,
        n_x: cfg.n_x,
        n_y: cfg.n_y,
        otu_ids: ids,
        alpha_unchanged: data.alpha2 == seed.alpha,
        alpha1: seed.alpha,
        alpha2: data.alpha2,
        n_clusters,
        log10_perm_space: perm_space,
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    rep.say(format!(
        "simulate two-sample: {} OTUs, {}+{} samples, ε={} ({} clusters), {:.3} s",
        manifest.otu_ids.len(),
        cfg.n_x,
        cfg.n_y,
        cfg.epsilon,
        n_clusters.map_or("no".into(), |n| n.to_string()),
        start.elapsed().as_secs_f64()
    ));
    Ok(())
}

fn run_host_trait(a: SimArgs, rep: &Reporter) -> CliResult<()> {
    let mut cfg: HostTraitConfig = read_config(&a.config)?;
    cfg.seed = a.seed.unwrap_or(cfg.seed);
    cfg.epsilon = a.epsilon.unwrap_or(cfg.epsilon);
    check_version(cfg.schema_version)?;
    if !(cfg.epsilon > 0.0 && cfg.epsilon <= 1.0) {
        return Err(CliError::Usage(format!("epsilon {} outside (0, 1]", cfg.epsilon)));
    }
    if a.print_config {
        return print_config(&cfg);
    }
    let dir = a.out_dir.expect("clap requires --out-dir");
    let start = Instant::now();
    let seed = load_seed(&cfg.dataset, &cfg.synthetic, cfg.seed)?;
    let mut g = rng::stream(cfg.seed, &[SCENARIO]);
    let data = host_trait_scenario(&seed.alpha, &seed.coph, cfg.epsilon, cfg.reads, cfg.n_samples, &cfg.phenotype, &mut g)?;

    write_seed_files(&dir, &seed)?;
    write_table(&dir.join("counts.tsv"), &data.table)?;
    let traits: Vec<TraitRow> = data
        .table
        .sample_ids()
        .iter()
        .zip(&data.phenotype.y)
        .map(|(s, &y)| TraitRow { sample_id: s, y })
        .collect();
    write_rows(&dir.join("phenotype.tsv"), &traits)?;
    let manifest = HostTraitManifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        seed: cfg.seed,
        epsilon: cfg.epsilon,
        reads: cfg.reads,
        n_samples: cfg.n_samples,
        phenotype: cfg.phenotype.clone(),
        otu_ids: seed.otu_ids(),
        alpha: data.alpha,
        chosen_clusters: data.effects.chosen_clusters,
        cluster_effects: data.effects.cluster_effects,
        cluster_labels: data.clusters.labels.clone(),
        beta_scale: data.phenotype.beta_scale,
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    rep.say(format!(
        "simulate host-trait: {} OTUs, {} samples, {} {:?} trait, {:.3} s",
        manifest.otu_ids.len(),
        cfg.n_samples,
        match cfg.phenotype.kind {
            TraitKind::Regression => "regression",
            TraitKind::Classification => "classification",
        },
        cfg.phenotype.scenario,
        start.elapsed().as_secs_f64()
    ));
    Ok(())
}
