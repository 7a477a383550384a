use std::path::PathBuf;

use clap::{Args, Subcommand};
use phylokern::bioio::{cophenetic, parse_newick};
use phylokern::simgen::{log10_perm_space, max_within_cluster_distance, phylo_clusters};
use serde::Serialize;

use crate::io::{write_json, write_rows};
use crate::{CliResult, Reporter};

/// Version of the cluster summary JSON layout.
pub const CLUSTER_SCHEMA_VERSION: u32 = 1;

#[derive(Subcommand)]
pub enum TreeCommand {
    /// Complete-linkage OTU clusters C_ε with all within-cluster distances ≤ ε·Δmax.
    Clusters(ClusterArgs),
}

#[derive(Args)]
pub struct ClusterArgs {
    /// Newick tree; every leaf is an OTU.
    #[arg(long)]
    pub tree: PathBuf,
    /// Phylogenetic scale in (0, 1], relative to the largest leaf-to-leaf distance.
    #[arg(long)]
    pub epsilon: f64,
    /// Output TSV: OTU id, cluster index.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional JSON summary (cluster sizes, permutation-space size).
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Serialize)]
struct Row<'a> {
    otu_id: &'a str,
    cluster: usize,
}

#[derive(Serialize)]
struct Summary {
    schema_version: u32,
    epsilon: f64,
    max_distance: f64,
    threshold: f64,
    max_within_cluster_distance: f64,
    n_otus: usize,
    n_clusters: usize,
    n_singletons: usize,
    cluster_sizes: Vec<usize>,
    log10_perm_space: f64,
}

pub fn run(cmd: TreeCommand, rep: &Reporter) -> CliResult<()> {
    match cmd {
        TreeCommand::Clusters(a) => run_clusters(a, rep),
    }
}

fn run_clusters(a: ClusterArgs, rep: &Reporter) -> CliResult<()> {
    let tree = parse_newick(&crate::io::read_text(&a.tree)?)?;
    let ids: Vec<String> = tree.leaf_labels().into_iter().map(String::from).collect();
    let coph = cophenetic(&tree, &ids)?;
    let c = phylo_clusters(&coph, a.epsilon)?;
    let rows: Vec<Row> = ids.iter().zip(&c.labels).map(|(id, &cluster)| Row { otu_id: id, cluster }).collect();
    write_rows(&a.out, &rows)?;
    let sizes = c.sizes();
    let summary = Summary {
        schema_version: CLUSTER_SCHEMA_VERSION,
        epsilon: a.epsilon,
        max_distance: coph.max_dist,
        threshold: c.threshold.unwrap_or(a.epsilon * coph.max_dist),
        max_within_cluster_distance: max_within_cluster_distance(&coph, &c),
        n_otus: ids.len(),
        n_clusters: c.n_clusters(),
        n_singletons: sizes.iter().filter(|&&s| s == 1).count(),
        log10_perm_space: log10_perm_space(&c),
        cluster_sizes: sizes,
    };
    if let Some(p) = &a.summary {
        write_json(p, &summary)?;
    }
    rep.say(format!(
        "tree clusters: {} OTUs in {} clusters at ε={} ({} singletons, log10 |Π| = {:.3})",
        summary.n_otus, summary.n_clusters, a.epsilon, summary.n_singletons, summary.log10_perm_space
    ));
    Ok(())
}
