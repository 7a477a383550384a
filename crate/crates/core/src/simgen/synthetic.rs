//! Synthetic stand-ins for a real 16S dataset: a random ultrametric tree,
//! representative sequences evolved along it, and skewed DMN concentrations.
//! Used by the simulation harness, the tests and the CLI demo paths.

use rand::Rng;
use rand_distr::{Distribution, Exp, LogNormal};
use serde::{Deserialize, Serialize};

use crate::bioio::{Node, PhyloTree, SequenceRecord};
use crate::error::{Error, Result};

/// Random tree shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeModel {
    /// Coalescent under exponential population growth at `growth_rate`
    /// (per coalescent time unit, backwards). Zero gives the Kingman
    /// coalescent with its long internal branches near the root; larger
    /// rates push merges towards the root and give star-like trees.
    Coalescent { growth_rate: f64 },
    /// Pure-birth (Yule) process: splits spread evenly over time.
    Yule,
}

impl Default for TreeModel {
    fn default() -> Self {
        TreeModel::Coalescent { growth_rate: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub n_otus: usize,
    pub tree_model: TreeModel,
    /// Root-to-tip height of the ultrametric tree, in expected
    /// substitutions per site.
    pub tree_height: f64,
    pub seq_len: usize,
    /// Parameters of the lognormal concentration distribution.
    pub alpha_log_mean: f64,
    pub alpha_log_sd: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_otus: 100,
            tree_model: TreeModel::default(),
            tree_height: 0.3,
            seq_len: 200,
            alpha_log_mean: -1.0,
            alpha_log_sd: 1.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub tree: PhyloTree,
    pub sequences: Vec<SequenceRecord>,
    pub alpha: Vec<f64>,
}

impl SyntheticDataset {
    pub fn otu_ids(&self) -> Vec<String> {
        self.sequences.iter().map(|s| s.id.clone()).collect()
    }
}

const BASES: [u8; 4] = *b"ACGT";

/// Kingman coalescent topology scaled to `height`. Returns per-node
/// (children, height) with leaves first and the root last.
fn coalescent<R: Rng + ?Sized>(n: usize, growth: f64, height: f64, rng: &mut R) -> Vec<(Vec<usize>, f64)> {
    let mut nodes: Vec<(Vec<usize>, f64)> = (0..n).map(|_| (Vec::new(), 0.0)).collect();
    let mut lineages: Vec<usize> = (0..n).collect();
    let mut t = 0.0;
    while lineages.len() > 1 {
        let k = lineages.len() as f64;
        t += Exp::new(k * (k - 1.0) / 2.0).expect("positive rate").sample(rng);
        let a = lineages.swap_remove(rng.random_range(0..lineages.len()));
        let b = lineages.swap_remove(rng.random_range(0..lineages.len()));
        nodes.push((vec![a, b], t));
        lineages.push(nodes.len() - 1);
    }
    if growth > 0.0 {
        // neutral time τ maps to real time ln(1 + gτ) / g
        for node in &mut nodes {
            node.1 = (growth * node.1).ln_1p() / growth;
        }
    }
    let root_t = nodes.last().map_or(0.0, |r| r.1);
    if root_t > 0.0 {
        for node in &mut nodes {
            node.1 *= height / root_t;
        }
    }
    nodes
}

/// Yule tree grown forward from the root at unit split rate per lineage,
/// stopped an Exp(n) time after the n-th lineage appears, then scaled to
/// `height`. Same output layout as [`coalescent`].
fn yule<R: Rng + ?Sized>(n: usize, height: f64, rng: &mut R) -> Vec<(Vec<usize>, f64)> {
    // forward times: (children, birth time of the split) for internal nodes
    let mut internal: Vec<(Vec<usize>, f64)> = vec![(Vec::new(), 0.0)];
    // active lineages: (parent internal index)
    let mut active: Vec<usize> = vec![0, 0];
    let mut t = 0.0;
    while active.len() < n {
        let k = active.len() as f64;
        t += Exp::new(k).expect("positive rate").sample(rng);
        let parent = active.swap_remove(rng.random_range(0..active.len()));
        internal.push((Vec::new(), t));
        let id = internal.len() - 1;
        internal[parent].0.push(id);
        active.push(id);
        active.push(id);
    }
    let end = t + Exp::new(n as f64).expect("positive rate").sample(rng);
    // leaves 0..n, internal nodes n.. in reverse creation order so children precede parents
    let m = internal.len();
    let remap = |i: usize| n + (m - 1 - i);
    let mut nodes: Vec<(Vec<usize>, f64)> = (0..n).map(|_| (Vec::new(), 0.0)).collect();
    nodes.extend((0..m).map(|_| (Vec::new(), 0.0)));
    for (leaf, &parent) in active.iter().enumerate() {
        nodes[remap(parent)].0.push(leaf);
    }
    for (i, (children, birth)) in internal.iter().enumerate() {
        nodes[remap(i)].1 = (end - birth) * height / end;
        for &c in children {
            nodes[remap(i)].0.push(remap(c));
        }
    }
    nodes
}

/// JC69: with probability 1 − e^{−4t/3} a site is redrawn uniformly.
fn evolve<R: Rng + ?Sized>(parent: &[u8], t: f64, rng: &mut R) -> Vec<u8> {
    let p = 1.0 - (-4.0 * t / 3.0).exp();
    parent
        .iter()
        .map(|&b| if rng.random::<f64>() < p { BASES[rng.random_range(0..4)] } else { b })
        .collect()
}

/// Random tree, sequences and concentrations for `config.n_otus` OTUs
/// labelled `OTU_0`, `OTU_1`, ...; sequences are returned in label order.
pub fn synthetic_dataset<R: Rng + ?Sized>(config: &SyntheticConfig, rng: &mut R) -> Result<SyntheticDataset> {
    if config.n_otus < 2 || config.seq_len == 0 || !(config.tree_height > 0.0) {
        return Err(Error::Config(
            "synthetic data needs at least 2 OTUs, positive length and height".into(),
        ));
    }
    let raw = match config.tree_model {
        TreeModel::Coalescent { growth_rate } => coalescent(config.n_otus, growth_rate, config.tree_height, rng),
        TreeModel::Yule => yule(config.n_otus, config.tree_height, rng),
    };
    let root_seq: Vec<u8> = (0..config.seq_len).map(|_| BASES[rng.random_range(0..4)]).collect();

    // preorder walk, evolving sequences parent to child
    let mut nodes: Vec<Node> = Vec::with_capacity(raw.len());
    let mut leaf_seqs: Vec<Option<Vec<u8>>> = vec![None; config.n_otus];
    let root = raw.len() - 1;
    let mut stack: Vec<(usize, Option<usize>, f64, Vec<u8>)> = vec![(root, None, raw[root].1, root_seq)];
    while let Some((old, parent, parent_height, seq)) = stack.pop() {
        let id = nodes.len();
        let branch = parent_height - raw[old].1;
        nodes.push(Node {
            parent,
            children: Vec::new(),
            branch_length: branch.max(0.0),
            label: (old < config.n_otus).then(|| format!("OTU_{old}")),
        });
        if let Some(p) = parent {
            nodes[p].children.push(id);
        }
        if old < config.n_otus {
            leaf_seqs[old] = Some(seq);
            continue;
        }
        for &c in raw[old].0.iter().rev() {
            let child_seq = evolve(&seq, raw[old].1 - raw[c].1, rng);
            stack.push((c, Some(id), raw[old].1, child_seq));
        }
    }
    let tree = PhyloTree::from_nodes(nodes)?;
    let sequences = leaf_seqs
        .into_iter()
        .enumerate()
        .map(|(i, s)| SequenceRecord::new(format!("OTU_{i}"), s.expect("every leaf visited")))
        .collect();
    let lognormal = LogNormal::new(config.alpha_log_mean, config.alpha_log_sd)
        .map_err(|e| Error::Config(e.to_string()))?;
    let alpha = (0..config.n_otus).map(|_| lognormal.sample(rng)).collect();
    Ok(SyntheticDataset {
        tree,
        sequences,
        alpha,
    })
}
