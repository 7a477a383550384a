use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::bioio::CopheneticMatrix;
use crate::error::{Error, Result};

/// A partition of OTU indices. Cluster ids are dense, numbered in order of
/// each cluster's smallest member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
    /// Set for phylogenetic clusterings, absent for random ones.
    pub epsilon: Option<f64>,
    /// Distance cut used (ε·Δmax), if phylogenetic.
    pub threshold: Option<f64>,
}

impl ClusterAssignment {
    /// Relabels an arbitrary labelling into canonical dense ids.
    pub fn from_labels(raw: &[usize], epsilon: Option<f64>, threshold: Option<f64>) -> Self {
        let mut map = std::collections::HashMap::new();
        let labels = raw
            .iter()
            .map(|&r| {
                let next = map.len();
                *map.entry(r).or_insert(next)
            })
            .collect();
        ClusterAssignment {
            labels,
            epsilon,
            threshold,
        }
    }

    pub fn n_otus(&self) -> usize {
        self.labels.len()
    }

    pub fn n_clusters(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    /// Members of each cluster, ascending.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_clusters()];
        for (i, &c) in self.labels.iter().enumerate() {
            out[c].push(i);
        }
        out
    }

    /// Cluster sizes in descending order.
    pub fn sizes(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.clusters().iter().map(Vec::len).collect();
        s.sort_unstable_by(|a, b| b.cmp(a));
        s
    }
}

/// Complete-linkage merge heights via the nearest-neighbour-chain
/// algorithm. Returns `(a, b, height)` for each merge, where `a` and `b`
/// are representative original indices of the merged clusters.
pub fn complete_linkage(dist: &nalgebra::DMatrix<f64>) -> Vec<(usize, usize, f64)> {
    let n = dist.nrows();
    let mut d: Vec<f64> = dist.iter().copied().collect(); // column-major, symmetric
    let at = |i: usize, j: usize| i * n + j;
    let mut active = vec![true; n];
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    let mut chain: Vec<usize> = Vec::new();
    let mut remaining = n;
    while remaining > 1 {
        if chain.is_empty() {
            chain.push(active.iter().position(|&a| a).expect("active cluster"));
        }
        let top = *chain.last().expect("non-empty chain");
        let prev = chain.len().checked_sub(2).map(|i| chain[i]);
        // nearest active neighbour, preferring the previous chain element on ties
        let mut best = prev;
        let mut best_d = prev.map_or(f64::INFINITY, |p| d[at(top, p)]);
        for j in 0..n {
            if active[j] && j != top && d[at(top, j)] < best_d {
                best = Some(j);
                best_d = d[at(top, j)];
            }
        }
        let nn = best.expect("at least two active clusters");
        if Some(nn) == prev {
            chain.pop();
            chain.pop();
            let (a, b) = (top.min(nn), top.max(nn));
            merges.push((a, b, best_d));
            // a now represents the union
            for k in 0..n {
                if active[k] && k != a && k != b {
                    let v = d[at(a, k)].max(d[at(b, k)]);
                    d[at(a, k)] = v;
                    d[at(k, a)] = v;
                }
            }
            active[b] = false;
            remaining -= 1;
        } else {
            chain.push(nn);
        }
    }
    merges
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Complete-linkage clusters cut at `ε·Δmax` (inclusive), so every
/// within-cluster cophenetic distance is at most `ε·Δmax`.
pub fn phylo_clusters(coph: &CopheneticMatrix, epsilon: f64) -> Result<ClusterAssignment> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::Config(format!("epsilon must lie in (0, 1], got {epsilon}")));
    }
    let threshold = epsilon * coph.max_dist;
    let n = coph.dist.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    for (a, b, h) in complete_linkage(&coph.dist) {
        if h <= threshold {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let roots: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
    Ok(ClusterAssignment::from_labels(&roots, Some(epsilon), Some(threshold)))
}

/// Largest within-cluster distance of a clustering.
pub fn max_within_cluster_distance(coph: &CopheneticMatrix, clusters: &ClusterAssignment) -> f64 {
    clusters
        .clusters()
        .iter()
        .flat_map(|c| c.iter().flat_map(move |&i| c.iter().map(move |&j| (i, j))))
        .map(|(i, j)| coph.dist[(i, j)])
        .fold(0.0, f64::max)
}

/// Shuffles concentrations within each cluster (the operator π_C).
pub fn within_cluster_permutation<R: Rng + ?Sized>(
    alpha: &[f64],
    clusters: &ClusterAssignment,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if alpha.len() != clusters.n_otus() {
        return Err(Error::Dimension(format!(
            "{} concentrations for {} clustered OTUs",
            alpha.len(),
            clusters.n_otus()
        )));
    }
    let mut out = alpha.to_vec();
    for members in clusters.clusters() {
        if members.len() < 2 {
            continue;
        }
        let mut values: Vec<f64> = members.iter().map(|&i| alpha[i]).collect();
        values.shuffle(rng);
        for (&i, v) in members.iter().zip(values) {
            out[i] = v;
        }
    }
    Ok(out)
}

/// Uniformly random partition of `0..p` into blocks of the given sizes.
pub fn random_label_clusters<R: Rng + ?Sized>(sizes: &[usize], p: usize, rng: &mut R) -> Result<ClusterAssignment> {
    if sizes.iter().sum::<usize>() != p || sizes.contains(&0) {
        return Err(Error::Config(format!(
            "cluster sizes must be positive and sum to {p}"
        )));
    }
    let mut order: Vec<usize> = (0..p).collect();
    order.shuffle(rng);
    let mut raw = vec![0usize; p];
    let mut pos = 0;
    for (c, &s) in sizes.iter().enumerate() {
        for &i in &order[pos..pos + s] {
            raw[i] = c;
        }
        pos += s;
    }
    Ok(ClusterAssignment::from_labels(&raw, None, None))
}

/// log10 of the number of within-cluster permutations, Π |c|!.
pub fn log10_perm_space(clusters: &ClusterAssignment) -> f64 {
    clusters
        .clusters()
        .iter()
        .map(|c| ln_gamma(c.len() as f64 + 1.0))
        .sum::<f64>()
        / std::f64::consts::LN_10
}

/// Chooses `k` distinct cluster ids uniformly.
pub(crate) fn choose_clusters<R: Rng + ?Sized>(n_clusters: usize, k: usize, rng: &mut R) -> Vec<usize> {
    index::sample(rng, n_clusters, k).into_vec()
}
