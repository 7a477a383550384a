use nalgebra::DMatrix;
use rayon::prelude::*;

use super::newick::PhyloTree;
use crate::error::{Error, Result};

/// Leaf-to-leaf path lengths on a tree, aligned to a chosen OTU order.
#[derive(Debug, Clone, PartialEq)]
pub struct CopheneticMatrix {
    pub otu_ids: Vec<String>,
    pub dist: DMatrix<f64>,
    pub max_dist: f64,
}

impl CopheneticMatrix {
    pub fn len(&self) -> usize {
        self.otu_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.otu_ids.is_empty()
    }
}

/// Computes the cophenetic distance between every pair of `otu_ids`.
///
/// Each entry is the plain sum of branch lengths along the connecting path,
/// accumulated by walking outward from the first leaf of the pair.
pub fn cophenetic(tree: &PhyloTree, otu_ids: &[String]) -> Result<CopheneticMatrix> {
    let leaf_nodes: Vec<usize> = otu_ids
        .iter()
        .map(|id| {
            tree.leaf(id).ok_or_else(|| Error::MissingId {
                id: id.clone(),
                component: "tree",
            })
        })
        .collect::<Result<_>>()?;
    let p = leaf_nodes.len();
    let nodes = tree.nodes();

    let rows: Vec<Vec<f64>> = leaf_nodes
        .par_iter()
        .map(|&start| {
            let mut dist = vec![f64::NAN; nodes.len()];
            dist[start] = 0.0;
            let mut stack = vec![start];
            while let Some(u) = stack.pop() {
                let du = dist[u];
                let node = &nodes[u];
                if let Some(parent) = node.parent {
                    if dist[parent].is_nan() {
                        dist[parent] = du + node.branch_length;
                        stack.push(parent);
                    }
                }
                for &c in &node.children {
                    if dist[c].is_nan() {
                        dist[c] = du + nodes[c].branch_length;
                        stack.push(c);
                    }
                }
            }
            leaf_nodes.iter().map(|&l| dist[l]).collect()
        })
        .collect();

    let mut dist = DMatrix::zeros(p, p);
    let mut max_dist: f64 = 0.0;
    for i in 0..p {
        for j in (i + 1)..p {
            let d = rows[i][j];
            dist[(i, j)] = d;
            dist[(j, i)] = d;
            max_dist = max_dist.max(d);
        }
    }
    Ok(CopheneticMatrix {
        otu_ids: otu_ids.to_vec(),
        dist,
        max_dist,
    })
}
