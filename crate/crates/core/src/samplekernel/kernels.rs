use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::transform::AbundanceMatrix;
use crate::error::{Error, Result};
use crate::linalg;
use crate::matrix_io;
use crate::seqkernel::SimilarityMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Stringphylo,
    Linear,
    Rbf,
    UnifracU,
    UnifracW,
    /// Loaded from a file; provenance unknown.
    Precomputed,
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelKind::Stringphylo => "stringphylo",
            KernelKind::Linear => "linear",
            KernelKind::Rbf => "rbf",
            KernelKind::UnifracU => "unifrac_u",
            KernelKind::UnifracW => "unifrac_w",
            KernelKind::Precomputed => "precomputed",
        })
    }
}

impl FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stringphylo" => Ok(KernelKind::Stringphylo),
            "linear" => Ok(KernelKind::Linear),
            "rbf" => Ok(KernelKind::Rbf),
            "unifrac_u" => Ok(KernelKind::UnifracU),
            "unifrac_w" => Ok(KernelKind::UnifracW),
            other => Err(Error::Config(format!("unknown kernel kind `{other}`"))),
        }
    }
}

/// Sample-by-sample Gram matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    pub sample_ids: Vec<String>,
    pub values: DMatrix<f64>,
    pub kind: KernelKind,
}

impl KernelMatrix {
    pub fn new(sample_ids: Vec<String>, values: DMatrix<f64>, kind: KernelKind) -> Result<Self> {
        if !values.is_square() || values.nrows() != sample_ids.len() {
            return Err(Error::Dimension(format!(
                "{}x{} kernel for {} samples",
                values.nrows(),
                values.ncols(),
                sample_ids.len()
            )));
        }
        if !linalg::is_symmetric(&values) {
            return Err(Error::InvalidData("kernel matrix is not symmetric".into()));
        }
        Ok(KernelMatrix {
            sample_ids,
            values,
            kind,
        })
    }

    pub fn len(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample_ids.is_empty()
    }

    pub fn is_psd(&self) -> bool {
        linalg::is_psd(&self.values)
    }

    /// Position of each requested sample id.
    pub fn indices_of(&self, ids: &[String]) -> Result<Vec<usize>> {
        let pos: std::collections::HashMap<&str, usize> = self
            .sample_ids
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        ids.iter()
            .map(|id| {
                pos.get(id.as_str()).copied().ok_or_else(|| Error::MissingId {
                    id: id.clone(),
                    component: "kernel matrix",
                })
            })
            .collect()
    }

    /// Rectangular block `K[rows, cols]`.
    pub fn block(&self, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), cols.len(), |i, j| self.values[(rows[i], cols[j])])
    }

    /// Principal submatrix on `idx`.
    pub fn restrict(&self, idx: &[usize]) -> KernelMatrix {
        KernelMatrix {
            sample_ids: idx.iter().map(|&i| self.sample_ids[i].clone()).collect(),
            values: self.block(idx, idx),
            kind: self.kind,
        }
    }

    pub fn write_tsv<W: Write>(&self, out: W) -> Result<()> {
        matrix_io::write_tsv(out, &self.sample_ids, &self.values)
    }

    pub fn write_binary<W: Write>(&self, out: W) -> Result<()> {
        matrix_io::write_binary(out, matrix_io::KERNEL_MAGIC, &self.sample_ids, &self.values)
    }

    pub fn read_file(path: &std::path::Path) -> Result<Self> {
        let (ids, values) = matrix_io::read_matrix_file(path, matrix_io::KERNEL_MAGIC)?;
        KernelMatrix::new(ids, values, KernelKind::Precomputed)
    }
}

/// `K[i][j] = <left_i, right_j>` for the upper triangle, mirrored. Entries are
/// accumulated in a fixed order so results are bitwise reproducible.
fn gram(left: &DMatrix<f64>, right: &DMatrix<f64>) -> DMatrix<f64> {
    let n = left.nrows();
    let p = left.ncols();
    // row-major copies for contiguous access
    let l: Vec<Vec<f64>> = (0..n).map(|i| (0..p).map(|k| left[(i, k)]).collect()).collect();
    let r: Vec<Vec<f64>> = (0..n).map(|i| (0..p).map(|k| right[(i, k)]).collect()).collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i..n)
                .map(|j| {
                    let mut acc = 0.0;
                    for k in 0..p {
                        acc += l[i][k] * r[j][k];
                    }
                    acc
                })
                .collect()
        })
        .collect();
    let mut k = DMatrix::zeros(n, n);
    for (i, row) in rows.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            k[(i, i + off)] = v;
        }
    }
    linalg::symmetrize_from_upper(&mut k);
    k
}

/// `K = A S Aᵀ`: the sample kernel induced by an OTU similarity matrix.
pub fn stringphylo_kernel(a: &AbundanceMatrix, s: &SimilarityMatrix) -> Result<KernelMatrix> {
    if a.otu_ids != s.otu_ids {
        return Err(Error::Dimension(
            "abundance columns and similarity matrix use different OTU orderings".into(),
        ));
    }
    let (n, p) = (a.n_samples(), a.n_otus());
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut b = vec![0.0; p];
            for k in 0..p {
                let x = a.values[(i, k)];
                // S is symmetric, so column k is row k
                for (bj, sk) in b.iter_mut().zip(s.values.column(k).iter()) {
                    *bj += x * sk;
                }
            }
            b
        })
        .collect();
    let b = DMatrix::from_fn(n, p, |i, j| rows[i][j]);
    KernelMatrix::new(a.sample_ids.clone(), gram(&b, &a.values), KernelKind::Stringphylo)
}

/// `K = A Aᵀ`.
pub fn linear_kernel(a: &AbundanceMatrix) -> KernelMatrix {
    KernelMatrix {
        sample_ids: a.sample_ids.clone(),
        values: gram(&a.values, &a.values),
        kind: KernelKind::Linear,
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Gaussian kernel with the median heuristic: `sigma` is the median of the
/// pairwise Euclidean distances over `i < j`.
pub fn rbf_median_kernel(a: &AbundanceMatrix) -> Result<KernelMatrix> {
    let n = a.n_samples();
    if n < 2 {
        return Err(Error::InvalidData("RBF median heuristic needs at least two samples".into()));
    }
    let sq = |i: usize, j: usize| -> f64 {
        a.values
            .row(i)
            .iter()
            .zip(a.values.row(j).iter())
            .map(|(x, y)| (x - y) * (x - y))
            .sum()
    };
    let mut d2 = DMatrix::zeros(n, n);
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = sq(i, j);
            d2[(i, j)] = v;
            d2[(j, i)] = v;
            dists.push(v.sqrt());
        }
    }
    let sigma = median(dists);
    if sigma <= 0.0 {
        return Err(Error::Numerical(
            "median pairwise distance is zero; RBF bandwidth undefined".into(),
        ));
    }
    let values = d2.map(|v| (-v / (2.0 * sigma * sigma)).exp());
    Ok(KernelMatrix {
        sample_ids: a.sample_ids.clone(),
        values,
        kind: KernelKind::Rbf,
    })
}
