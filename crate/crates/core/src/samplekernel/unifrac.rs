use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::kernels::{KernelKind, KernelMatrix};
use super::transform::AbundanceMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnifracMode {
    /// Presence/absence of each OTU.
    Unweighted,
    /// Relative abundances (rows are normalized to sum to one).
    Weighted,
}

/// Per-taxon UniFrac distances between all pairs of samples.
///
/// `lengths[j]` is the root-to-leaf path length of OTU `j`. Unweighted:
/// `sum_j l_j |1(x_j>0) - 1(x'_j>0)| / sum_j l_j max(1(x_j>0), 1(x'_j>0))`.
/// Weighted: `sum_j l_j |p_j - p'_j| / sum_j l_j (p_j + p'_j)`. A zero
/// denominator yields distance 0.
pub fn unifrac_distance(a: &AbundanceMatrix, lengths: &[f64], mode: UnifracMode) -> Result<DMatrix<f64>> {
    let (n, p) = (a.n_samples(), a.n_otus());
    if lengths.len() != p {
        return Err(Error::Dimension(format!(
            "{} branch lengths for {p} OTUs",
            lengths.len()
        )));
    }
    if let Some(bad) = lengths.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
        return Err(Error::InvalidData(format!("invalid branch length {bad}")));
    }
    if lengths.iter().all(|&l| l == 0.0) {
        return Err(Error::InvalidData("all root-path lengths are zero".into()));
    }
    let weights: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let row = a.values.row(i);
            match mode {
                UnifracMode::Unweighted => row.iter().map(|&v| (v > 0.0) as u8 as f64).collect(),
                UnifracMode::Weighted => {
                    let total: f64 = row.iter().sum();
                    if total > 0.0 {
                        row.iter().map(|&v| v / total).collect()
                    } else {
                        vec![0.0; p]
                    }
                }
            }
        })
        .collect();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let (mut num, mut den) = (0.0, 0.0);
            for ((l, x), y) in lengths.iter().zip(&weights[i]).zip(&weights[j]) {
                num += l * (x - y).abs();
                den += match mode {
                    UnifracMode::Unweighted => l * x.max(*y),
                    UnifracMode::Weighted => l * (x + y),
                };
            }
            let v = if den > 0.0 { num / den } else { 0.0 };
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    Ok(d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CenteringOptions {
    /// Double-center the elementwise squared distances instead of the raw ones.
    pub square_entries: bool,
    /// Project onto the PSD cone by clipping the spectrum.
    pub psd_clip: bool,
}

impl Default for CenteringOptions {
    fn default() -> Self {
        CenteringOptions {
            square_entries: true,
            psd_clip: true,
        }
    }
}

/// Eigenvalues below this fraction of the largest one are raised to it when
/// clipping, so that the clipped matrix re-factorizes with a non-negative
/// spectrum despite rounding.
const CLIP_FLOOR_REL: f64 = 1e-12;

/// `K = -1/2 J Δ J` with `J = I - 11ᵀ/n`, optionally followed by spectral
/// clipping to the PSD cone.
pub fn distance_to_kernel(d: &DMatrix<f64>, opts: CenteringOptions) -> Result<DMatrix<f64>> {
    if !d.is_square() {
        return Err(Error::Dimension("distance matrix is not square".into()));
    }
    let n = d.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let delta = if opts.square_entries {
        d.component_mul(d)
    } else {
        d.clone()
    };
    let nf = n as f64;
    let row_means: Vec<f64> = (0..n).map(|i| delta.row(i).sum() / nf).collect();
    let col_means: Vec<f64> = (0..n).map(|j| delta.column(j).sum() / nf).collect();
    let grand = row_means.iter().sum::<f64>() / nf;
    let mut k = DMatrix::from_fn(n, n, |i, j| {
        -0.5 * (delta[(i, j)] - row_means[i] - col_means[j] + grand)
    });
    symmetrize(&mut k);
    if opts.psd_clip {
        let eig = SymmetricEigen::new(k.clone());
        let max = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
        let floor = CLIP_FLOOR_REL * max;
        let clipped = eig.eigenvalues.map(|l| l.max(floor));
        k = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
        symmetrize(&mut k);
    }
    Ok(k)
}

fn symmetrize(k: &mut DMatrix<f64>) {
    let n = k.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (k[(i, j)] + k[(j, i)]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
}

/// UniFrac distances turned into a kernel matrix by double centering.
pub fn unifrac_kernel(
    a: &AbundanceMatrix,
    lengths: &[f64],
    mode: UnifracMode,
    opts: CenteringOptions,
) -> Result<KernelMatrix> {
    let d = unifrac_distance(a, lengths, mode)?;
    let kind = match mode {
        UnifracMode::Unweighted => KernelKind::UnifracU,
        UnifracMode::Weighted => KernelKind::UnifracW,
    };
    KernelMatrix::new(a.sample_ids.clone(), distance_to_kernel(&d, opts)?, kind)
}
