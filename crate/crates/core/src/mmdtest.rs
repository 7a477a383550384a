//! Kernel two-sample test: the MMD² statistic from a precomputed Gram matrix
//! over the pooled samples, with a permutation p-value.
//!
//! The kernel is never recomputed. A permutation only changes which rows are
//! labelled X and which Y, so each permuted statistic is an O(n²) pass over
//! the same matrix.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Default number of permutations.
pub const DEFAULT_N_PERM: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// Block means including the i = j terms:
    /// `mean(K_XX) + mean(K_YY) - 2 mean(K_XY)`.
    #[default]
    BlockMeans,
    /// Textbook U-statistic that drops the i = j terms of the within-group
    /// blocks. Needs at least two samples per group.
    Unbiased,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoSampleResult {
    pub mmd2: f64,
    pub p_value: f64,
    pub n_perm: usize,
    pub seed: u64,
    pub n_x: usize,
    pub n_y: usize,
}

fn group_sizes(labels: &[bool]) -> (usize, usize) {
    let n_y = labels.iter().filter(|&&y| y).count();
    (labels.len() - n_y, n_y)
}

/// Sums the three blocks in a fixed index order, so the value depends only on
/// which samples are in which group, not on how the labelling was produced.
fn block_sums(k: &DMatrix<f64>, labels: &[bool]) -> ([f64; 3], [f64; 2]) {
    let n = labels.len();
    let mut sums = [0.0; 3]; // xx, yy, xy
    let mut diag = [0.0; 2];
    for j in 0..n {
        for i in 0..j {
            let v = 2.0 * k[(i, j)];
            match (labels[i], labels[j]) {
                (false, false) => sums[0] += v,
                (true, true) => sums[1] += v,
                _ => sums[2] += 0.5 * v,
            }
        }
        let d = k[(j, j)];
        if labels[j] {
            diag[1] += d;
        } else {
            diag[0] += d;
        }
    }
    (sums, diag)
}

fn statistic(k: &DMatrix<f64>, labels: &[bool], estimator: Estimator) -> f64 {
    let (n_x, n_y) = group_sizes(labels);
    let (nx, ny) = (n_x as f64, n_y as f64);
    let ([xx, yy, xy], [dx, dy]) = block_sums(k, labels);
    match estimator {
        Estimator::BlockMeans => (xx + dx) / (nx * nx) + (yy + dy) / (ny * ny) - 2.0 * xy / (nx * ny),
        Estimator::Unbiased => xx / (nx * (nx - 1.0)) + yy / (ny * (ny - 1.0)) - 2.0 * xy / (nx * ny),
    }
}

fn check(k: &DMatrix<f64>, labels: &[bool], estimator: Estimator) -> Result<()> {
    if !k.is_square() || k.nrows() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} labels for a {}x{} kernel",
            labels.len(),
            k.nrows(),
            k.ncols()
        )));
    }
    let (n_x, n_y) = group_sizes(labels);
    let min = match estimator {
        Estimator::BlockMeans => 1,
        Estimator::Unbiased => 2,
    };
    if n_x < min || n_y < min {
        return Err(Error::InvalidData(format!(
            "groups of sizes {n_x} and {n_y}; each needs at least {min} sample(s)"
        )));
    }
    Ok(())
}

/// MMD² between the samples labelled `false` (X) and `true` (Y).
pub fn mmd2(k: &DMatrix<f64>, labels: &[bool], estimator: Estimator) -> Result<f64> {
    check(k, labels, estimator)?;
    Ok(statistic(k, labels, estimator))
}

/// Permutation test. Permutation `b` shuffles the pooled labels with the
/// generator keyed by `(seed, b)`, so the result is reproducible and
/// independent of the worker count. The p-value is
/// `(#{permuted >= observed} + 1) / (n_perm + 1)`.
pub fn permutation_test(
    k: &DMatrix<f64>,
    labels: &[bool],
    n_perm: usize,
    seed: u64,
    estimator: Estimator,
) -> Result<TwoSampleResult> {
    check(k, labels, estimator)?;
    if n_perm == 0 {
        return Err(Error::Config("need at least one permutation".into()));
    }
    let observed = statistic(k, labels, estimator);
    let exceed: usize = (0..n_perm)
        .into_par_iter()
        .map(|b| {
            let mut perm = labels.to_vec();
            perm.shuffle(&mut rng::stream(seed, &[b as u64]));
            (statistic(k, &perm, estimator) >= observed) as usize
        })
        .sum();
    let (n_x, n_y) = group_sizes(labels);
    Ok(TwoSampleResult {
        mmd2: observed,
        p_value: (exceed + 1) as f64 / (n_perm + 1) as f64,
        n_perm,
        seed,
        n_x,
        n_y,
    })
}

/// Labels for `n_x` X samples followed by `n_y` Y samples.
pub fn stacked_labels(n_x: usize, n_y: usize) -> Vec<bool> {
    let mut v = vec![false; n_x];
    v.resize(n_x + n_y, true);
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_1d(xs: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(xs.len(), xs.len(), |i, j| xs[i] * xs[j])
    }

    #[test]
    fn identical_multisets_give_zero() {
        let k = linear_1d(&[1.0, 2.0, 3.0, 3.0, 2.0, 1.0]);
        let v = mmd2(&k, &stacked_labels(3, 3), Estimator::BlockMeans).unwrap();
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn scalar_pair() {
        let k = linear_1d(&[1.0, 0.0]);
        assert_eq!(mmd2(&k, &[false, true], Estimator::BlockMeans).unwrap(), 1.0);
    }

    #[test]
    fn within_group_relabel_invariant() {
        let xs: [f64; 6] = [0.3, -1.0, 2.0, 0.7, 1.5, -0.2];
        let k = DMatrix::from_fn(6, 6, |i, j| (-(xs[i] - xs[j]) * (xs[i] - xs[j])).exp());
        let a = mmd2(&k, &[false, false, false, true, true, true], Estimator::BlockMeans).unwrap();
        // reorder samples within each group
        let order = [2, 0, 1, 5, 3, 4];
        let kp = DMatrix::from_fn(6, 6, |i, j| k[(order[i], order[j])]);
        let b = mmd2(&kp, &[false, false, false, true, true, true], Estimator::BlockMeans).unwrap();
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn empty_group_rejected() {
        let k = linear_1d(&[1.0, 2.0]);
        assert!(mmd2(&k, &[false, false], Estimator::BlockMeans).is_err());
        assert!(mmd2(&k, &[false, true], Estimator::Unbiased).is_err());
        assert!(permutation_test(&k, &[false, true], 0, 1, Estimator::BlockMeans).is_err());
    }

    #[test]
    fn saturated_p_value_is_one() {
        // identical points: every permuted statistic equals the observed one
        let k = DMatrix::from_element(6, 6, 1.0);
        let r = permutation_test(&k, &stacked_labels(3, 3), 50, 3, Estimator::BlockMeans).unwrap();
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn minimum_p_value_floor() {
        let mut xs = vec![0.0; 20];
        xs.extend(vec![100.0; 20]);
        let k = linear_1d(&xs);
        let r = permutation_test(&k, &stacked_labels(20, 20), 99, 11, Estimator::BlockMeans).unwrap();
        assert_eq!(r.p_value, 0.01);
    }

    #[test]
    fn deterministic() {
        let xs: Vec<f64> = (0..30).map(|i| ((i * 37) % 11) as f64).collect();
        let k = linear_1d(&xs);
        let labels = stacked_labels(15, 15);
        let a = permutation_test(&k, &labels, 200, 5, Estimator::BlockMeans).unwrap();
        let b = permutation_test(&k, &labels, 200, 5, Estimator::BlockMeans).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.mmd2.to_bits(), b.mmd2.to_bits());
    }

    #[test]
    fn p_value_invariant_to_kernel_scale() {
        let xs: Vec<f64> = (0..24).map(|i| ((i * 7) % 5) as f64 + if i >= 12 { 0.5 } else { 0.0 }).collect();
        let k = DMatrix::from_fn(24, 24, |i, j| (-(xs[i] - xs[j]).powi(2)).exp());
        let labels = stacked_labels(12, 12);
        let a = permutation_test(&k, &labels, 300, 9, Estimator::BlockMeans).unwrap();
        let b = permutation_test(&(k * 4.0), &labels, 300, 9, Estimator::BlockMeans).unwrap();
        assert_eq!(a.p_value, b.p_value);
        assert!((b.mmd2 - 4.0 * a.mmd2).abs() < 1e-12);
    }

    #[test]
    fn unbiased_drops_diagonal() {
        let k = linear_1d(&[1.0, 1.0, 0.0, 0.0]);
        let v = mmd2(&k, &stacked_labels(2, 2), Estimator::Unbiased).unwrap();
        assert_eq!(v, 1.0);
    }
}
