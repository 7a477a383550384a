//! Dense reference implementation: materialize the whole feature vector over
//! the full index set and take the dot product. Only usable for small k.

use super::config::{KmerConfig, KmerVariant};
use crate::error::{Error, Result};

const MAX_DENSE: u64 = 1_000_000;
const MAX_DENSE_GAPPY: u64 = 10_000_000;

fn base_index(b: u8) -> Option<u64> {
    match b {
        b'A' => Some(0),
        b'C' => Some(1),
        b'G' => Some(2),
        b'T' => Some(3),
        _ => None,
    }
}

/// Index of a k-mer in 0..4^k, or None if it holds a non-ACGT symbol.
fn kmer_index(kmer: &[u8]) -> Option<u64> {
    kmer.iter()
        .try_fold(0u64, |acc, &b| base_index(b).map(|d| acc * 4 + d))
}

fn spectrum_dense(z: &[u8], k: usize) -> Vec<u64> {
    let mut v = vec![0u64; 4usize.pow(k as u32)];
    if z.len() >= k {
        for w in z.windows(k) {
            if let Some(i) = kmer_index(w) {
                v[i as usize] += 1;
            }
        }
    }
    v
}

fn mismatch_dense(z: &[u8], k: usize, m: usize) -> Vec<u64> {
    let size = 4usize.pow(k as u32);
    let windows: Vec<&[u8]> = if z.len() >= k {
        z.windows(k).filter(|w| kmer_index(w).is_some()).collect()
    } else {
        Vec::new()
    };
    let letters = [b'A', b'C', b'G', b'T'];
    let mut u = vec![b'A'; k];
    (0..size)
        .map(|mut idx| {
            for pos in (0..k).rev() {
                u[pos] = letters[idx % 4];
                idx /= 4;
            }
            windows
                .iter()
                .filter(|w| w.iter().zip(&u).filter(|(a, b)| a != b).count() <= m)
                .count() as u64
        })
        .collect()
}

fn gappy_dense(z: &[u8], k: usize, g: usize) -> Vec<u64> {
    let block = 4u64.pow(2 * k as u32);
    let mut v = vec![0u64; (g as u64 + 1) as usize * block as usize];
    for s in 0..z.len() {
        for j in 0..=g {
            let t = s + k + j;
            if t + k > z.len() {
                break;
            }
            if let (Some(a), Some(b)) = (kmer_index(&z[s..s + k]), kmer_index(&z[t..t + k])) {
                let idx = j as u64 * block + a * 4u64.pow(k as u32) + b;
                v[idx as usize] += 1;
            }
        }
    }
    v
}

/// Dense-oracle kernel value. Errors when the explicit feature space would be
/// too large: 4^k > 10^6 (Spectrum, Mismatch) or (g+1)·4^(2k) > 10^7
/// (GappyPair).
pub fn brute_force_entry(z: &[u8], z_prime: &[u8], cfg: &KmerConfig) -> Result<u64> {
    brute_force_raw(z, z_prime, cfg.variant, cfg.k, cfg.m, cfg.g)
}

/// As [`brute_force_entry`] but without config validation, so degenerate
/// settings such as a zero-mismatch Mismatch kernel can be evaluated.
pub fn brute_force_raw(
    z: &[u8],
    z_prime: &[u8],
    variant: KmerVariant,
    k: usize,
    m: usize,
    g: usize,
) -> Result<u64> {
    if k == 0 {
        return Err(Error::Config("k-mer length must be at least 1".into()));
    }
    let space = match variant {
        KmerVariant::GappyPair => 4f64.powi(2 * k as i32) * (g as f64 + 1.0),
        _ => 4f64.powi(k as i32),
    };
    let limit = if variant == KmerVariant::GappyPair {
        MAX_DENSE_GAPPY
    } else {
        MAX_DENSE
    };
    if space > limit as f64 {
        return Err(Error::Config(format!(
            "dense feature space of size {space} exceeds the brute-force limit {limit}"
        )));
    }
    let (a, b) = match variant {
        KmerVariant::Spectrum => (spectrum_dense(z, k), spectrum_dense(z_prime, k)),
        KmerVariant::Mismatch => (mismatch_dense(z, k, m), mismatch_dense(z_prime, k, m)),
        KmerVariant::GappyPair => (gappy_dense(z, k, g), gappy_dense(z_prime, k, g)),
    };
    Ok(a.iter().zip(&b).map(|(x, y)| x * y).sum())
}
