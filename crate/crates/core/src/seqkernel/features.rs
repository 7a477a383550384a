//! Sparse feature extraction for the Spectrum and GappyPair kernels, and
//! for the Mismatch kernel when Hamming neighbourhoods are small.
//!
//! Only features that actually occur in a sequence are materialized, as a
//! sorted list of packed keys with multiplicities. The inner product of two
//! sequences is then a merge-join over their key lists, so the cost depends
//! on sequence length rather than on the size of the 4^k feature space.

use std::cmp::Ordering;

/// Sentinel code for a symbol outside {A,C,G,T}.
pub(crate) const AMBIGUOUS: u8 = u8::MAX;

pub(crate) fn encode(bases: &[u8]) -> Vec<u8> {
    bases
        .iter()
        .map(|b| match b {
            b'A' => 0,
            b'C' => 1,
            b'G' => 2,
            b'T' => 3,
            _ => AMBIGUOUS,
        })
        .collect()
}

/// Start positions of length-`k` windows free of ambiguity codes.
pub(crate) fn clean_starts(codes: &[u8], k: usize) -> Vec<usize> {
    if k == 0 || codes.len() < k {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(codes.len() + 1 - k);
    // length of the current run of unambiguous symbols ending at i
    let mut run = 0usize;
    for (i, &c) in codes.iter().enumerate() {
        run = if c == AMBIGUOUS { 0 } else { run + 1 };
        if run >= k {
            out.push(i + 1 - k);
        }
    }
    out
}

/// Number of k-mers within Hamming distance `m` of a fixed k-mer over a
/// 4-letter alphabet, saturating at `usize::MAX`.
pub fn mismatch_ball_size(k: usize, m: usize) -> usize {
    let mut total: usize = 0;
    let mut binom: usize = 1;
    let mut pow3: usize = 1;
    for i in 0..=m.min(k) {
        if i > 0 {
            binom = binom.saturating_mul(k + 1 - i) / i;
            pow3 = pow3.saturating_mul(3);
        }
        total = total.saturating_add(binom.saturating_mul(pow3));
    }
    total
}

/// Calls `f` on every word obtained from `u` by changing at most `budget`
/// positions at index >= `from`. `u` is restored on return.
fn enumerate_ball(u: &mut [u8], from: usize, budget: usize, f: &mut impl FnMut(&[u8])) {
    f(u);
    if budget == 0 {
        return;
    }
    for pos in from..u.len() {
        let orig = u[pos];
        for c in 0..4u8 {
            if c != orig {
                u[pos] = c;
                enumerate_ball(u, pos + 1, budget - 1, f);
            }
        }
        u[pos] = orig;
    }
}

/// Sorted, deduplicated feature keys with counts. Keys are fixed-width
/// slices of `u64` words laid out contiguously.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseFeatures {
    width: usize,
    keys: Vec<u64>,
    counts: Vec<u32>,
}

fn pack_into(codes: impl Iterator<Item = u8>, out: &mut Vec<u64>) {
    let mut word = 0u64;
    let mut filled = 0;
    for c in codes {
        word = (word << 2) | c as u64;
        filled += 1;
        if filled == 32 {
            out.push(word);
            word = 0;
            filled = 0;
        }
    }
    if filled > 0 {
        out.push(word);
    }
}

impl SparseFeatures {
    fn from_raw_keys(width: usize, raw: Vec<u64>) -> Self {
        let n = if width == 0 { 0 } else { raw.len() / width };
        let key = |i: usize| &raw[i * width..(i + 1) * width];
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_unstable_by(|&a, &b| key(a).cmp(key(b)));
        let mut keys = Vec::with_capacity(raw.len());
        let mut counts: Vec<u32> = Vec::new();
        let mut prev: Option<usize> = None;
        for i in order {
            match prev {
                Some(p) if key(p) == key(i) => *counts.last_mut().expect("non-empty") += 1,
                _ => {
                    keys.extend_from_slice(key(i));
                    counts.push(1);
                    prev = Some(i);
                }
            }
        }
        SparseFeatures {
            width,
            keys,
            counts,
        }
    }

    /// k-mer counts (Spectrum feature map).
    pub fn spectrum(codes: &[u8], k: usize) -> Self {
        let width = k.div_ceil(32);
        let starts = clean_starts(codes, k);
        let mut raw = Vec::with_capacity(starts.len() * width);
        for s in starts {
            pack_into(codes[s..s + k].iter().copied(), &mut raw);
        }
        Self::from_raw_keys(width, raw)
    }

    /// Mismatch feature map by explicit enumeration of every k-mer's
    /// Hamming ball of radius `m`. Size grows as `mismatch_ball_size(k, m)`
    /// per k-mer, so this is only used when that is small.
    pub fn mismatch(codes: &[u8], k: usize, m: usize) -> Self {
        let width = k.div_ceil(32);
        let starts = clean_starts(codes, k);
        let mut raw = Vec::with_capacity(starts.len() * width * mismatch_ball_size(k, m).min(1 << 16));
        let mut buf = Vec::with_capacity(k);
        for s in starts {
            buf.clear();
            buf.extend_from_slice(&codes[s..s + k]);
            enumerate_ball(&mut buf, 0, m.min(k), &mut |u| pack_into(u.iter().copied(), &mut raw));
        }
        Self::from_raw_keys(width, raw)
    }

    /// Counts of (k-mer, gap j, k-mer) triples for 0 <= j <= g.
    pub fn gappy_pair(codes: &[u8], k: usize, g: usize) -> Self {
        let width = 1 + (2 * k).div_ceil(32);
        let mut clean = vec![false; codes.len()];
        for s in clean_starts(codes, k) {
            clean[s] = true;
        }
        let mut raw = Vec::new();
        for s in 0..codes.len() {
            if !clean[s] {
                continue;
            }
            for j in 0..=g {
                let t = s + k + j;
                if t + k > codes.len() {
                    break;
                }
                if !clean[t] {
                    continue;
                }
                raw.push(j as u64);
                pack_into(
                    codes[s..s + k].iter().chain(&codes[t..t + k]).copied(),
                    &mut raw,
                );
            }
        }
        Self::from_raw_keys(width, raw)
    }

    pub fn n_features(&self) -> usize {
        self.counts.len()
    }

    fn key(&self, i: usize) -> &[u64] {
        &self.keys[i * self.width..(i + 1) * self.width]
    }

    /// Inner product of two feature maps built with the same configuration.
    pub fn dot(&self, other: &SparseFeatures) -> u64 {
        debug_assert_eq!(self.width, other.width);
        match self.width {
            1 => return dot_words(&self.keys, &self.counts, &other.keys, &other.counts),
            2 => return dot_pairs(&self.keys, &self.counts, &other.keys, &other.counts),
            _ => {}
        }
        let (mut i, mut j) = (0, 0);
        let mut acc = 0u64;
        while i < self.counts.len() && j < other.counts.len() {
            match self.key(i).cmp(other.key(j)) {
                Ordering::Less => i += 1,
                Ordering::Greater => j += 1,
                Ordering::Equal => {
                    acc += self.counts[i] as u64 * other.counts[j] as u64;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }
}

// single-word keys: plain integer comparisons
fn dot_words(ka: &[u64], ca: &[u32], kb: &[u64], cb: &[u32]) -> u64 {
    let (mut i, mut j) = (0, 0);
    let mut acc = 0u64;
    while i < ka.len() && j < kb.len() {
        let (x, y) = (ka[i], kb[j]);
        if x == y {
            acc += ca[i] as u64 * cb[j] as u64;
        }
        i += (x <= y) as usize;
        j += (y <= x) as usize;
    }
    acc
}

// two-word keys compared as (hi, lo) tuples
fn dot_pairs(ka: &[u64], ca: &[u32], kb: &[u64], cb: &[u32]) -> u64 {
    let (mut i, mut j) = (0, 0);
    let mut acc = 0u64;
    while i < ca.len() && j < cb.len() {
        let x = (ka[2 * i], ka[2 * i + 1]);
        let y = (kb[2 * j], kb[2 * j + 1]);
        if x == y {
            acc += ca[i] as u64 * cb[j] as u64;
        }
        i += (x <= y) as usize;
        j += (y <= x) as usize;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_starts_skip_ambiguity() {
        let codes = encode(b"ACNGTA");
        assert_eq!(clean_starts(&codes, 2), vec![0, 3, 4]);
        assert_eq!(clean_starts(&codes, 7), Vec::<usize>::new());
    }

    #[test]
    fn ball_sizes() {
        assert_eq!(mismatch_ball_size(5, 0), 1);
        assert_eq!(mismatch_ball_size(5, 1), 16);
        assert_eq!(mismatch_ball_size(4, 2), 1 + 12 + 54);
        assert_eq!(mismatch_ball_size(3, 9), 64);
        let mut n = 0;
        enumerate_ball(&mut [0, 1, 2, 3], 0, 2, &mut |_| n += 1);
        assert_eq!(n, mismatch_ball_size(4, 2));
    }

    #[test]
    fn explicit_mismatch_matches_trie() {
        use crate::seqkernel::{mismatch_dot, MismatchIndex};
        let a = encode(b"ACGTTGCAACGTAGGCTTAGNACGT");
        let b = encode(b"TTGCAACGTTGGCATGCAACGGT");
        for (k, m) in [(3, 0), (3, 1), (4, 2), (5, 1), (6, 3)] {
            let explicit = SparseFeatures::mismatch(&a, k, m).dot(&SparseFeatures::mismatch(&b, k, m));
            let trie = mismatch_dot(&MismatchIndex::new(a.clone(), k), &MismatchIndex::new(b.clone(), k), k, m);
            assert_eq!(explicit, trie, "k={k} m={m}");
        }
    }

    #[test]
    fn overlapping_occurrences_counted() {
        let f = SparseFeatures::spectrum(&encode(b"AAA"), 2);
        assert_eq!(f.n_features(), 1);
        assert_eq!(f.dot(&f), 4);
    }

    #[test]
    fn long_keys_span_words() {
        let s: Vec<u8> = b"ACGT".iter().cycle().take(140).copied().collect();
        let a = SparseFeatures::spectrum(&encode(&s), 70);
        // period-4 sequence: 4 distinct 70-mers, 71 windows
        assert_eq!(a.n_features(), 4);
        let mut other = s.clone();
        other[100] = b'C';
        let b = SparseFeatures::spectrum(&encode(&other), 70);
        assert!(a.dot(&b) < a.dot(&a));
    }
}
