//! Mismatch kernel by depth-first traversal of the implicit k-mer trie.
//!
//! Each trie node at depth `d` is a prefix `u[..d]`. Both sequences carry the
//! list of their k-mer occurrences still within the mismatch budget of that
//! prefix. A branch is abandoned as soon as either list empties, so only the
//! populated part of the 4^k trie is ever visited. At a leaf `u` the list
//! sizes are exactly the feature values `h_u(z)` and `h_u(z')`.

use super::features::clean_starts;

/// Occurrence of a k-mer: start position and mismatches spent so far.
#[derive(Clone, Copy)]
struct Live {
    start: u32,
    spent: u8,
}

/// Pre-encoded sequence plus its unambiguous k-mer start positions.
#[derive(Debug, Clone)]
pub struct MismatchIndex {
    codes: Vec<u8>,
    starts: Vec<u32>,
}

impl MismatchIndex {
    pub fn new(codes: Vec<u8>, k: usize) -> Self {
        let starts = clean_starts(&codes, k).into_iter().map(|s| s as u32).collect();
        MismatchIndex { codes, starts }
    }
}

struct Walk<'a> {
    a: &'a MismatchIndex,
    b: &'a MismatchIndex,
    k: usize,
    m: u8,
    // one buffer per depth for each side, reused between siblings
    bufs_a: Vec<Vec<Live>>,
    bufs_b: Vec<Vec<Live>>,
}

impl Walk<'_> {
    fn descend(&mut self, depth: usize) -> u64 {
        if depth == self.k {
            return self.bufs_a[depth].len() as u64 * self.bufs_b[depth].len() as u64;
        }
        let mut total = 0;
        for letter in 0..4u8 {
            if !Self::extend(&mut self.bufs_a, self.a, depth, letter, self.m) {
                continue;
            }
            if !Self::extend(&mut self.bufs_b, self.b, depth, letter, self.m) {
                continue;
            }
            total += self.descend(depth + 1);
        }
        total
    }

    /// Fills `bufs[depth + 1]` with the occurrences of `bufs[depth]` that stay
    /// within budget after appending `letter`. Returns false if none survive.
    fn extend(bufs: &mut [Vec<Live>], seq: &MismatchIndex, depth: usize, letter: u8, m: u8) -> bool {
        let (lo, hi) = bufs.split_at_mut(depth + 1);
        let next = &mut hi[0];
        next.clear();
        for occ in &lo[depth] {
            let spent = occ.spent + (seq.codes[occ.start as usize + depth] != letter) as u8;
            if spent <= m {
                next.push(Live {
                    start: occ.start,
                    spent,
                });
            }
        }
        !next.is_empty()
    }
}

/// Mismatch-kernel value `sum_u h_u(a) h_u(b)` where `h_u` counts k-mers
/// within Hamming distance `m` of `u`. With `m = 0` this is the Spectrum
/// kernel.
pub fn mismatch_dot(a: &MismatchIndex, b: &MismatchIndex, k: usize, m: usize) -> u64 {
    if a.starts.is_empty() || b.starts.is_empty() || k == 0 {
        return 0;
    }
    let m = m.min(k).min(u8::MAX as usize) as u8;
    let root = |idx: &MismatchIndex| -> Vec<Vec<Live>> {
        let mut bufs: Vec<Vec<Live>> = (0..=k).map(|_| Vec::with_capacity(idx.starts.len())).collect();
        bufs[0].extend(idx.starts.iter().map(|&start| Live { start, spent: 0 }));
        bufs
    };
    let mut walk = Walk {
        a,
        b,
        k,
        m,
        bufs_a: root(a),
        bufs_b: root(b),
    };
    walk.descend(0)
}
