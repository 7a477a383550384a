//! String kernels between representative sequences and the OTU similarity
//! matrix `S` they induce.
//!
//! Three feature maps are supported:
//!
//! * **Spectrum**: one coordinate per k-mer, counting its occurrences
//!   (overlapping occurrences all count).
//! * **Mismatch**: one coordinate per k-mer `u`, counting the k-mers of the
//!   sequence within Hamming distance `m` of `u`.
//! * **GappyPair**: one coordinate per triple `(a, j, b)`, counting positions
//!   where k-mer `a` is followed, after exactly `j <= g` arbitrary symbols, by
//!   k-mer `b`.
//!
//! K-mers containing an ambiguity code contribute to no coordinate, and a
//! sequence shorter than the window simply has an empty feature map.

mod brute;
mod config;
mod features;
mod mismatch;

pub use brute::{brute_force_entry, brute_force_raw};
pub use config::{KmerConfig, KmerVariant};
pub use features::SparseFeatures;
pub use mismatch::{mismatch_dot, MismatchIndex};

use std::io::{Read, Write};

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::bioio::SequenceRecord;
use crate::error::{Error, Result};
use crate::linalg;
use crate::matrix_io;

/// Per-sequence precomputed feature representation.
#[derive(Debug, Clone)]
pub enum SequenceFeatures {
    Sparse(SparseFeatures),
    Mismatch(MismatchIndex),
}

impl SequenceFeatures {
    pub fn new(bases: &[u8], cfg: &KmerConfig) -> Self {
        let codes = features::encode(bases);
        match cfg.variant {
            KmerVariant::Spectrum => SequenceFeatures::Sparse(SparseFeatures::spectrum(&codes, cfg.k)),
            KmerVariant::GappyPair => {
                SequenceFeatures::Sparse(SparseFeatures::gappy_pair(&codes, cfg.k, cfg.g))
            }
            KmerVariant::Mismatch => SequenceFeatures::Mismatch(MismatchIndex::new(codes, cfg.k)),
        }
    }

    /// Like [`SequenceFeatures::new`] but enumerates Mismatch features
    /// explicitly, trading memory for a much faster all-pairs build.
    fn new_explicit(bases: &[u8], cfg: &KmerConfig) -> Self {
        match cfg.variant {
            KmerVariant::Mismatch => {
                SequenceFeatures::Sparse(SparseFeatures::mismatch(&features::encode(bases), cfg.k, cfg.m))
            }
            _ => Self::new(bases, cfg),
        }
    }

    fn dot(&self, other: &SequenceFeatures, cfg: &KmerConfig) -> u64 {
        match (self, other) {
            (SequenceFeatures::Sparse(a), SequenceFeatures::Sparse(b)) => a.dot(b),
            (SequenceFeatures::Mismatch(a), SequenceFeatures::Mismatch(b)) => {
                mismatch_dot(a, b, cfg.k, cfg.m)
            }
            _ => panic!("feature representations built from different configurations"),
        }
    }
}

/// Exact kernel value `q(z, z')` for one pair of sequences.
pub fn kernel_entry(z: &SequenceRecord, z_prime: &SequenceRecord, cfg: &KmerConfig) -> Result<u64> {
    cfg.validate()?;
    let a = SequenceFeatures::new(&z.bases, cfg);
    let b = SequenceFeatures::new(&z_prime.bases, cfg);
    Ok(a.dot(&b, cfg))
}

/// OTU-by-OTU string-kernel matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub otu_ids: Vec<String>,
    pub values: DMatrix<f64>,
    /// `None` when loaded from a file that does not record the kernel.
    pub config: Option<KmerConfig>,
}

impl SimilarityMatrix {
    pub fn len(&self) -> usize {
        self.otu_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.otu_ids.is_empty()
    }

    pub fn identity(otu_ids: Vec<String>) -> Self {
        let p = otu_ids.len();
        SimilarityMatrix {
            otu_ids,
            values: DMatrix::identity(p, p),
            config: None,
        }
    }

    /// Wraps an arbitrary matrix after checking shape and symmetry.
    pub fn from_values(otu_ids: Vec<String>, values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() != otu_ids.len() || !values.is_square() {
            return Err(Error::Dimension(format!(
                "{}x{} similarity matrix for {} OTUs",
                values.nrows(),
                values.ncols(),
                otu_ids.len()
            )));
        }
        if !linalg::is_symmetric(&values) {
            return Err(Error::InvalidData("similarity matrix is not symmetric".into()));
        }
        Ok(SimilarityMatrix {
            otu_ids,
            values,
            config: None,
        })
    }

    /// Cosine-normalized copy: `q(z,z') / sqrt(q(z,z) q(z',z'))`, with rows of
    /// zero self-similarity left at zero.
    pub fn cosine_normalized(&self) -> SimilarityMatrix {
        let d: Vec<f64> = (0..self.len()).map(|i| self.values[(i, i)].sqrt()).collect();
        let values = DMatrix::from_fn(self.len(), self.len(), |i, j| {
            if d[i] > 0.0 && d[j] > 0.0 {
                self.values[(i, j)] / (d[i] * d[j])
            } else {
                0.0
            }
        });
        SimilarityMatrix {
            otu_ids: self.otu_ids.clone(),
            values,
            config: self.config,
        }
    }

    pub fn is_psd(&self) -> bool {
        linalg::is_psd(&self.values)
    }

    pub fn write_tsv<W: Write>(&self, out: W) -> Result<()> {
        matrix_io::write_tsv(out, &self.otu_ids, &self.values)
    }

    pub fn write_binary<W: Write>(&self, out: W) -> Result<()> {
        matrix_io::write_binary(out, matrix_io::SIMILARITY_MAGIC, &self.otu_ids, &self.values)
    }

    pub fn read_binary<R: Read>(input: R) -> Result<Self> {
        let (ids, values) = matrix_io::read_binary(input, matrix_io::SIMILARITY_MAGIC)?;
        Self::from_values(ids, values)
    }

    /// Reads either container format.
    pub fn read_file(path: &std::path::Path) -> Result<Self> {
        let (ids, values) = matrix_io::read_matrix_file(path, matrix_io::SIMILARITY_MAGIC)?;
        Self::from_values(ids, values)
    }
}

/// Upper bound on the packed words held by explicit Mismatch feature maps
/// (2^25 words = 256 MiB) before falling back to the trie traversal.
const EXPLICIT_MISMATCH_WORDS: usize = 1 << 25;

/// Builds `S` with `S[i][j] = q(z_i, z_j)`.
///
/// Features are extracted once per sequence, then the upper triangle is
/// filled in parallel, one task per row. Every entry is an exact integer
/// computed independently, so the result does not depend on the thread count.
pub fn build_similarity_matrix(seqs: &[SequenceRecord], cfg: &KmerConfig) -> Result<SimilarityMatrix> {
    cfg.validate()?;
    if seqs.is_empty() {
        return Err(Error::InvalidData("no sequences to compare".into()));
    }
    // explicit Mismatch features when their total size stays within budget
    let explicit = cfg.variant == KmerVariant::Mismatch && {
        let windows: usize = seqs.iter().map(|s| (s.bases.len() + 1).saturating_sub(cfg.k)).sum();
        windows
            .saturating_mul(features::mismatch_ball_size(cfg.k, cfg.m))
            .saturating_mul(cfg.k.div_ceil(32))
            <= EXPLICIT_MISMATCH_WORDS
    };
    let feats: Vec<SequenceFeatures> = seqs
        .par_iter()
        .map(|s| {
            if explicit {
                SequenceFeatures::new_explicit(&s.bases, cfg)
            } else {
                SequenceFeatures::new(&s.bases, cfg)
            }
        })
        .collect();
    let p = seqs.len();
    let rows: Vec<Vec<u64>> = (0..p)
        .into_par_iter()
        .map(|i| (i..p).map(|j| feats[i].dot(&feats[j], cfg)).collect())
        .collect();
    let mut values = DMatrix::zeros(p, p);
    for (i, row) in rows.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            values[(i, i + off)] = v as f64;
        }
    }
    linalg::symmetrize_from_upper(&mut values);
    Ok(SimilarityMatrix {
        otu_ids: seqs.iter().map(|s| s.id.clone()).collect(),
        values,
        config: Some(*cfg),
    })
}
