//! Desk-scale simulation studies: two-sample rejection rates across ε
//! (figure1), the phylogenetic sensitivity of MMD² (figure2) and GP
//! training objectives for string vs linear kernels (figure3). Each study
//! writes one tidy CSV row per (kernel, condition, replicate).
//!
//! Every replicate draws a fresh synthetic dataset and all randomness is
//! keyed by (seed, study, replicate, ...), so output does not depend on the
//! number of worker threads.

mod figure1;
mod figure2;
mod figure3;

pub use figure1::{run_figure1, Figure1Config, Figure1Row};
pub use figure2::{run_figure2, Figure2Config, Figure2Row};
pub use figure3::{run_figure3, Figure3Config, Figure3Row, TaskSpec};

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bioio::{OtuTable, SequenceRecord};
use crate::error::{Error, Result};
use crate::samplekernel::{
    linear_kernel, rbf_median_kernel, stringphylo_kernel, transform, unifrac_kernel,
    CenteringOptions, Transform, UnifracMode, DEFAULT_PSEUDOCOUNT,
};
use crate::seqkernel::{build_similarity_matrix, KmerConfig, SimilarityMatrix};
use crate::simgen::SyntheticDataset;

/// Version of the experiment config JSON layout.
pub const CONFIG_SCHEMA_VERSION: u32 = 1;

/// A sample-level kernel used in the studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SampleKernelSpec {
    String(KmerConfig),
    Linear,
    Rbf,
    UnifracU,
    UnifracW,
}

impl SampleKernelSpec {
    /// Count transform applied before the kernel: CLR (pseudocount 1) for
    /// string, linear and RBF kernels, log1p for unweighted UniFrac,
    /// relative abundance for weighted UniFrac.
    pub fn transform(&self) -> Transform {
        match self {
            SampleKernelSpec::String(_) | SampleKernelSpec::Linear | SampleKernelSpec::Rbf => Transform::Clr,
            SampleKernelSpec::UnifracU => Transform::Log1p,
            SampleKernelSpec::UnifracW => Transform::Relative,
        }
    }
}

impl fmt::Display for SampleKernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SampleKernelSpec::String(c) => write!(f, "{}", c.tag()),
            SampleKernelSpec::Linear => f.write_str("linear"),
            SampleKernelSpec::Rbf => f.write_str("rbf"),
            SampleKernelSpec::UnifracU => f.write_str("unifrac_u"),
            SampleKernelSpec::UnifracW => f.write_str("unifrac_w"),
        }
    }
}

impl FromStr for SampleKernelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "linear" => SampleKernelSpec::Linear,
            "rbf" => SampleKernelSpec::Rbf,
            "unifrac_u" => SampleKernelSpec::UnifracU,
            "unifrac_w" => SampleKernelSpec::UnifracW,
            tag => SampleKernelSpec::String(tag.parse()?),
        })
    }
}

impl TryFrom<String> for SampleKernelSpec {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SampleKernelSpec> for String {
    fn from(k: SampleKernelSpec) -> String {
        k.to_string()
    }
}

/// Per-dataset state shared by all kernel evaluations: OTU similarity
/// matrices and root-path lengths.
pub struct KernelContext {
    similarity: HashMap<KmerConfig, SimilarityMatrix>,
    root_lengths: Option<Vec<f64>>,
}

impl KernelContext {
    pub fn new(
        sequences: &[SequenceRecord],
        root_lengths: Option<Vec<f64>>,
        kernels: &[SampleKernelSpec],
    ) -> Result<Self> {
        let mut similarity = HashMap::new();
        for k in kernels {
            if let SampleKernelSpec::String(cfg) = k {
                if !similarity.contains_key(cfg) {
                    similarity.insert(*cfg, build_similarity_matrix(sequences, cfg)?);
                }
            }
        }
        Ok(KernelContext {
            similarity,
            root_lengths,
        })
    }

    pub fn for_synthetic(data: &SyntheticDataset, kernels: &[SampleKernelSpec]) -> Result<Self> {
        let lengths = data.tree.root_path_lengths(&data.otu_ids())?;
        Self::new(&data.sequences, Some(lengths), kernels)
    }

    /// Gram matrix of `spec` over the rows of `table`, using the kernel's
    /// default count transform.
    pub fn kernel(&self, table: &OtuTable, spec: SampleKernelSpec) -> Result<DMatrix<f64>> {
        self.kernel_with(table, spec, spec.transform())
    }

    /// Gram matrix of `spec` after an explicit count transform.
    pub fn kernel_with(&self, table: &OtuTable, spec: SampleKernelSpec, tr: Transform) -> Result<DMatrix<f64>> {
        let a = transform(table, tr, DEFAULT_PSEUDOCOUNT)?;
        let lengths = || {
            self.root_lengths
                .as_deref()
                .ok_or_else(|| Error::Config(format!("{spec} kernel needs a tree")))
        };
        Ok(match spec {
            SampleKernelSpec::String(cfg) => {
                let s = self
                    .similarity
                    .get(&cfg)
                    .ok_or_else(|| Error::Config(format!("similarity matrix for {cfg} not built")))?;
                stringphylo_kernel(&a, s)?.values
            }
            SampleKernelSpec::Linear => linear_kernel(&a).values,
            SampleKernelSpec::Rbf => rbf_median_kernel(&a)?.values,
            SampleKernelSpec::UnifracU => {
                unifrac_kernel(&a, lengths()?, UnifracMode::Unweighted, CenteringOptions::default())?.values
            }
            SampleKernelSpec::UnifracW => {
                unifrac_kernel(&a, lengths()?, UnifracMode::Weighted, CenteringOptions::default())?.values
            }
        })
    }
}

/// Writes rows as CSV with a header.
pub fn write_csv<W: std::io::Write, T: Serialize>(out: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| Error::InvalidData(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

// stream labels separating the studies
const FIGURE1: u64 = 1;
const FIGURE2: u64 = 2;
const FIGURE3: u64 = 3;
