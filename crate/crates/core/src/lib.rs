//! Phylogeny-aware kernels for 16S rRNA gene sequencing data.

pub mod bioio;
pub mod error;
pub mod gp;
pub mod harness;
pub mod linalg;
pub mod matrix_io;
pub mod mmdtest;
pub mod rng;
pub mod samplekernel;
pub mod seqkernel;
pub mod simgen;

pub use error::{Error, Result};
