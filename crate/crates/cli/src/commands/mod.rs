pub mod experiment;
pub mod gp;
pub mod kernel;
pub mod mmd;
pub mod simulate;
pub mod tree;

use clap::ValueEnum;

/// Matrix container written by the kernel commands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MatrixFormat {
    /// Labelled tab-separated text, exact round trip.
    Tsv,
    /// Compact little-endian binary container.
    Binary,
}
