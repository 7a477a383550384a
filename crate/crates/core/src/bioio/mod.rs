//! Readers and writers for the three dataset components (representative
//! sequences, phylogenetic tree, OTU count table) plus cophenetic distances.

mod align;
mod cophenetic;
mod fasta;
mod newick;
mod table;

pub use align::{align_dataset, Dataset};
pub use cophenetic::{cophenetic, CopheneticMatrix};
pub use fasta::{parse_fasta, parse_fasta_str, write_fasta, ParseMode, SequenceRecord};
pub use newick::{parse_newick, Node, NodeId, PhyloTree};
pub use table::{parse_otu_table, parse_otu_table_str, OtuTable};

use std::io::BufReader;
use std::path::Path;

use crate::error::Result;

/// Reads and aligns a dataset from disk.
pub fn load_dataset(
    fasta: &Path,
    tree: &Path,
    table: &Path,
    mode: ParseMode,
) -> Result<Dataset> {
    let sequences = parse_fasta(BufReader::new(std::fs::File::open(fasta)?), mode)?;
    let tree = parse_newick(&std::fs::read_to_string(tree)?)?;
    let table = parse_otu_table(BufReader::new(std::fs::File::open(table)?))?;
    align_dataset(sequences, tree, table, mode)
}
