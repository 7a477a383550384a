use std::collections::{HashMap, HashSet};

use super::fasta::SequenceRecord;
use super::newick::PhyloTree;
use super::table::OtuTable;
use super::ParseMode;
use crate::error::{Error, Result};

/// Sequences, tree and count table sharing one OTU ordering: the order of
/// the sequence file.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub sequences: Vec<SequenceRecord>,
    pub tree: PhyloTree,
    pub table: OtuTable,
}

impl Dataset {
    pub fn otu_ids(&self) -> &[String] {
        self.table.otu_ids()
    }
}

/// Reconciles OTU ids across the three components.
///
/// Strict mode requires the three id sets to match exactly. Lenient mode keeps
/// the intersection and logs what it dropped. Either way the table columns
/// are permuted into sequence-file order. Tree leaves outside the kept set are
/// left in place; downstream consumers only look up the kept ids.
pub fn align_dataset(
    sequences: Vec<SequenceRecord>,
    tree: PhyloTree,
    table: OtuTable,
    mode: ParseMode,
) -> Result<Dataset> {
    let table_pos: HashMap<&str, usize> = table
        .otu_ids()
        .iter()
        .enumerate()
        .map(|(j, id)| (id.as_str(), j))
        .collect();
    let seq_ids: HashSet<&str> = sequences.iter().map(|s| s.id.as_str()).collect();

    if mode == ParseMode::Strict {
        for s in &sequences {
            if !table_pos.contains_key(s.id.as_str()) {
                return Err(Error::MissingId {
                    id: s.id.clone(),
                    component: "OTU table",
                });
            }
            if tree.leaf(&s.id).is_none() {
                return Err(Error::MissingId {
                    id: s.id.clone(),
                    component: "tree",
                });
            }
        }
        if let Some(extra) = table.otu_ids().iter().find(|id| !seq_ids.contains(id.as_str())) {
            return Err(Error::MissingId {
                id: extra.clone(),
                component: "sequences",
            });
        }
        if let Some(extra) = tree.leaf_labels().into_iter().find(|l| !seq_ids.contains(l)) {
            return Err(Error::MissingId {
                id: extra.to_string(),
                component: "sequences",
            });
        }
    }

    let mut kept = Vec::with_capacity(sequences.len());
    let mut columns = Vec::with_capacity(sequences.len());
    let mut dropped = 0usize;
    for s in sequences {
        match table_pos.get(s.id.as_str()) {
            Some(&j) if tree.leaf(&s.id).is_some() => {
                columns.push(j);
                kept.push(s);
            }
            _ => {
                log::warn!("dropping OTU `{}`: not present in every component", s.id);
                dropped += 1;
            }
        }
    }
    let extra_table = table.n_otus() - columns.len();
    if extra_table > 0 {
        log::warn!("dropping {extra_table} OTU table column(s) without a matching sequence and leaf");
    }
    if kept.is_empty() {
        return Err(Error::InvalidData("no OTU id is shared by all three components".into()));
    }
    if dropped > 0 {
        log::warn!("{dropped} sequence(s) dropped during alignment");
    }
    let table = table.select_otus(&columns);
    Ok(Dataset {
        sequences: kept,
        tree,
        table,
    })
}
