use std::collections::HashSet;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// Non-negative integer OTU count matrix, samples in rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OtuTable {
    sample_ids: Vec<String>,
    otu_ids: Vec<String>,
    /// Row-major `n x p`.
    counts: Vec<u64>,
}

fn check_unique(ids: &[String]) -> Result<()> {
    let mut seen = HashSet::with_capacity(ids.len());
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::DuplicateId(id.clone()));
        }
    }
    Ok(())
}

impl OtuTable {
    pub fn new(sample_ids: Vec<String>, otu_ids: Vec<String>, counts: Vec<u64>) -> Result<Self> {
        check_unique(&sample_ids)?;
        check_unique(&otu_ids)?;
        if counts.len() != sample_ids.len() * otu_ids.len() {
            return Err(Error::Dimension(format!(
                "{} counts for a {}x{} table",
                counts.len(),
                sample_ids.len(),
                otu_ids.len()
            )));
        }
        Ok(OtuTable {
            sample_ids,
            otu_ids,
            counts,
        })
    }

    pub fn from_rows(sample_ids: Vec<String>, otu_ids: Vec<String>, rows: Vec<Vec<u64>>) -> Result<Self> {
        let p = otu_ids.len();
        if let Some(bad) = rows.iter().position(|r| r.len() != p) {
            return Err(Error::Dimension(format!(
                "row {bad} has {} entries, expected {p}",
                rows[bad].len()
            )));
        }
        Self::new(sample_ids, otu_ids, rows.into_iter().flatten().collect())
    }

    pub fn n_samples(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn n_otus(&self) -> usize {
        self.otu_ids.len()
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn otu_ids(&self) -> &[String] {
        &self.otu_ids
    }

    pub fn get(&self, sample: usize, otu: usize) -> u64 {
        self.counts[sample * self.otu_ids.len() + otu]
    }

    pub fn row(&self, sample: usize) -> &[u64] {
        let p = self.otu_ids.len();
        &self.counts[sample * p..(sample + 1) * p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u64]> {
        self.counts.chunks(self.otu_ids.len().max(1)).take(self.sample_ids.len())
    }

    pub fn row_totals(&self) -> Vec<u64> {
        self.rows().map(|r| r.iter().sum()).collect()
    }

    /// Keeps the given OTU columns, in the given order.
    pub fn select_otus(&self, columns: &[usize]) -> OtuTable {
        let otu_ids = columns.iter().map(|&j| self.otu_ids[j].clone()).collect();
        let counts = self
            .rows()
            .flat_map(|r| columns.iter().map(move |&j| r[j]))
            .collect();
        OtuTable {
            sample_ids: self.sample_ids.clone(),
            otu_ids,
            counts,
        }
    }

    /// Keeps the given sample rows, in the given order.
    pub fn select_samples(&self, rows: &[usize]) -> OtuTable {
        let sample_ids = rows.iter().map(|&i| self.sample_ids[i].clone()).collect();
        let counts = rows.iter().flat_map(|&i| self.row(i).iter().copied()).collect();
        OtuTable {
            sample_ids,
            otu_ids: self.otu_ids.clone(),
            counts,
        }
    }

    /// Stacks two tables with identical OTU columns.
    pub fn vstack(&self, other: &OtuTable) -> Result<OtuTable> {
        if self.otu_ids != other.otu_ids {
            return Err(Error::Dimension("tables have different OTU columns".into()));
        }
        let mut sample_ids = self.sample_ids.clone();
        sample_ids.extend(other.sample_ids.iter().cloned());
        let mut counts = self.counts.clone();
        counts.extend_from_slice(&other.counts);
        OtuTable::new(sample_ids, self.otu_ids.clone(), counts)
    }

    pub fn write_tsv<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "sample")?;
        for id in &self.otu_ids {
            write!(out, "\t{id}")?;
        }
        writeln!(out)?;
        for (sid, row) in self.sample_ids.iter().zip(self.rows()) {
            write!(out, "{sid}")?;
            for c in row {
                write!(out, "\t{c}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn to_tsv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_tsv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("ids are UTF-8")
    }
}

/// Parses a tab-separated OTU table: the header row holds OTU ids after a
/// leading corner cell, each following row is a sample id then counts.
pub fn parse_otu_table<R: BufRead>(reader: R) -> Result<OtuTable> {
    let mut lines = reader.lines().enumerate();
    let (otu_ids, width) = loop {
        match lines.next() {
            None => return Err(Error::parse("TSV", 1, "empty table")),
            Some((i, line)) => {
                let line = line?;
                let line = line.trim_end_matches('\r');
                if line.trim().is_empty() {
                    continue;
                }
                let fields: Vec<&str> = line.split('\t').collect();
                if fields.len() < 2 {
                    return Err(Error::parse("TSV", i + 1, "header has no OTU columns"));
                }
                let ids: Vec<String> = fields[1..].iter().map(|s| s.trim().to_string()).collect();
                if let Some(blank) = ids.iter().position(|s| s.is_empty()) {
                    return Err(Error::parse("TSV", i + 1, format!("empty OTU id in column {}", blank + 2)));
                }
                break (ids, fields.len());
            }
        }
    };
    let mut sample_ids = Vec::new();
    let mut counts = Vec::new();
    for (i, line) in lines {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != width {
            return Err(Error::parse(
                "TSV",
                i + 1,
                format!("ragged row: {} fields, header has {width}", fields.len()),
            ));
        }
        let sid = fields[0].trim();
        if sid.is_empty() {
            return Err(Error::parse("TSV", i + 1, "empty sample id"));
        }
        sample_ids.push(sid.to_string());
        for cell in &fields[1..] {
            let cell = cell.trim();
            let value: u64 = cell.parse().map_err(|_| {
                Error::parse(
                    "TSV",
                    i + 1,
                    format!("cell {cell:?} is not a non-negative integer"),
                )
            })?;
            counts.push(value);
        }
    }
    OtuTable::new(sample_ids, otu_ids, counts)
}

pub fn parse_otu_table_str(text: &str) -> Result<OtuTable> {
    parse_otu_table(text.as_bytes())
}
