use std::collections::HashSet;
use std::io::BufRead;

use crate::error::{Error, Result};

/// How strictly nucleotide symbols are validated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    /// Only A, C, G and T are accepted.
    #[default]
    Strict,
    /// IUPAC ambiguity codes are kept; k-mers touching them match nothing.
    Lenient,
}

/// One representative sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceRecord {
    pub id: String,
    /// Uppercased nucleotides.
    pub bases: Vec<u8>,
    /// Set when the sequence carries at least one non-ACGT IUPAC symbol.
    pub has_ambiguity: bool,
}

impl SequenceRecord {
    pub fn new(id: impl Into<String>, bases: impl AsRef<[u8]>) -> Self {
        let bases: Vec<u8> = bases.as_ref().to_ascii_uppercase();
        let has_ambiguity = bases.iter().any(|b| !is_acgt(*b));
        SequenceRecord {
            id: id.into(),
            bases,
            has_ambiguity,
        }
    }

    pub fn len(&self) -> usize {
        self.bases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bases.is_empty()
    }
}

pub(crate) fn is_acgt(b: u8) -> bool {
    matches!(b, b'A' | b'C' | b'G' | b'T')
}

fn is_iupac(b: u8) -> bool {
    matches!(
        b,
        b'A' | b'C'
            | b'G'
            | b'T'
            | b'U'
            | b'R'
            | b'Y'
            | b'S'
            | b'W'
            | b'K'
            | b'M'
            | b'B'
            | b'D'
            | b'H'
            | b'V'
            | b'N'
    )
}

/// Parse FASTA records from a reader. Records keep file order, multi-line
/// sequences are concatenated and bases uppercased.
pub fn parse_fasta<R: BufRead>(reader: R, mode: ParseMode) -> Result<Vec<SequenceRecord>> {
    let mut records: Vec<SequenceRecord> = Vec::new();
    let mut seen = HashSet::new();
    let mut current: Option<(String, Vec<u8>, usize)> = None;

    let finish = |rec: Option<(String, Vec<u8>, usize)>,
                  records: &mut Vec<SequenceRecord>,
                  seen: &mut HashSet<String>|
     -> Result<()> {
        if let Some((id, bases, line)) = rec {
            if bases.is_empty() {
                return Err(Error::parse("FASTA", line, format!("empty sequence for `{id}`")));
            }
            if !seen.insert(id.clone()) {
                return Err(Error::DuplicateId(id));
            }
            records.push(SequenceRecord::new(id, bases));
        }
        Ok(())
    };

    for (lineno, line) in reader.split(b'\n').enumerate() {
        let lineno = lineno + 1;
        let mut line = line?;
        if line.last() == Some(&b'\r') {
            line.pop();
        }
        if let Some(header) = line.strip_prefix(b">") {
            finish(current.take(), &mut records, &mut seen)?;
            let header = String::from_utf8_lossy(header);
            let id = header.split_whitespace().next().unwrap_or("").to_string();
            if id.is_empty() {
                return Err(Error::parse("FASTA", lineno, "record with empty identifier"));
            }
            current = Some((id, Vec::new(), lineno));
            continue;
        }
        let trimmed: Vec<u8> = line
            .iter()
            .copied()
            .filter(|b| !b.is_ascii_whitespace())
            .collect();
        if trimmed.is_empty() {
            continue;
        }
        let Some((_, bases, _)) = current.as_mut() else {
            return Err(Error::parse("FASTA", lineno, "sequence data before first '>' header"));
        };
        for b in trimmed {
            let up = b.to_ascii_uppercase();
            if !is_iupac(up) {
                return Err(Error::parse(
                    "FASTA",
                    lineno,
                    format!("invalid nucleotide symbol {:?}", b as char),
                ));
            }
            if mode == ParseMode::Strict && !is_acgt(up) {
                return Err(Error::parse(
                    "FASTA",
                    lineno,
                    format!("ambiguity code {:?} rejected in strict mode", b as char),
                ));
            }
            bases.push(up);
        }
    }
    finish(current.take(), &mut records, &mut seen)?;
    Ok(records)
}

/// Convenience wrapper over an in-memory string.
pub fn parse_fasta_str(text: &str, mode: ParseMode) -> Result<Vec<SequenceRecord>> {
    parse_fasta(text.as_bytes(), mode)
}

pub fn write_fasta<W: std::io::Write>(mut out: W, records: &[SequenceRecord]) -> Result<()> {
    for rec in records {
        writeln!(out, ">{}", rec.id)?;
        for chunk in rec.bases.chunks(70) {
            out.write_all(chunk)?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}
