//! Labelled square-matrix serialization shared by similarity and kernel
//! matrices.
//!
//! TSV: a header row `id\t<id_1>\t...\t<id_n>` followed by one row per id.
//! Values are printed in the shortest form that parses back to the same
//! `f64`, so TSV round trips are exact.
//!
//! Binary container, all integers little-endian:
//!
//! ```text
//! magic      4 bytes   "PKS1" (similarity) or "PKK1" (kernel / distance)
//! n          u64
//! ids        n x { len: u32, utf-8 bytes }
//! payload    n*n f64, row-major
//! ```

use std::io::{BufRead, Read, Write};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const SIMILARITY_MAGIC: [u8; 4] = *b"PKS1";
pub const KERNEL_MAGIC: [u8; 4] = *b"PKK1";

pub fn write_tsv<W: Write>(mut out: W, ids: &[String], values: &DMatrix<f64>) -> Result<()> {
    write!(out, "id")?;
    for id in ids {
        write!(out, "\t{id}")?;
    }
    writeln!(out)?;
    for (i, id) in ids.iter().enumerate() {
        write!(out, "{id}")?;
        for j in 0..values.ncols() {
            write!(out, "\t{}", values[(i, j)])?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Reads a square labelled matrix. Row labels must repeat the header labels
/// in the same order.
pub fn read_tsv<R: BufRead>(reader: R) -> Result<(Vec<String>, DMatrix<f64>)> {
    let mut lines = reader
        .lines()
        .enumerate()
        .filter(|(_, l)| l.as_ref().map(|s| !s.trim().is_empty()).unwrap_or(true));
    let header = match lines.next() {
        Some((_, line)) => line?,
        None => return Err(Error::parse("matrix TSV", 1, "empty input")),
    };
    let ids: Vec<String> = header
        .trim_end_matches('\r')
        .split('\t')
        .skip(1)
        .map(|s| s.trim().to_string())
        .collect();
    let n = ids.len();
    let mut values = DMatrix::zeros(n, n);
    let mut row = 0;
    for (lineno, line) in lines {
        let line = line?;
        let fields: Vec<&str> = line.trim_end_matches('\r').split('\t').collect();
        if row >= n {
            return Err(Error::parse("matrix TSV", lineno + 1, "more rows than columns"));
        }
        if fields.len() != n + 1 {
            return Err(Error::parse(
                "matrix TSV",
                lineno + 1,
                format!("expected {} fields, found {}", n + 1, fields.len()),
            ));
        }
        if fields[0].trim() != ids[row] {
            return Err(Error::parse(
                "matrix TSV",
                lineno + 1,
                format!("row label `{}` does not match column `{}`", fields[0], ids[row]),
            ));
        }
        for (j, cell) in fields[1..].iter().enumerate() {
            values[(row, j)] = cell.trim().parse().map_err(|_| {
                Error::parse("matrix TSV", lineno + 1, format!("invalid number {cell:?}"))
            })?;
        }
        row += 1;
    }
    if row != n {
        return Err(Error::parse(
            "matrix TSV",
            row + 2,
            format!("{row} rows for {n} columns"),
        ));
    }
    Ok((ids, values))
}

pub fn write_binary<W: Write>(
    mut out: W,
    magic: [u8; 4],
    ids: &[String],
    values: &DMatrix<f64>,
) -> Result<()> {
    out.write_all(&magic)?;
    out.write_all(&(ids.len() as u64).to_le_bytes())?;
    for id in ids {
        out.write_all(&(id.len() as u32).to_le_bytes())?;
        out.write_all(id.as_bytes())?;
    }
    for i in 0..values.nrows() {
        for j in 0..values.ncols() {
            out.write_all(&values[(i, j)].to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_binary<R: Read>(mut input: R, magic: [u8; 4]) -> Result<(Vec<String>, DMatrix<f64>)> {
    let bad = |msg: &str| Error::InvalidData(format!("binary matrix: {msg}"));
    let mut head = [0u8; 4];
    input.read_exact(&mut head)?;
    if head != magic {
        return Err(bad(&format!(
            "expected magic {:?}, found {:?}",
            String::from_utf8_lossy(&magic),
            String::from_utf8_lossy(&head)
        )));
    }
    let mut u64buf = [0u8; 8];
    input.read_exact(&mut u64buf)?;
    let n = u64::from_le_bytes(u64buf) as usize;
    let mut ids = Vec::with_capacity(n.min(1 << 20));
    for _ in 0..n {
        let mut lenbuf = [0u8; 4];
        input.read_exact(&mut lenbuf)?;
        let mut bytes = vec![0u8; u32::from_le_bytes(lenbuf) as usize];
        input.read_exact(&mut bytes)?;
        ids.push(String::from_utf8(bytes).map_err(|_| bad("id is not UTF-8"))?);
    }
    let mut values = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            input.read_exact(&mut u64buf)?;
            values[(i, j)] = f64::from_le_bytes(u64buf);
        }
    }
    let mut rest = Vec::new();
    input.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(bad("trailing bytes after payload"));
    }
    Ok((ids, values))
}

/// Reads a matrix file, picking the binary reader when the file starts with
/// the expected magic and the TSV reader otherwise.
pub fn read_matrix_file(path: &std::path::Path, magic: [u8; 4]) -> Result<(Vec<String>, DMatrix<f64>)> {
    let bytes = std::fs::read(path).map_err(|e| crate::error::Error::io_at(path, e))?;
    if bytes.starts_with(&magic) {
        read_binary(bytes.as_slice(), magic)
    } else {
        read_tsv(bytes.as_slice())
    }
}
