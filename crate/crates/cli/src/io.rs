//! Small file formats owned by the CLI: sample labels, trait values and
//! prediction tables, plus atomic output writing.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use phylokern::Error;
use serde::Serialize;

use crate::CliResult;

/// Writes through a sibling temp file and renames on success, so a failed
/// command never leaves a truncated output behind.
pub fn write_atomic(path: &Path, f: impl FnOnce(&mut dyn Write) -> phylokern::Result<()>) -> CliResult<()> {
    let tmp = tmp_path(path);
    let result = (|| -> phylokern::Result<()> {
        let mut w = BufWriter::new(File::create(&tmp).map_err(|e| Error::io_at(path, e))?);
        f(&mut w)?;
        w.flush()?;
        Ok(())
    })();
    match result {
        Ok(()) => {
            std::fs::rename(&tmp, path).map_err(Error::from)?;
            Ok(())
        }
        Err(e) => {
            let _ = std::fs::remove_file(&tmp);
            Err(e.into())
        }
    }
}

fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".partial");
    path.with_file_name(name)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)?;
        Ok(())
    })
}

pub fn open(path: &Path) -> CliResult<std::io::BufReader<File>> {
    Ok(std::io::BufReader::new(File::open(path).map_err(|e| Error::io_at(path, e))?))
}

pub fn read_text(path: &Path) -> CliResult<String> {
    Ok(std::fs::read_to_string(path).map_err(|e| Error::io_at(path, e))?)
}

fn tsv_reader(path: &Path) -> CliResult<csv::Reader<std::io::BufReader<File>>> {
    let file = open(path)?;
    Ok(csv::ReaderBuilder::new().delimiter(b'\t').has_headers(true).from_reader(file))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::InvalidData(format!("{}: line {line}: {e}", path.display()))
}

/// Two-column TSV with a header row: sample id, then a string value.
pub fn read_two_column(path: &Path) -> CliResult<Vec<(String, String)>> {
    let mut rdr = tsv_reader(path)?;
    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        if rec.len() != 2 {
            return Err(Error::InvalidData(format!(
                "{}: expected 2 columns, found {}",
                path.display(),
                rec.len()
            ))
            .into());
        }
        let id = rec[0].to_string();
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateId(id).into());
        }
        out.push((id, rec[1].to_string()));
    }
    if out.is_empty() {
        return Err(Error::InvalidData(format!("{}: no rows", path.display())).into());
    }
    Ok(out)
}

/// Trait values keyed by sample id.
pub fn read_values(path: &Path) -> CliResult<Vec<(String, f64)>> {
    read_two_column(path)?
        .into_iter()
        .map(|(id, v)| {
            let x = parse_value(&v)
                .ok_or_else(|| Error::InvalidData(format!("{}: value `{v}` for `{id}` is not a number", path.display())))?;
            Ok((id, x))
        })
        .collect()
}

fn parse_value(v: &str) -> Option<f64> {
    match v {
        "true" | "TRUE" | "True" => Some(1.0),
        "false" | "FALSE" | "False" => Some(0.0),
        _ => v.parse::<f64>().ok().filter(|x| x.is_finite()),
    }
}

/// Writes a header plus one row per record, tab separated.
pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> CliResult<()> {
    write_atomic(path, |w| {
        let mut wtr = csv::WriterBuilder::new().delimiter(b'\t').from_writer(w);
        for r in rows {
            wtr.serialize(r).map_err(|e| Error::InvalidData(e.to_string()))?;
        }
        wtr.flush()?;
        Ok(())
    })
}

/// Pretty JSON on standard output. A closed pipe (`| head`) is not an error.
pub fn print_json<T: Serialize>(value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(Error::from)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Error::from(e).into()),
        _ => Ok(()),
    }
}
