use thiserror::Error;

/// Errors produced anywhere in the pipeline.
///
/// Variants are grouped so callers (the CLI in particular) can map them onto
/// exit codes: malformed input and id mismatches are data errors, bad
/// hyperparameters are configuration errors, failed factorizations and
/// degenerate statistics are numerical errors.
#[derive(Error, Debug)]
pub enum Error {
    #[error("{format} parse error at line {line}: {msg}")]
    Parse {
        format: &'static str,
        line: usize,
        msg: String,
    },
    #[error("duplicate identifier `{0}`")]
    DuplicateId(String),
    #[error("identifier `{id}` missing from {component}")]
    MissingId { id: String, component: &'static str },
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("I/O error")]
    Io(#[from] std::io::Error),
    #[error("JSON error")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(format: &'static str, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            format,
            line,
            msg: msg.into(),
        }
    }

    /// An I/O error whose message names the file involved.
    pub fn io_at(path: &std::path::Path, e: std::io::Error) -> Self {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    }

    /// True when the error stems from bad input data rather than bad
    /// configuration or a numerical breakdown.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::DuplicateId(_)
                | Error::MissingId { .. }
                | Error::InvalidData(_)
                | Error::Dimension(_)
                | Error::Io(_)
                | Error::Json(_)
        )
    }

    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
