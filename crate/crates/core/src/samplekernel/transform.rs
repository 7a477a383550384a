use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bioio::OtuTable;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    Raw,
    Clr,
    Log1p,
    Relative,
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Transform::Raw => "raw",
            Transform::Clr => "clr",
            Transform::Log1p => "log1p",
            Transform::Relative => "relative",
        })
    }
}

impl FromStr for Transform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(Transform::Raw),
            "clr" => Ok(Transform::Clr),
            "log1p" => Ok(Transform::Log1p),
            "relative" => Ok(Transform::Relative),
            other => Err(Error::Config(format!("unknown transform `{other}`"))),
        }
    }
}

/// Default CLR pseudocount, added to every count before the transform.
pub const DEFAULT_PSEUDOCOUNT: f64 = 1.0;

/// Real-valued sample-by-OTU matrix derived from counts.
#[derive(Debug, Clone, PartialEq)]
pub struct AbundanceMatrix {
    pub sample_ids: Vec<String>,
    pub otu_ids: Vec<String>,
    pub values: DMatrix<f64>,
    pub transform: Transform,
}

impl AbundanceMatrix {
    pub fn n_samples(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_otus(&self) -> usize {
        self.values.ncols()
    }
}

/// Applies a count transform row by row.
///
/// * `clr`: `log((x_j + c) / g(x + c))` with `g` the geometric mean; needs
///   `c > 0` whenever a zero count is present.
/// * `log1p`: `log(x + 1)` elementwise.
/// * `relative`: counts divided by the row total.
/// * `raw`: counts as reals.
pub fn transform(table: &OtuTable, mode: Transform, pseudocount: f64) -> Result<AbundanceMatrix> {
    let (n, p) = (table.n_samples(), table.n_otus());
    let mut values = DMatrix::zeros(n, p);
    match mode {
        Transform::Raw => {
            for i in 0..n {
                for j in 0..p {
                    values[(i, j)] = table.get(i, j) as f64;
                }
            }
        }
        Transform::Log1p => {
            for i in 0..n {
                for j in 0..p {
                    values[(i, j)] = (table.get(i, j) as f64).ln_1p();
                }
            }
        }
        Transform::Relative => {
            for (i, row) in table.rows().enumerate() {
                let total: u64 = row.iter().sum();
                if total == 0 {
                    return Err(Error::InvalidData(format!(
                        "sample `{}` has no reads; relative abundance undefined",
                        table.sample_ids()[i]
                    )));
                }
                for (j, &c) in row.iter().enumerate() {
                    values[(i, j)] = c as f64 / total as f64;
                }
            }
        }
        Transform::Clr => {
            if !(pseudocount >= 0.0 && pseudocount.is_finite()) {
                return Err(Error::Config(format!("invalid CLR pseudocount {pseudocount}")));
            }
            for (i, row) in table.rows().enumerate() {
                if pseudocount == 0.0 && row.contains(&0) {
                    return Err(Error::Config(format!(
                        "sample `{}` has zero counts; CLR needs a positive pseudocount",
                        table.sample_ids()[i]
                    )));
                }
                let logs: Vec<f64> = row.iter().map(|&c| (c as f64 + pseudocount).ln()).collect();
                let mean = logs.iter().sum::<f64>() / p as f64;
                for (j, l) in logs.into_iter().enumerate() {
                    values[(i, j)] = l - mean;
                }
            }
        }
    }
    Ok(AbundanceMatrix {
        sample_ids: table.sample_ids().to_vec(),
        otu_ids: table.otu_ids().to_vec(),
        values,
        transform: mode,
    })
}
