use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// String-kernel family. The declaration order doubles as the tie-break
/// order used in model selection: Spectrum < GappyPair < Mismatch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KmerVariant {
    Spectrum,
    GappyPair,
    Mismatch,
}

impl fmt::Display for KmerVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KmerVariant::Spectrum => "spectrum",
            KmerVariant::GappyPair => "gappy",
            KmerVariant::Mismatch => "mismatch",
        })
    }
}

impl FromStr for KmerVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "spectrum" => Ok(KmerVariant::Spectrum),
            "mismatch" => Ok(KmerVariant::Mismatch),
            "gappy" | "gappypair" | "gappy_pair" | "gappy-pair" => Ok(KmerVariant::GappyPair),
            other => Err(Error::Config(format!("unknown string kernel variant `{other}`"))),
        }
    }
}

/// Hyperparameters of a string kernel. Serialized as its tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct KmerConfig {
    pub variant: KmerVariant,
    pub k: usize,
    /// Allowed mismatches (Mismatch only).
    pub m: usize,
    /// Maximum gap between the two k-mers (GappyPair only).
    pub g: usize,
}

impl KmerConfig {
    pub fn spectrum(k: usize) -> Self {
        KmerConfig {
            variant: KmerVariant::Spectrum,
            k,
            m: 0,
            g: 0,
        }
    }

    pub fn mismatch(k: usize, m: usize) -> Self {
        KmerConfig {
            variant: KmerVariant::Mismatch,
            k,
            m,
            g: 0,
        }
    }

    pub fn gappy_pair(k: usize, g: usize) -> Self {
        KmerConfig {
            variant: KmerVariant::GappyPair,
            k,
            m: 0,
            g,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k-mer length must be at least 1".into()));
        }
        if self.variant == KmerVariant::Mismatch && (self.m == 0 || self.m >= self.k) {
            return Err(Error::Config(format!(
                "mismatch kernel needs 1 <= m <= k-1, got k={} m={}",
                self.k, self.m
            )));
        }
        Ok(())
    }

    /// Short tag such as `spectrum_k30`, `mismatch_k8_m1`, `gappy_k4_g2`.
    pub fn tag(&self) -> String {
        match self.variant {
            KmerVariant::Spectrum => format!("spectrum_k{}", self.k),
            KmerVariant::Mismatch => format!("mismatch_k{}_m{}", self.k, self.m),
            KmerVariant::GappyPair => format!("gappy_k{}_g{}", self.k, self.g),
        }
    }
}

impl fmt::Display for KmerConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tag())
    }
}

impl FromStr for KmerConfig {
    type Err = Error;

    /// Parses a tag as produced by [`KmerConfig::tag`].
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("cannot parse string kernel tag `{s}`"));
        let mut parts = s.split('_');
        let variant: KmerVariant = parts.next().ok_or_else(bad)?.parse()?;
        let mut field = |prefix: char| -> Result<usize> {
            parts
                .next()
                .and_then(|p| p.strip_prefix(prefix))
                .and_then(|v| v.parse().ok())
                .ok_or_else(bad)
        };
        let k = field('k')?;
        let cfg = match variant {
            KmerVariant::Spectrum => KmerConfig::spectrum(k),
            KmerVariant::Mismatch => KmerConfig::mismatch(k, field('m')?),
            KmerVariant::GappyPair => KmerConfig::gappy_pair(k, field('g')?),
        };
        if parts.next().is_some() {
            return Err(bad());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl TryFrom<String> for KmerConfig {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<KmerConfig> for String {
    fn from(c: KmerConfig) -> String {
        c.tag()
    }
}
