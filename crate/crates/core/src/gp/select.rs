use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seqkernel::KmerConfig;

/// One fitted candidate: a model id, the string-kernel configuration that
/// produced it (if any), its training objective and optional held-out LPD.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelScore {
    pub model_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<KmerConfig>,
    pub objective: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub held_out_lpd: Option<f64>,
}

fn rank_order(a: &ModelScore, b: &ModelScore) -> Ordering {
    b.objective
        .total_cmp(&a.objective)
        .then_with(|| match (&a.config, &b.config) {
            (Some(x), Some(y)) => x
                .k
                .cmp(&y.k)
                .then(x.variant.cmp(&y.variant))
                .then(x.m.cmp(&y.m))
                .then(x.g.cmp(&y.g)),
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => Ordering::Equal,
        })
        .then_with(|| a.model_id.cmp(&b.model_id))
}

/// Ranks candidates by training objective, best first. Ties go to the
/// smaller k, then to the variant order Spectrum < GappyPair < Mismatch.
pub fn model_select(mut candidates: Vec<ModelScore>) -> Result<Vec<ModelScore>> {
    if candidates.is_empty() {
        return Err(Error::InvalidData("no candidate models".into()));
    }
    if let Some(bad) = candidates.iter().find(|c| !c.objective.is_finite()) {
        return Err(Error::Numerical(format!(
            "candidate {} has non-finite objective",
            bad.model_id
        )));
    }
    candidates.sort_by(rank_order);
    Ok(candidates)
}
