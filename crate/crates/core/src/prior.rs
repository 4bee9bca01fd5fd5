//! Perceptual prior: softmax over the VLM's "Yes"/"No" logits.

use crate::error::{Error, Result};
use crate::features::VlmPriorRecord;

const SMALLEST_BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

/// Two-way softmax `exp(pos) / (exp(pos) + exp(neg))`, evaluated as the
/// logistic of the logit difference. The result is kept strictly inside
/// `(0, 1)` even where the exact value rounds to an endpoint.
pub fn prior_from_logits(positive: f64, negative: f64) -> Result<f64> {
    if !positive.is_finite() || !negative.is_finite() {
        return Err(Error::Input(format!(
            "non-finite logits ({positive}, {negative})"
        )));
    }
    let p = logistic(positive - negative);
    Ok(p.clamp(f64::MIN_POSITIVE, SMALLEST_BELOW_ONE))
}

pub fn prior_score(record: &VlmPriorRecord) -> Result<f64> {
    prior_from_logits(record.positive_logit, record.negative_logit)
}

fn logistic(d: f64) -> f64 {
    if d >= 0.0 {
        1.0 / (1.0 + (-d).exp())
    } else {
        let e = d.exp();
        e / (1.0 + e)
    }
}
