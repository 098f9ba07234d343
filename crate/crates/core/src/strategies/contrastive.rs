use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logits::LogitVector;

/// What the negative (prior-amplifying) input is.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegativeKind {
    /// Distorted image.
    NoisyVisual,
    /// Perturbed instruction.
    PerturbedInstruction,
    /// Image removed entirely.
    Unconditioned,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContrastiveConfig {
    pub alpha: f64,
    pub beta: f64,
    pub negative_kind: NegativeKind,
    /// How far the negative input departs from the positive one.
    pub strength: f64,
}

impl ContrastiveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::config("alpha", format!("must be finite and >= 0, got {}", self.alpha)));
        }
        if !(self.strength >= 0.0 && self.strength.is_finite()) {
            return Err(Error::config(
                "strength",
                format!("must be finite and >= 0, got {}", self.strength),
            ));
        }
        crate::plausibility::validate_beta(self.beta)
    }
}

/// `(1 + alpha) * l_pos - alpha * l_neg` on every unmasked entry.
pub fn contrastive_adjust(l_pos: &LogitVector, l_neg: &LogitVector, alpha: f64) -> Result<LogitVector> {
    if l_pos.len() != l_neg.len() {
        return Err(Error::Contract(format!(
            "positive/negative length mismatch: {} vs {}",
            l_pos.len(),
            l_neg.len()
        )));
    }
    if l_pos.mask() != l_neg.mask() {
        return Err(Error::Contract("positive and negative logits carry different masks".into()));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::Contract(format!("alpha must be finite and >= 0, got {alpha}")));
    }
    let scores = l_pos
        .scores()
        .iter()
        .zip(l_neg.scores())
        .zip(l_pos.mask())
        .map(|((&p, &n), &m)| if m { p } else { (1.0 + alpha) * p - alpha * n })
        .collect();
    LogitVector::with_mask(scores, l_pos.mask().to_vec())
}
