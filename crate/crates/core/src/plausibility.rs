//! Adaptive plausibility constraint: keep only tokens whose original
//! probability reaches `beta` times the step's maximum.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logits::{LogitVector, ProbDist, TokenId};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateMask {
    allowed: Vec<bool>,
    beta: f64,
}

impl CandidateMask {
    pub fn allow_all(len: usize) -> Self {
        Self { allowed: vec![true; len], beta: 0.0 }
    }

    pub fn allowed(&self) -> &[bool] {
        &self.allowed
    }

    pub fn is_allowed(&self, id: TokenId) -> bool {
        self.allowed[id.0]
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn len(&self) -> usize {
        self.allowed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.allowed.is_empty()
    }

    pub fn count(&self) -> usize {
        self.allowed.iter().filter(|&&a| a).count()
    }

    /// Forces `id` into the set (used for the end-of-sequence token).
    pub fn admit(&mut self, id: TokenId) {
        self.allowed[id.0] = true;
    }
}

pub fn validate_beta(beta: f64) -> Result<()> {
    if (0.0..=1.0).contains(&beta) {
        Ok(())
    } else {
        Err(Error::config("beta", format!("must lie in [0, 1], got {beta}")))
    }
}

/// Token `i` is allowed iff `p_i > 0` and `p_i >= beta * max_j p_j`.
///
/// The argmax of `original` always qualifies, so the set is never empty.
pub fn candidate_set(original: &ProbDist, beta: f64) -> Result<CandidateMask> {
    validate_beta(beta)?;
    let threshold = beta * original.max_prob();
    let allowed = original.probs().iter().map(|&p| p > 0.0 && p >= threshold).collect();
    Ok(CandidateMask { allowed, beta })
}

/// Masks every token outside `mask`; unmasked scores are left unchanged.
pub fn apply_mask(logits: &LogitVector, mask: &CandidateMask) -> Result<LogitVector> {
    logits.restrict(&mask.allowed)
}
