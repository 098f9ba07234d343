use serde::{Deserialize, Serialize};

use super::LogitProvider;
use crate::error::{Error, Result};
use crate::logits::{softmax, LogitVector, ProbDist, TokenId};
use crate::weighting::WeightSchedule;

/// Which entries of the cached first logit contribute to the boost.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum L0Mask {
    #[default]
    Full,
    NounsOnly,
    TheOnly,
}

impl L0Mask {
    pub fn as_str(self) -> &'static str {
        match self {
            L0Mask::Full => "full",
            L0Mask::NounsOnly => "nouns_only",
            L0Mask::TheOnly => "the_only",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlbConfig {
    #[serde(flatten)]
    pub schedule: WeightSchedule,
    pub beta: f64,
    #[serde(default)]
    pub l0_mask: L0Mask,
}

impl Default for FlbConfig {
    fn default() -> Self {
        Self { schedule: WeightSchedule::default(), beta: 0.1, l0_mask: L0Mask::Full }
    }
}

impl FlbConfig {
    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        crate::plausibility::validate_beta(self.beta)
    }
}

/// Token roles needed by the ablation masks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenRoles {
    pub is_noun: Vec<bool>,
    pub the_token: Option<TokenId>,
}

/// Raw logits of the first generated token. Set once, never recomputed.
#[derive(Clone, Debug, PartialEq)]
pub struct FirstLogitCache {
    l0: LogitVector,
}

impl FirstLogitCache {
    pub fn from_logits(l0: LogitVector) -> Self {
        Self { l0 }
    }

    pub fn logits(&self) -> &LogitVector {
        &self.l0
    }
}

/// One provider call on an empty history.
pub fn capture_first_logit<P: LogitProvider + ?Sized>(provider: &mut P, prompt: &str) -> Result<FirstLogitCache> {
    provider
        .logits(prompt, &[])
        .map(FirstLogitCache::from_logits)
        .map_err(|e| Error::Provider { step: 0, source: Box::new(e) })
}

/// Boost contribution derived from `l0`. Entries outside the selected mode
/// (and entries masked in `l0` itself) contribute exactly zero.
pub fn mask_l0(cache: &FirstLogitCache, mode: L0Mask, roles: Option<&TokenRoles>) -> Result<LogitVector> {
    let l0 = &cache.l0;
    let keep: Box<dyn Fn(usize) -> bool> = match mode {
        L0Mask::Full => Box::new(|_| true),
        L0Mask::NounsOnly => {
            let roles = roles.ok_or_else(|| Error::config("l0_mask", "nouns_only needs a noun lexicon"))?;
            if roles.is_noun.len() != l0.len() {
                return Err(Error::Contract("noun table does not match vocabulary".into()));
            }
            let nouns = roles.is_noun.clone();
            Box::new(move |i| nouns[i])
        }
        L0Mask::TheOnly => {
            let the = roles
                .and_then(|r| r.the_token)
                .ok_or_else(|| Error::config("l0_mask", "the_only needs a \"The\" token in the vocabulary"))?;
            Box::new(move |i| i == the.0)
        }
    };
    let scores = l0
        .scores()
        .iter()
        .zip(l0.mask())
        .enumerate()
        .map(|(i, (&s, &m))| if !m && keep(i) { s } else { 0.0 })
        .collect();
    LogitVector::new(scores)
}

/// Boosted logits `l_t + w_t * contrib`, restricted to the candidate set built
/// from `original`.
pub fn flb_adjust(
    l_t: &LogitVector,
    l0_contrib: &LogitVector,
    w_t: f64,
    original: &ProbDist,
    beta: f64,
    eos: Option<TokenId>,
) -> Result<LogitVector> {
    if original.len() != l_t.len() {
        return Err(Error::Contract("distribution and logits differ in length".into()));
    }
    let boosted = l_t.add_scaled(l0_contrib, w_t)?;
    super::restrict_to_candidates(&boosted, original, beta, eos)
}

/// Sampling distribution for one boosted step at unit temperature.
pub fn flb_step(
    l_t: &LogitVector,
    l0_contrib: &LogitVector,
    w_t: f64,
    original: &ProbDist,
    beta: f64,
) -> Result<ProbDist> {
    softmax(&flb_adjust(l_t, l0_contrib, w_t, original, beta, None)?, 1.0)
}
