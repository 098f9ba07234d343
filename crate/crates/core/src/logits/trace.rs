use serde::{Deserialize, Serialize};

use super::{LogitVector, ProbDist, TokenId, Vocabulary};
use crate::error::{Error, Result};

/// Telemetry for one decoding step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub step_index: usize,
    /// Logits from the (positive) provider, before any adjustment.
    pub raw_logits: LogitVector,
    /// Logits actually sampled from: boosted or contrasted, then restricted to
    /// the candidate set.
    pub adjusted_logits: LogitVector,
    pub dist: ProbDist,
    pub chosen: TokenId,
    pub entropy_nats: f64,
    pub provider_calls: u32,
}

/// One complete decoding run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub prompt_id: String,
    pub strategy: String,
    pub seed: u64,
    pub steps: Vec<StepTrace>,
    pub text: String,
}

impl GenerationRecord {
    pub fn new(
        prompt_id: impl Into<String>,
        strategy: impl Into<String>,
        seed: u64,
        steps: Vec<StepTrace>,
        vocab: &Vocabulary,
    ) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::Contract("generation produced no steps".into()));
        }
        if let Some((i, s)) = steps.iter().enumerate().find(|(i, s)| s.step_index != *i) {
            return Err(Error::Contract(format!(
                "step indices not contiguous: position {i} holds step {}",
                s.step_index
            )));
        }
        let ids: Vec<TokenId> = steps.iter().map(|s| s.chosen).collect();
        Ok(Self {
            prompt_id: prompt_id.into(),
            strategy: strategy.into(),
            seed,
            text: vocab.render(&ids),
            steps,
        })
    }

    pub fn tokens(&self) -> Vec<TokenId> {
        self.steps.iter().map(|s| s.chosen).collect()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn provider_calls(&self) -> u64 {
        self.steps.iter().map(|s| u64::from(s.provider_calls)).sum()
    }
}
