//! First-logit boosting (FLB) and contrastive decoding over abstract logit
//! providers, a synthetic captioner whose visual grounding decays with
//! position, and object-hallucination metrics.

pub mod bench;
pub mod cli;
pub mod error;
pub mod logits;
pub mod metrics;
pub mod plausibility;
pub mod simulator;
pub mod strategies;
pub mod weighting;

pub use error::{Error, Result};
