//! Numeric primitives shared by every decoder: vocabularies, masked logit
//! vectors, distributions, and per-step telemetry.

mod dist;
mod trace;
mod vocab;

pub use dist::{argmax, entropy, sample, softmax, LogitVector, ProbDist, PROB_SUM_TOLERANCE};
pub use trace::{GenerationRecord, StepTrace};
pub use vocab::{TokenId, Vocabulary};
