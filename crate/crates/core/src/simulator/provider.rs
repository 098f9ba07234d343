use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::grammar::GrammarState;
use super::scene::Scene;
use crate::error::Result;
use crate::logits::{LogitVector, TokenId, Vocabulary};
use crate::strategies::{LogitProvider, NegativeKind};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NegativeVariantSpec {
    pub kind: NegativeKind,
    pub strength: f64,
}

/// Simulated cost of a forward pass.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "cost", rename_all = "snake_case")]
pub enum CostModel {
    #[default]
    Cheap,
    /// Busy-waits this many microseconds per call.
    Padded { micros: u64 },
}

impl CostModel {
    pub fn pay(&self) {
        if let CostModel::Padded { micros } = *self {
            let budget = Duration::from_micros(micros);
            let start = Instant::now();
            while start.elapsed() < budget {
                std::hint::spin_loop();
            }
        }
    }
}

// RNG streams derived from the run seed. Stream 0 belongs to the sampler.
const POSITIVE_STREAM: u64 = 1;
const NEGATIVE_STREAM: u64 = 2;

fn noise_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Logits for `state` at step `t`, with per-token Gaussian jitter of the
/// scene's `noise_sigma`.
pub fn logits_for<R: Rng + ?Sized>(scene: &Scene, state: GrammarState, t: usize, rng: &mut R) -> LogitVector {
    let mut scores = scene.base_logits(state, t);
    jitter(&mut scores, scene.spec().noise_sigma, rng);
    LogitVector::new(scores).expect("scene logits are finite")
}

/// Logits for the prior-amplifying negative input.
///
/// * `NoisyVisual` shrinks the ground-truth/hallucination margin by `1 - strength`.
/// * `PerturbedInstruction` blends the grammar offsets toward random ones.
/// * `Unconditioned` sets every object logit to the common object mean.
pub fn negative_logits_for<R: Rng + ?Sized>(
    scene: &Scene,
    variant: &NegativeVariantSpec,
    state: GrammarState,
    t: usize,
    rng: &mut R,
) -> LogitVector {
    let mut scores = scene.base_logits(state, t);
    let mean = |s: &[f64], ids: &[TokenId]| ids.iter().map(|id| s[id.0]).sum::<f64>() / ids.len() as f64;
    match variant.kind {
        NegativeKind::NoisyVisual => {
            let g = mean(&scores, scene.gt_ids());
            let h = mean(&scores, scene.hal_ids());
            let center = 0.5 * (g + h);
            let s = variant.strength;
            for id in scene.gt_ids() {
                scores[id.0] -= s * (g - center);
            }
            for id in scene.hal_ids() {
                scores[id.0] -= s * (h - center);
            }
        }
        NegativeKind::PerturbedInstruction => {
            let s = variant.strength.min(1.0);
            let penalty = scene.spec().inadmissible_penalty;
            for (i, &class) in scene.classes().iter().enumerate() {
                let offset = if state.admits(class) { 0.0 } else { -penalty };
                let random = -penalty * rng.gen::<f64>();
                scores[i] += s * (random - offset);
            }
        }
        NegativeKind::Unconditioned => {
            let objects: Vec<TokenId> = scene.gt_ids().iter().chain(scene.hal_ids()).copied().collect();
            let m = mean(&scores, &objects);
            for id in objects {
                scores[id.0] = m;
            }
        }
    }
    jitter(&mut scores, scene.spec().noise_sigma, rng);
    LogitVector::new(scores).expect("scene logits are finite")
}

fn jitter<R: Rng + ?Sized>(scores: &mut [f64], sigma: f64, rng: &mut R) {
    if sigma > 0.0 {
        for s in scores {
            let z: f64 = rng.sample(StandardNormal);
            *s += sigma * z;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Role {
    Positive,
    Negative(NegativeVariantSpec),
}

/// The scene as a [`LogitProvider`]. Owns its noise stream, derived from the
/// run seed, so repeated runs with one seed see identical jitter.
pub struct SyntheticProvider {
    scene: Arc<Scene>,
    role: Role,
    rng: ChaCha8Rng,
    cost: CostModel,
}

impl SyntheticProvider {
    pub fn positive(scene: Arc<Scene>, seed: u64, cost: CostModel) -> Self {
        Self { scene, role: Role::Positive, rng: noise_rng(seed, POSITIVE_STREAM), cost }
    }

    pub fn negative(scene: Arc<Scene>, variant: NegativeVariantSpec, seed: u64, cost: CostModel) -> Self {
        Self { scene, role: Role::Negative(variant), rng: noise_rng(seed, NEGATIVE_STREAM), cost }
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }
}

impl LogitProvider for SyntheticProvider {
    fn vocab(&self) -> &Vocabulary {
        self.scene.vocab()
    }

    fn eos(&self) -> Option<TokenId> {
        Some(self.scene.eos())
    }

    fn logits(&mut self, _prompt: &str, history: &[TokenId]) -> Result<LogitVector> {
        self.cost.pay();
        let state = self.scene.state_after(history);
        let t = history.len();
        Ok(match &self.role {
            Role::Positive => logits_for(&self.scene, state, t, &mut self.rng),
            Role::Negative(v) => negative_logits_for(&self.scene, v, state, t, &mut self.rng),
        })
    }
}
