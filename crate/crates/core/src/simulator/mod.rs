//! Synthetic vision-language model: a bigram caption grammar whose object
//! logits drift from grounded to hallucination-prone nouns as generation
//! proceeds.

mod grammar;
mod presets;
mod provider;
mod scene;

pub use grammar::{GrammarState, TokenClass};
pub use presets::{preset, PRESET_NAMES};
pub use provider::{logits_for, negative_logits_for, CostModel, NegativeVariantSpec, SyntheticProvider};
pub use scene::{ArticleSpec, Scene, SceneSpec, TokenLogit};

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::logits::GenerationRecord;
use crate::strategies::{
    decode_baseline, decode_contrastive, decode_flb, DecodeMode, DecodeOptions, LogitProvider, StrategyKind,
};

/// Runs one strategy on `scene` with fresh providers seeded from `seed`.
pub fn run_strategy(
    scene: &Arc<Scene>,
    strategy: &StrategyKind,
    seed: u64,
    opts: &DecodeOptions,
    cost: CostModel,
) -> Result<GenerationRecord> {
    let (mut positive, mut negative) = providers(scene, strategy, seed, cost)?;
    run_with(scene, strategy, &mut positive, negative.as_mut(), seed, opts)
}

/// The positive provider, plus a negative one for contrastive strategies.
pub fn providers(
    scene: &Arc<Scene>,
    strategy: &StrategyKind,
    seed: u64,
    cost: CostModel,
) -> Result<(SyntheticProvider, Option<SyntheticProvider>)> {
    strategy.validate()?;
    let positive = SyntheticProvider::positive(Arc::clone(scene), seed, cost);
    let negative = strategy.contrastive().map(|cfg| {
        let variant = NegativeVariantSpec { kind: cfg.negative_kind, strength: cfg.strength };
        SyntheticProvider::negative(Arc::clone(scene), variant, seed, cost)
    });
    Ok((positive, negative))
}

/// Dispatches `strategy` over caller-supplied providers.
pub fn run_with<P, N>(
    scene: &Scene,
    strategy: &StrategyKind,
    positive: &mut P,
    negative: Option<&mut N>,
    seed: u64,
    opts: &DecodeOptions,
) -> Result<GenerationRecord>
where
    P: LogitProvider + ?Sized,
    N: LogitProvider + ?Sized,
{
    let prompt = scene.name();
    match strategy {
        StrategyKind::Baseline { beta } => decode_baseline(positive, prompt, opts, *beta, seed),
        StrategyKind::Greedy { beta } => {
            let greedy = DecodeOptions { mode: DecodeMode::Greedy, ..*opts };
            decode_baseline(positive, prompt, &greedy, *beta, seed)
        }
        StrategyKind::Flb(cfg) => decode_flb(positive, prompt, cfg, Some(&scene.roles()), opts, seed),
        other => {
            let cfg = other.contrastive().expect("contrastive variant");
            let negative = negative.ok_or_else(|| Error::Contract(format!("{other} needs a negative provider")))?;
            decode_contrastive(positive, negative, prompt, &cfg, opts, seed)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn greedy_runs_are_grammatical_and_repeatable() {
        for name in PRESET_NAMES {
            let scene = Arc::new(preset(name).unwrap().compile().unwrap());
            let opts = DecodeOptions::new(60, DecodeMode::Greedy);
            let a = run_strategy(&scene, &StrategyKind::baseline(), 4, &opts, CostModel::Cheap).unwrap();
            let b = run_strategy(&scene, &StrategyKind::baseline(), 4, &opts, CostModel::Cheap).unwrap();
            assert_eq!(a, b);
            let toks = a.tokens();
            for (i, &tok) in toks.iter().enumerate() {
                if scene.class(tok).is_noun() {
                    assert!(i > 0 && matches!(scene.class(toks[i - 1]), TokenClass::Article(_)));
                }
            }
        }
    }
}
