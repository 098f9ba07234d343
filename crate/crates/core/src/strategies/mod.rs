//! Decoding strategies over an abstract [`LogitProvider`]: plain sampling or
//! greedy, contrastive decoding with a negative provider, and first-logit
//! boosting.

mod contrastive;
mod flb;
mod provider;

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logits::{
    argmax, entropy, sample, softmax, GenerationRecord, LogitVector, ProbDist, StepTrace, TokenId, Vocabulary,
};
use crate::plausibility::{apply_mask, candidate_set};

pub use contrastive::{contrastive_adjust, ContrastiveConfig, NegativeKind};
pub use flb::{
    capture_first_logit, flb_adjust, flb_step, mask_l0, FirstLogitCache, FlbConfig, L0Mask, TokenRoles,
};
pub use provider::{CountingProvider, LogitProvider};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeMode {
    #[default]
    Sample,
    Greedy,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodeOptions {
    pub max_steps: usize,
    #[serde(default)]
    pub mode: DecodeMode,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
}

fn default_temperature() -> f64 {
    1.0
}

impl Default for DecodeOptions {
    fn default() -> Self {
        Self { max_steps: 60, mode: DecodeMode::Sample, temperature: 1.0 }
    }
}

impl DecodeOptions {
    pub fn new(max_steps: usize, mode: DecodeMode) -> Self {
        Self { max_steps, mode, temperature: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_steps == 0 {
            return Err(Error::config("max_steps", "must be at least 1"));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::config("temperature", format!("must be positive, got {}", self.temperature)));
        }
        Ok(())
    }
}

/// Contrastive parameters as written in a config file; the negative kind is
/// implied by the strategy name.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContrastiveParams {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strength: Option<f64>,
}

fn default_alpha() -> f64 {
    1.0
}

fn default_beta() -> f64 {
    0.1
}

impl Default for ContrastiveParams {
    fn default() -> Self {
        Self { alpha: 1.0, beta: 0.1, strength: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StrategyKind {
    Baseline {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        beta: Option<f64>,
    },
    Greedy {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        beta: Option<f64>,
    },
    Vcd(ContrastiveParams),
    Icd(ContrastiveParams),
    M3id(ContrastiveParams),
    Flb(FlbConfig),
}

impl StrategyKind {
    pub fn baseline() -> Self {
        StrategyKind::Baseline { beta: None }
    }

    pub fn constrained_baseline(beta: f64) -> Self {
        StrategyKind::Baseline { beta: Some(beta) }
    }

    pub fn flb(cfg: FlbConfig) -> Self {
        StrategyKind::Flb(cfg)
    }

    pub fn from_contrastive(cfg: &ContrastiveConfig) -> Self {
        let p = ContrastiveParams { alpha: cfg.alpha, beta: cfg.beta, strength: Some(cfg.strength) };
        match cfg.negative_kind {
            NegativeKind::NoisyVisual => StrategyKind::Vcd(p),
            NegativeKind::PerturbedInstruction => StrategyKind::Icd(p),
            NegativeKind::Unconditioned => StrategyKind::M3id(p),
        }
    }

    /// Resolved contrastive configuration, if this is a contrastive strategy.
    pub fn contrastive(&self) -> Option<ContrastiveConfig> {
        let (p, kind, default_strength) = match *self {
            StrategyKind::Vcd(p) => (p, NegativeKind::NoisyVisual, 0.5),
            StrategyKind::Icd(p) => (p, NegativeKind::PerturbedInstruction, 1.0),
            StrategyKind::M3id(p) => (p, NegativeKind::Unconditioned, 1.0),
            _ => return None,
        };
        Some(ContrastiveConfig {
            alpha: p.alpha,
            beta: p.beta,
            negative_kind: kind,
            strength: p.strength.unwrap_or(default_strength),
        })
    }

    /// Forward passes per generated token.
    pub fn calls_per_token(&self) -> u32 {
        if self.contrastive().is_some() {
            2
        } else {
            1
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            StrategyKind::Baseline { beta } | StrategyKind::Greedy { beta } => {
                beta.map_or(Ok(()), crate::plausibility::validate_beta)
            }
            StrategyKind::Flb(cfg) => cfg.validate(),
            other => other.contrastive().expect("contrastive variant").validate(),
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StrategyKind::Baseline { beta: None } => write!(f, "baseline"),
            StrategyKind::Baseline { beta: Some(b) } => write!(f, "baseline(beta={b})"),
            StrategyKind::Greedy { beta: None } => write!(f, "greedy"),
            StrategyKind::Greedy { beta: Some(b) } => write!(f, "greedy(beta={b})"),
            StrategyKind::Flb(c) => write!(
                f,
                "flb({},gamma={},lambda={},beta={},l0={})",
                c.schedule.kind,
                c.schedule.gamma,
                c.schedule.lambda,
                c.beta,
                c.l0_mask.as_str()
            ),
            other => {
                let c = other.contrastive().expect("contrastive variant");
                let name = match other {
                    StrategyKind::Vcd(_) => "vcd",
                    StrategyKind::Icd(_) => "icd",
                    _ => "m3id",
                };
                write!(f, "{name}(alpha={},beta={},strength={})", c.alpha, c.beta, c.strength)
            }
        }
    }
}

/// Restricts `logits` to the plausibility candidates of `original`. The EOS
/// token is always admitted so every run can terminate.
pub fn restrict_to_candidates(
    logits: &LogitVector,
    original: &ProbDist,
    beta: f64,
    eos: Option<TokenId>,
) -> Result<LogitVector> {
    let mut mask = candidate_set(original, beta)?;
    if let Some(e) = eos {
        if !logits.is_masked(e) {
            mask.admit(e);
        }
    }
    apply_mask(logits, &mask)
}

/// Output of one strategy step, before selection.
struct StepLogits {
    raw: LogitVector,
    adjusted: LogitVector,
    calls: u32,
}

#[allow(clippy::too_many_arguments)]
fn drive(
    vocab: &Vocabulary,
    eos: Option<TokenId>,
    prompt: &str,
    label: String,
    seed: u64,
    opts: &DecodeOptions,
    mut step: impl FnMut(usize, &[TokenId]) -> Result<StepLogits>,
) -> Result<GenerationRecord> {
    opts.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut history = Vec::with_capacity(opts.max_steps);
    let mut steps = Vec::with_capacity(opts.max_steps);
    for t in 0..opts.max_steps {
        let StepLogits { raw, adjusted, calls } = step(t, &history)?;
        let dist = softmax(&adjusted, opts.temperature)?;
        let chosen = match opts.mode {
            DecodeMode::Sample => sample(&dist, &mut rng),
            DecodeMode::Greedy => argmax(&adjusted)?,
        };
        let entropy_nats = entropy(&dist);
        steps.push(StepTrace {
            step_index: t,
            raw_logits: raw,
            adjusted_logits: adjusted,
            dist,
            chosen,
            entropy_nats,
            provider_calls: calls,
        });
        history.push(chosen);
        if Some(chosen) == eos {
            break;
        }
    }
    GenerationRecord::new(prompt, label, seed, steps, vocab)
}

fn call<P: LogitProvider + ?Sized>(provider: &mut P, prompt: &str, history: &[TokenId], step: usize) -> Result<LogitVector> {
    let logits = provider
        .logits(prompt, history)
        .map_err(|e| Error::Provider { step, source: Box::new(e) })?;
    if logits.len() != provider.vocab().len() {
        return Err(Error::Provider {
            step,
            source: Box::new(Error::Contract(format!(
                "provider returned {} logits for a vocabulary of {}",
                logits.len(),
                provider.vocab().len()
            ))),
        });
    }
    Ok(logits)
}

/// Plain autoregressive decoding, optionally restricted to the plausibility
/// candidate set with the given `constraint` beta.
pub fn decode_baseline<P: LogitProvider + ?Sized>(
    provider: &mut P,
    prompt: &str,
    opts: &DecodeOptions,
    constraint: Option<f64>,
    seed: u64,
) -> Result<GenerationRecord> {
    if let Some(b) = constraint {
        crate::plausibility::validate_beta(b)?;
    }
    let label = match opts.mode {
        DecodeMode::Sample => StrategyKind::Baseline { beta: constraint },
        DecodeMode::Greedy => StrategyKind::Greedy { beta: constraint },
    }
    .to_string();
    let vocab = provider.vocab().clone();
    let eos = provider.eos();
    drive(&vocab, eos, prompt, label, seed, opts, |t, history| {
        let raw = call(provider, prompt, history, t)?;
        let adjusted = match constraint {
            Some(beta) => restrict_to_candidates(&raw, &softmax(&raw, opts.temperature)?, beta, eos)?,
            None => raw.clone(),
        };
        Ok(StepLogits { raw, adjusted, calls: 1 })
    })
}

/// Contrastive decoding: every step queries both providers and samples from
/// `(1 + alpha) * positive - alpha * negative`, restricted to the candidates of
/// the positive distribution.
pub fn decode_contrastive<P, N>(
    provider: &mut P,
    negative: &mut N,
    prompt: &str,
    cfg: &ContrastiveConfig,
    opts: &DecodeOptions,
    seed: u64,
) -> Result<GenerationRecord>
where
    P: LogitProvider + ?Sized,
    N: LogitProvider + ?Sized,
{
    cfg.validate()?;
    if provider.vocab() != negative.vocab() {
        return Err(Error::Contract("positive and negative providers use different vocabularies".into()));
    }
    let vocab = provider.vocab().clone();
    let eos = provider.eos();
    let label = StrategyKind::from_contrastive(cfg).to_string();
    drive(&vocab, eos, prompt, label, seed, opts, |t, history| {
        let raw = call(provider, prompt, history, t)?;
        let neg = call(negative, prompt, history, t)?;
        let contrasted = contrastive_adjust(&raw, &neg, cfg.alpha)
            .map_err(|e| Error::Provider { step: t, source: Box::new(e) })?;
        let original = softmax(&raw, opts.temperature)?;
        let adjusted = restrict_to_candidates(&contrasted, &original, cfg.beta, eos)?;
        Ok(StepLogits { raw, adjusted, calls: 2 })
    })
}

/// First-logit boosting. Step 0 caches the raw logits and samples from their
/// constrained softmax; every later step adds `w_t` times the (ablation-masked)
/// cache before the candidate restriction. One provider call per step.
pub fn decode_flb<P: LogitProvider + ?Sized>(
    provider: &mut P,
    prompt: &str,
    cfg: &FlbConfig,
    roles: Option<&TokenRoles>,
    opts: &DecodeOptions,
    seed: u64,
) -> Result<GenerationRecord> {
    cfg.validate()?;
    match cfg.l0_mask {
        L0Mask::NounsOnly if roles.is_none() => {
            return Err(Error::config("l0_mask", "nouns_only needs a noun lexicon"));
        }
        L0Mask::TheOnly if roles.and_then(|r| r.the_token).is_none() => {
            return Err(Error::config("l0_mask", "the_only needs a \"The\" token in the vocabulary"));
        }
        _ => {}
    }
    let vocab = provider.vocab().clone();
    let eos = provider.eos();
    let label = StrategyKind::Flb(*cfg).to_string();
    let mut contrib: Option<LogitVector> = None;
    drive(&vocab, eos, prompt, label, seed, opts, |t, history| {
        let raw = call(provider, prompt, history, t)?;
        let original = softmax(&raw, opts.temperature)?;
        let adjusted = match &contrib {
            None => {
                let cache = FirstLogitCache::from_logits(raw.clone());
                contrib = Some(mask_l0(&cache, cfg.l0_mask, roles)?);
                restrict_to_candidates(&raw, &original, cfg.beta, eos)?
            }
            Some(c) => flb_adjust(&raw, c, cfg.schedule.weight_at(t), &original, cfg.beta, eos)?,
        };
        Ok(StepLogits { raw, adjusted, calls: 1 })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weighting::WeightSchedule;

    /// Fixed logits, EOS after `len` tokens.
    struct Scripted {
        vocab: Vocabulary,
        scores: Vec<f64>,
        stop_after: usize,
        fail_at: Option<usize>,
    }

    impl LogitProvider for Scripted {
        fn vocab(&self) -> &Vocabulary {
            &self.vocab
        }

        fn eos(&self) -> Option<TokenId> {
            Some(TokenId(0))
        }

        fn logits(&mut self, _prompt: &str, history: &[TokenId]) -> Result<LogitVector> {
            if Some(history.len()) == self.fail_at {
                return Err(Error::input(None, "backend down"));
            }
            let mut s = self.scores.clone();
            s[0] = if history.len() >= self.stop_after { 100.0 } else { -100.0 };
            LogitVector::new(s)
        }
    }

    fn scripted() -> Scripted {
        Scripted {
            vocab: Vocabulary::new(["</s>", "x", "y", "z"]).unwrap(),
            scores: vec![0.0, 1.0, 0.5, -3.0],
            stop_after: 5,
            fail_at: None,
        }
    }

    #[test]
    fn stops_at_eos_or_max_steps() {
        let rec = decode_baseline(&mut scripted(), "p", &DecodeOptions::new(50, DecodeMode::Sample), None, 1).unwrap();
        assert_eq!(rec.len(), 6);
        assert_eq!(rec.steps.last().unwrap().chosen, TokenId(0));
        let rec = decode_baseline(&mut scripted(), "p", &DecodeOptions::new(3, DecodeMode::Sample), None, 1).unwrap();
        assert_eq!(rec.len(), 3);
        assert!(rec.steps.iter().all(|s| s.provider_calls == 1));
    }

    #[test]
    fn greedy_picks_argmax() {
        let rec = decode_baseline(&mut scripted(), "p", &DecodeOptions::new(4, DecodeMode::Greedy), None, 7).unwrap();
        assert!(rec.tokens().iter().all(|&t| t == TokenId(1)));
        assert_eq!(rec.strategy, "greedy");
    }

    #[test]
    fn provider_failure_carries_step() {
        let mut p = Scripted { fail_at: Some(2), ..scripted() };
        let err = decode_baseline(&mut p, "p", &DecodeOptions::default(), None, 0).unwrap_err();
        assert!(matches!(err, Error::Provider { step: 2, .. }));
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn contrastive_makes_two_calls_per_step() {
        let cfg = ContrastiveConfig { alpha: 1.0, beta: 0.1, negative_kind: NegativeKind::NoisyVisual, strength: 0.5 };
        let mut pos = CountingProvider::new(scripted());
        let mut neg = CountingProvider::new(scripted());
        let rec = decode_contrastive(&mut pos, &mut neg, "p", &cfg, &DecodeOptions::default(), 3).unwrap();
        assert_eq!(rec.provider_calls(), 2 * rec.len() as u64);
        assert_eq!(pos.calls() + neg.calls(), rec.provider_calls());
        assert!(rec.strategy.starts_with("vcd("));
    }

    #[test]
    fn flb_boost_telescopes() {
        let cfg = FlbConfig { schedule: WeightSchedule::increasing(0.3, 0.05).unwrap(), beta: 0.0, l0_mask: L0Mask::Full };
        let mut p = scripted();
        p.stop_after = 1000;
        let rec = decode_flb(&mut p, "p", &cfg, None, &DecodeOptions::new(30, DecodeMode::Sample), 11).unwrap();
        let l0 = rec.steps[0].raw_logits.clone();
        for s in &rec.steps[1..] {
            let w = cfg.schedule.weight_at(s.step_index);
            for i in 0..l0.len() {
                if !s.adjusted_logits.mask()[i] {
                    let diff = s.adjusted_logits.scores()[i] - s.raw_logits.scores()[i];
                    assert!((diff - w * l0.scores()[i]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn flb_ablation_needs_roles() {
        let cfg = FlbConfig { l0_mask: L0Mask::TheOnly, ..FlbConfig::default() };
        let mut p = CountingProvider::new(scripted());
        let err = decode_flb(&mut p, "p", &cfg, None, &DecodeOptions::default(), 0).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert_eq!(p.calls(), 0);
    }

    #[test]
    fn strategy_serde_and_labels() {
        let s: StrategyKind = toml::from_str(
            "kind = \"flb\"\nschedule = \"increasing\"\ngamma = 0.3\nlambda = 0.05\nbeta = 0.1\nl0_mask = \"the_only\"\n",
        )
        .unwrap();
        assert_eq!(s.to_string(), "flb(increasing,gamma=0.3,lambda=0.05,beta=0.1,l0=the_only)");
        let v: StrategyKind = toml::from_str("kind = \"vcd\"\nalpha = 0.5\n").unwrap();
        assert_eq!(v.contrastive().unwrap().negative_kind, NegativeKind::NoisyVisual);
        assert_eq!(v.calls_per_token(), 2);
        assert_eq!(v.to_string(), "vcd(alpha=0.5,beta=0.1,strength=0.5)");
        let b: StrategyKind = toml::from_str("kind = \"baseline\"").unwrap();
        assert_eq!(b, StrategyKind::baseline());
        let back: StrategyKind = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
        assert!(toml::from_str::<StrategyKind>("kind = \"beam\"").is_err());
    }
}
