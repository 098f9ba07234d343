use rand::Rng;
use serde::{Deserialize, Serialize};

use super::TokenId;
use crate::error::{Error, Result};

/// Dense scores over a vocabulary with an explicit exclusion lane.
///
/// Masked entries keep their score but never take part in normalization or
/// selection. At least one entry is always unmasked and every unmasked score
/// is finite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLogits")]
pub struct LogitVector {
    scores: Vec<f64>,
    mask: Vec<bool>,
}

#[derive(Deserialize)]
struct RawLogits {
    scores: Vec<f64>,
    mask: Vec<bool>,
}

impl TryFrom<RawLogits> for LogitVector {
    type Error = Error;

    fn try_from(raw: RawLogits) -> Result<Self> {
        LogitVector::with_mask(raw.scores, raw.mask)
    }
}

impl LogitVector {
    /// All entries unmasked.
    pub fn new(scores: Vec<f64>) -> Result<Self> {
        let mask = vec![false; scores.len()];
        Self::with_mask(scores, mask)
    }

    /// `mask[i] == true` excludes token `i`.
    pub fn with_mask(scores: Vec<f64>, mask: Vec<bool>) -> Result<Self> {
        if scores.len() != mask.len() {
            return Err(Error::Contract(format!(
                "score/mask length mismatch: {} vs {}",
                scores.len(),
                mask.len()
            )));
        }
        if let Some(i) = (0..scores.len()).find(|&i| !mask[i] && !scores[i].is_finite()) {
            return Err(Error::Contract(format!("unmasked score {i} is not finite")));
        }
        if mask.iter().all(|&m| m) {
            return Err(Error::Exclusion);
        }
        Ok(Self { scores, mask })
    }

    pub fn zeros(len: usize) -> Result<Self> {
        Self::new(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn score(&self, id: TokenId) -> f64 {
        self.scores[id.0]
    }

    pub fn is_masked(&self, id: TokenId) -> bool {
        self.mask[id.0]
    }

    pub fn unmasked(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.scores
            .iter()
            .zip(&self.mask)
            .enumerate()
            .filter(|(_, (_, &m))| !m)
            .map(|(i, (&s, _))| (i, s))
    }

    /// `self + weight * other` on the unmasked entries of `self`; masked entries
    /// are carried through untouched.
    pub fn add_scaled(&self, other: &LogitVector, weight: f64) -> Result<LogitVector> {
        if other.len() != self.len() {
            return Err(Error::Contract(format!(
                "length mismatch: {} vs {}",
                self.len(),
                other.len()
            )));
        }
        let mut scores = self.scores.clone();
        for (i, s) in scores.iter_mut().enumerate() {
            if self.mask[i] {
                continue;
            }
            if other.mask[i] {
                return Err(Error::Contract(format!(
                    "addend masks token {i} which is live in the base vector"
                )));
            }
            *s += weight * other.scores[i];
        }
        LogitVector::with_mask(scores, self.mask.clone())
    }

    /// Masks every token whose `allowed` flag is false. Already-masked tokens
    /// stay masked.
    pub fn restrict(&self, allowed: &[bool]) -> Result<LogitVector> {
        if allowed.len() != self.len() {
            return Err(Error::Contract(format!(
                "mask length {} does not match vocabulary {}",
                allowed.len(),
                self.len()
            )));
        }
        let mask = self.mask.iter().zip(allowed).map(|(&m, &a)| m || !a).collect();
        LogitVector::with_mask(self.scores.clone(), mask)
    }
}

/// A probability distribution over a vocabulary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProbDist {
    probs: Vec<f64>,
}

pub const PROB_SUM_TOLERANCE: f64 = 1e-9;

impl ProbDist {
    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Contract("empty distribution".into()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Contract("probabilities must be finite and nonnegative".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROB_SUM_TOLERANCE {
            return Err(Error::Contract(format!("probabilities sum to {total}, not 1")));
        }
        Ok(Self { probs })
    }

    pub fn uniform(len: usize) -> Result<Self> {
        Self::from_probs(vec![1.0 / len as f64; len])
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, id: TokenId) -> f64 {
        self.probs[id.0]
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn max_prob(&self) -> f64 {
        self.probs.iter().copied().fold(0.0, f64::max)
    }

    /// Most probable token, lowest index on ties.
    pub fn argmax(&self) -> TokenId {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        TokenId(best)
    }

    /// Total mass over a token subset.
    pub fn mass(&self, ids: impl IntoIterator<Item = TokenId>) -> f64 {
        ids.into_iter().map(|id| self.probs[id.0]).sum()
    }
}

impl TryFrom<Vec<f64>> for ProbDist {
    type Error = Error;

    fn try_from(probs: Vec<f64>) -> Result<Self> {
        ProbDist::from_probs(probs)
    }
}

impl From<ProbDist> for Vec<f64> {
    fn from(d: ProbDist) -> Self {
        d.probs
    }
}

/// Temperature softmax over the unmasked entries. Masked tokens get exactly 0.
pub fn softmax(logits: &LogitVector, temperature: f64) -> Result<ProbDist> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::Contract(format!("temperature must be positive, got {temperature}")));
    }
    let max = logits
        .unmasked()
        .map(|(_, s)| s / temperature)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::Exclusion);
    }
    let mut probs = vec![0.0; logits.len()];
    let mut total = 0.0;
    for (i, s) in logits.unmasked() {
        let e = (s / temperature - max).exp();
        probs[i] = e;
        total += e;
    }
    for p in &mut probs {
        *p /= total;
    }
    Ok(ProbDist { probs })
}

/// Shannon entropy in nats, with `0 ln 0 = 0`.
pub fn entropy(dist: &ProbDist) -> f64 {
    let h: f64 = dist.probs.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum();
    h.max(0.0)
}

/// Draws a token from `dist`. Zero-probability tokens are never returned.
pub fn sample<R: Rng + ?Sized>(dist: &ProbDist, rng: &mut R) -> TokenId {
    let total: f64 = dist.probs.iter().sum();
    let target = rng.gen::<f64>() * total;
    let mut cum = 0.0;
    let mut last_live = None;
    for (i, &p) in dist.probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        cum += p;
        last_live = Some(i);
        if target < cum {
            return TokenId(i);
        }
    }
    // Rounding left `target` past the final cumulative sum.
    TokenId(last_live.expect("distribution has positive mass"))
}

/// Highest unmasked score, lowest index on ties.
pub fn argmax(logits: &LogitVector) -> Result<TokenId> {
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in logits.unmasked() {
        match best {
            Some((_, b)) if s <= b => {}
            _ => best = Some((i, s)),
        }
    }
    best.map(|(i, _)| TokenId(i)).ok_or(Error::Exclusion)
}
