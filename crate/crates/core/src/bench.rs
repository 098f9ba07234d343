//! Per-token cost accounting for decoding strategies.

use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logits::{LogitVector, TokenId, Vocabulary};
use crate::simulator::{providers, run_with, CostModel, Scene};
use crate::strategies::{DecodeOptions, LogitProvider, StrategyKind};

/// Reports built from fewer tokens than this are rejected.
pub const MIN_TOKENS: usize = 1000;

/// Counts calls and accumulates time spent inside the wrapped provider.
struct Timed<P> {
    inner: P,
    calls: u64,
    elapsed: Duration,
}

impl<P: LogitProvider> Timed<P> {
    fn new(inner: P) -> Self {
        Self { inner, calls: 0, elapsed: Duration::ZERO }
    }
}

impl<P: LogitProvider> LogitProvider for Timed<P> {
    fn vocab(&self) -> &Vocabulary {
        self.inner.vocab()
    }

    fn eos(&self) -> Option<TokenId> {
        self.inner.eos()
    }

    fn logits(&mut self, prompt: &str, history: &[TokenId]) -> Result<LogitVector> {
        let start = Instant::now();
        let out = self.inner.logits(prompt, history);
        self.elapsed += start.elapsed();
        self.calls += 1;
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunTiming {
    pub seed: u64,
    pub tokens: usize,
    /// Counted at the provider boundary.
    pub provider_calls: u64,
    /// Sum of the per-step trace counts.
    pub traced_calls: u64,
    pub wall_ms: f64,
    pub provider_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub strategy: String,
    pub runs: usize,
    pub tokens_measured: usize,
    pub provider_calls: u64,
    pub provider_calls_per_token: f64,
    /// Median over runs of wall time per token.
    pub wall_ms_per_token: f64,
    pub provider_ms_per_token: f64,
    /// Time per token outside provider calls (logit arithmetic, masking, sampling).
    pub overhead_ms_per_token: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub cost: CostModel,
    pub rows: Vec<BenchRow>,
    #[serde(skip)]
    pub runs: Vec<Vec<RunTiming>>,
}

impl BenchReport {
    pub fn row(&self, label: &str) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.strategy == label)
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn time_run(
    scene: &Arc<Scene>,
    strategy: &StrategyKind,
    seed: u64,
    opts: &DecodeOptions,
    cost: CostModel,
) -> Result<RunTiming> {
    let (pos, neg) = providers(scene, strategy, seed, cost)?;
    let mut pos = Timed::new(pos);
    let mut neg = neg.map(Timed::new);
    let start = Instant::now();
    let record = run_with(scene, strategy, &mut pos, neg.as_mut(), seed, opts)?;
    let wall = start.elapsed();
    let (neg_calls, neg_time) = neg.map_or((0, Duration::ZERO), |n| (n.calls, n.elapsed));
    Ok(RunTiming {
        seed,
        tokens: record.len(),
        provider_calls: pos.calls + neg_calls,
        traced_calls: record.provider_calls(),
        wall_ms: wall.as_secs_f64() * 1e3,
        provider_ms: (pos.elapsed + neg_time).as_secs_f64() * 1e3,
    })
}

/// Runs every strategy on every seed, single-threaded, alternating strategies
/// within each seed so slow drift in machine speed hits all of them alike.
pub fn run_bench(
    strategies: &[StrategyKind],
    scene: &Arc<Scene>,
    cost: CostModel,
    seeds: &[u64],
    opts: &DecodeOptions,
    min_tokens: usize,
) -> Result<BenchReport> {
    if strategies.is_empty() {
        return Err(Error::config("bench.strategies", "at least one strategy is required"));
    }
    let min_tokens = min_tokens.max(MIN_TOKENS);
    let mut runs: Vec<Vec<RunTiming>> = vec![Vec::with_capacity(seeds.len()); strategies.len()];
    for &seed in seeds {
        for (i, s) in strategies.iter().enumerate() {
            runs[i].push(time_run(scene, s, seed, opts, cost)?);
        }
    }
    let mut rows = Vec::with_capacity(strategies.len());
    for (s, timings) in strategies.iter().zip(&runs) {
        let tokens: usize = timings.iter().map(|r| r.tokens).sum();
        if tokens < min_tokens {
            return Err(Error::input(
                None,
                format!("{s}: measured {tokens} tokens, need at least {min_tokens}; add seeds or raise max_steps"),
            ));
        }
        let calls: u64 = timings.iter().map(|r| r.provider_calls).sum();
        let per_token = |f: fn(&RunTiming) -> f64| median(timings.iter().map(|r| f(r) / r.tokens as f64).collect());
        rows.push(BenchRow {
            strategy: s.to_string(),
            runs: timings.len(),
            tokens_measured: tokens,
            provider_calls: calls,
            provider_calls_per_token: calls as f64 / tokens as f64,
            wall_ms_per_token: per_token(|r| r.wall_ms),
            provider_ms_per_token: per_token(|r| r.provider_ms),
            overhead_ms_per_token: per_token(|r| r.wall_ms - r.provider_ms),
        });
    }
    Ok(BenchReport { cost, rows, runs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::preset;

    #[test]
    fn call_counts_are_exact() {
        let scene = Arc::new(preset("default").unwrap().compile().unwrap());
        let strategies = [StrategyKind::baseline(), StrategyKind::Vcd(Default::default())];
        let seeds: Vec<u64> = (0..120).collect();
        let rep = run_bench(&strategies, &scene, CostModel::Cheap, &seeds, &DecodeOptions::default(), 0).unwrap();
        assert_eq!(rep.rows[0].provider_calls_per_token, 1.0);
        assert_eq!(rep.rows[1].provider_calls_per_token, 2.0);
        for r in rep.runs.iter().flatten() {
            assert_eq!(r.provider_calls, r.traced_calls);
        }
        let short = run_bench(&strategies, &scene, CostModel::Cheap, &[0], &DecodeOptions::default(), 0);
        assert_eq!(short.unwrap_err().exit_code(), 3);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
