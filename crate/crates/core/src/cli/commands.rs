use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{BenchSpec, ReportFormat, RunConfig};
use crate::bench::{run_bench, BenchReport};
use crate::error::{Error, Result};
use crate::metrics::io::{
    load_annotations, load_captions, load_lexicon, read_trace_dir, write_csv, write_json, write_trace,
};
use crate::metrics::stats::mean_se;
use crate::metrics::{
    article_stats, entropy_stats, evaluate_corpus, pooled_hal_noun_rate, positional_curves, sentence_initial_stats,
    summarize, Annotation, ArticleStats, CaptionRecord, CurveBin, EntropyGroup, MetricsReport, ObjectLexicon,
    RunSummary, SentenceInitialStats, CURVE_NAME,
};
use crate::simulator::{run_strategy, CostModel, Scene};
use crate::strategies::{DecodeOptions, FlbConfig, L0Mask, StrategyKind};

/// Settings shared by every command.
#[derive(Clone, Debug)]
pub struct Context {
    pub out: PathBuf,
    pub jobs: usize,
    pub full_dist: bool,
    pub formats: Vec<ReportFormat>,
}

impl Context {
    pub fn new(out: impl Into<PathBuf>) -> Self {
        Self { out: out.into(), jobs: 1, full_dist: false, formats: vec![ReportFormat::Json, ReportFormat::Csv] }
    }

    fn wants(&self, f: ReportFormat) -> bool {
        self.formats.contains(&f)
    }

    fn prepare(&self) -> Result<()> {
        std::fs::create_dir_all(&self.out).map_err(|e| Error::io(&self.out, e))
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Contract(format!("thread pool: {e}")))
}

/// Every (strategy, seed) run, summarized. Outer index follows `strategies`,
/// inner follows `seeds`, whatever the thread count.
pub fn run_grid(
    scene: &Arc<Scene>,
    strategies: &[StrategyKind],
    seeds: &[u64],
    opts: &DecodeOptions,
    full_dist: bool,
    jobs: usize,
) -> Result<Vec<Vec<RunSummary>>> {
    let cells: Vec<(usize, u64)> =
        (0..strategies.len()).flat_map(|i| seeds.iter().map(move |&s| (i, s))).collect();
    let runs: Vec<RunSummary> = pool(jobs)?.install(|| {
        cells
            .par_iter()
            .map(|&(i, seed)| {
                let rec = run_strategy(scene, &strategies[i], seed, opts, CostModel::Cheap)?;
                Ok(summarize(&rec, scene, full_dist))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut it = runs.into_iter();
    Ok(strategies.iter().map(|_| it.by_ref().take(seeds.len()).collect()).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateSummary {
    /// Hallucinated nouns over all nouns, pooled across runs.
    pub pooled: f64,
    /// Mean of per-run rates and its standard error.
    pub mean: f64,
    pub se: f64,
}

impl RateSummary {
    pub fn of(runs: &[RunSummary]) -> Self {
        let per_run: Vec<f64> = runs.iter().map(RunSummary::hal_noun_rate).collect();
        let (mean, se) = mean_se(&per_run);
        Self { pooled: pooled_hal_noun_rate(runs), mean, se }
    }
}

fn caption_metrics(runs: &[RunSummary], scene: &Scene) -> Result<MetricsReport> {
    let captions = runs.iter().map(RunSummary::caption).collect::<Result<Vec<_>>>()?;
    Ok(evaluate_corpus(&captions, &[scene.annotation()], &scene.lexicon())?.report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyReport {
    pub strategy: String,
    pub runs: usize,
    pub tokens: usize,
    pub provider_calls_per_token: f64,
    pub metrics: MetricsReport,
    pub hal_noun_rate: RateSummary,
    pub sentence_initial: SentenceInitialStats,
    pub articles: ArticleStats,
    pub entropy: Vec<EntropyGroup>,
    pub curves: Vec<CurveBin>,
}

pub fn strategy_report(label: &str, runs: &[RunSummary], scene: &Scene, bin_width: usize) -> Result<StrategyReport> {
    let tokens: usize = runs.iter().map(|r| r.steps.len()).sum();
    let calls: u64 = runs.iter().map(RunSummary::provider_calls).sum();
    Ok(StrategyReport {
        strategy: label.to_string(),
        runs: runs.len(),
        tokens,
        provider_calls_per_token: if tokens == 0 { 0.0 } else { calls as f64 / tokens as f64 },
        metrics: caption_metrics(runs, scene)?,
        hal_noun_rate: RateSummary::of(runs),
        sentence_initial: sentence_initial_stats(runs),
        articles: article_stats(runs),
        entropy: entropy_stats(runs),
        curves: positional_curves(runs, bin_width)?,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulateReport {
    pub scene: String,
    pub seeds: Vec<u64>,
    pub max_steps: usize,
    /// Rates below are fractions.
    pub scale: String,
    pub curve_metric: String,
    pub strategies: Vec<StrategyReport>,
}

/// One CSV row per strategy, rates in percent.
#[derive(Serialize)]
struct SummaryRow<'a> {
    strategy: &'a str,
    scale: &'static str,
    runs: usize,
    tokens: usize,
    chair_i: f64,
    chair_s: f64,
    cover: f64,
    cog: f64,
    recall: f64,
    object_score: f64,
    hal_noun_rate: f64,
    hal_noun_rate_se: f64,
    first_token_the: f64,
    sentence_initial_the: f64,
    provider_calls_per_token: f64,
}

impl<'a> SummaryRow<'a> {
    fn new(label: &'a str, runs: usize, tokens: usize, m: &MetricsReport, rate: &RateSummary) -> Self {
        let [chair_i, chair_s, cover, cog, recall, object_score] = m.percent();
        SummaryRow {
            strategy: label,
            scale: "percent",
            runs,
            tokens,
            chair_i,
            chair_s,
            cover,
            cog,
            recall,
            object_score,
            hal_noun_rate: 100.0 * rate.pooled,
            hal_noun_rate_se: 100.0 * rate.se,
            first_token_the: 0.0,
            sentence_initial_the: 0.0,
            provider_calls_per_token: 0.0,
        }
    }
}

#[derive(Serialize)]
struct CurveRow<'a> {
    metric: &'static str,
    strategy: &'a str,
    bin_start: usize,
    bin_end: usize,
    samples: usize,
    gt_mass: f64,
    hal_mass: f64,
}

fn trace_name(index: usize, strategy: &StrategyKind, seed: u64) -> String {
    let kind = match strategy {
        StrategyKind::Baseline { .. } => "baseline",
        StrategyKind::Greedy { .. } => "greedy",
        StrategyKind::Vcd(_) => "vcd",
        StrategyKind::Icd(_) => "icd",
        StrategyKind::M3id(_) => "m3id",
        StrategyKind::Flb(_) => "flb",
    };
    format!("s{index:02}-{kind}-seed{seed:08}.jsonl")
}

/// Runs every configured strategy on every seed. Writes one JSONL trace per
/// run under `traces/`, the scene's `annotations.json` and `lexicon.json`,
/// and `report.json` / `report.csv` / `curves.csv`.
pub fn cmd_simulate(cfg: &RunConfig, ctx: &Context) -> Result<SimulateReport> {
    cfg.validate()?;
    cfg.require_strategies()?;
    let scene = cfg.scene()?;
    let seeds = cfg.seeds();
    let runs = run_grid(&scene, &cfg.strategies, &seeds, &cfg.decode_options(), ctx.full_dist, ctx.jobs)?;

    ctx.prepare()?;
    let trace_dir = ctx.path("traces");
    if trace_dir.is_dir() {
        for e in std::fs::read_dir(&trace_dir).map_err(|e| Error::io(&trace_dir, e))?.flatten() {
            let p = e.path();
            if p.extension().is_some_and(|x| x == "jsonl") {
                std::fs::remove_file(&p).map_err(|e| Error::io(&p, e))?;
            }
        }
    }
    std::fs::create_dir_all(&trace_dir).map_err(|e| Error::io(&trace_dir, e))?;
    for (i, (strategy, group)) in cfg.strategies.iter().zip(&runs).enumerate() {
        for run in group {
            write_trace(&trace_dir.join(trace_name(i, strategy, run.seed)), run)?;
        }
    }
    write_json(&ctx.path("annotations.json"), &[scene.annotation()])?;
    write_json(&ctx.path("lexicon.json"), &scene.lexicon())?;

    let strategies = cfg
        .strategies
        .iter()
        .zip(&runs)
        .map(|(s, group)| strategy_report(&s.to_string(), group, &scene, cfg.bin_width))
        .collect::<Result<Vec<_>>>()?;
    let report = SimulateReport {
        scene: scene.name().to_string(),
        seeds,
        max_steps: cfg.max_steps,
        scale: "fraction".into(),
        curve_metric: CURVE_NAME.into(),
        strategies,
    };
    if ctx.wants(ReportFormat::Json) {
        write_json(&ctx.path("report.json"), &report)?;
    }
    if ctx.wants(ReportFormat::Csv) {
        let rows: Vec<SummaryRow> = report
            .strategies
            .iter()
            .map(|s| SummaryRow {
                first_token_the: 100.0 * s.sentence_initial.first_token_fraction,
                sentence_initial_the: 100.0 * s.sentence_initial.sentence_fraction,
                provider_calls_per_token: s.provider_calls_per_token,
                ..SummaryRow::new(&s.strategy, s.runs, s.tokens, &s.metrics, &s.hal_noun_rate)
            })
            .collect();
        write_csv(&ctx.path("report.csv"), &rows)?;
        let curves: Vec<CurveRow> = report
            .strategies
            .iter()
            .flat_map(|s| {
                s.curves.iter().map(|b| CurveRow {
                    metric: CURVE_NAME,
                    strategy: &s.strategy,
                    bin_start: b.start,
                    bin_end: b.end,
                    samples: b.samples,
                    gt_mass: b.gt_mass,
                    hal_mass: b.hal_mass,
                })
            })
            .collect();
        write_csv(&ctx.path("curves.csv"), &curves)?;
    }
    Ok(report)
}

/// Caption source for [`cmd_evaluate`].
#[derive(Clone, Debug)]
pub enum CaptionSource {
    /// JSONL of `{"id", "caption"}` or `{"id", "tokens"}`.
    Captions(PathBuf),
    /// Directory of traces written by [`cmd_simulate`].
    Traces(PathBuf),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRow {
    /// Strategy label for traces, `captions` for a caption file.
    pub source: String,
    pub metrics: MetricsReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluateReport {
    pub scale: String,
    pub rows: Vec<EvaluationRow>,
    pub warnings: Vec<String>,
}

/// Groups captions by source label, keeping first-appearance order.
fn group_captions(source: &CaptionSource) -> Result<Vec<(String, Vec<CaptionRecord>)>> {
    match source {
        CaptionSource::Captions(p) => Ok(vec![("captions".into(), load_captions(p)?)]),
        CaptionSource::Traces(dir) => {
            let mut groups: Vec<(String, Vec<CaptionRecord>)> = Vec::new();
            for run in read_trace_dir(dir)? {
                let cap = run.caption()?;
                match groups.iter_mut().find(|(l, _)| *l == run.strategy) {
                    Some((_, v)) => v.push(cap),
                    None => groups.push((run.strategy.clone(), vec![cap])),
                }
            }
            Ok(groups)
        }
    }
}

pub fn evaluate_groups(
    groups: &[(String, Vec<CaptionRecord>)],
    annotations: &[Annotation],
    lexicon: &ObjectLexicon,
) -> Result<EvaluateReport> {
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for (label, caps) in groups {
        let ev = evaluate_corpus(caps, annotations, lexicon)?;
        warnings.extend(ev.warnings.into_iter().map(|w| format!("{label}: {w}")));
        rows.push(EvaluationRow { source: label.clone(), metrics: ev.report });
    }
    Ok(EvaluateReport { scale: "fraction".into(), rows, warnings })
}

/// Writes `evaluation.json` / `evaluation.csv`.
pub fn cmd_evaluate(source: &CaptionSource, annotations: &Path, lexicon: &Path, ctx: &Context) -> Result<EvaluateReport> {
    let anns = load_annotations(annotations)?;
    let lex = load_lexicon(lexicon)?;
    let report = evaluate_groups(&group_captions(source)?, &anns, &lex)?;
    ctx.prepare()?;
    if ctx.wants(ReportFormat::Json) {
        write_json(&ctx.path("evaluation.json"), &report)?;
    }
    if ctx.wants(ReportFormat::Csv) {
        let rows: Vec<SummaryRow> = report
            .rows
            .iter()
            .map(|r| {
                let rate = RateSummary { pooled: 0.0, mean: 0.0, se: 0.0 };
                SummaryRow::new(&r.source, r.metrics.counts.captions as usize, 0, &r.metrics, &rate)
            })
            .collect();
        write_csv(&ctx.path("evaluation.csv"), &rows)?;
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub rank: usize,
    pub best: bool,
    pub strategy: String,
    pub schedule: String,
    pub gamma: f64,
    pub lambda: f64,
    pub beta: f64,
    pub chair_i: f64,
    pub chair_s: f64,
    pub cover: f64,
    pub cog: f64,
    pub object_score: f64,
    pub hal_noun_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub objective: String,
    pub scale: String,
    /// Grid cells, best first.
    pub rows: Vec<SweepRow>,
    /// Constrained baseline at each beta of the grid, for comparison.
    pub references: Vec<SweepRow>,
}

fn sweep_row(cfg: Option<&FlbConfig>, label: String, beta: f64, runs: &[RunSummary], scene: &Scene) -> Result<SweepRow> {
    let m = caption_metrics(runs, scene)?;
    Ok(SweepRow {
        rank: 0,
        best: false,
        strategy: label,
        schedule: cfg.map(|c| c.schedule.kind.to_string()).unwrap_or_default(),
        gamma: cfg.map_or(0.0, |c| c.schedule.gamma),
        lambda: cfg.map_or(0.0, |c| c.schedule.lambda),
        beta,
        chair_i: m.chair_i,
        chair_s: m.chair_s,
        cover: m.cover,
        cog: m.cog,
        object_score: m.object_score,
        hal_noun_rate: pooled_hal_noun_rate(runs),
    })
}

/// Runs FLB over the full `[sweep]` grid on every seed and ranks cells by
/// object score (ties keep grid order). Writes `sweep.json` / `sweep.csv`.
pub fn cmd_sweep(cfg: &RunConfig, ctx: &Context) -> Result<SweepReport> {
    cfg.validate()?;
    let spec = cfg.sweep.as_ref().ok_or_else(|| Error::config("sweep", "missing [sweep] table"))?;
    let scene = cfg.scene()?;
    let seeds = cfg.seeds();
    let grid = spec.grid();
    let mut betas: Vec<f64> = Vec::new();
    for &b in &spec.beta {
        if !betas.contains(&b) {
            betas.push(b);
        }
    }
    let mut strategies: Vec<StrategyKind> = grid.iter().map(|c| StrategyKind::Flb(*c)).collect();
    strategies.extend(betas.iter().map(|&b| StrategyKind::constrained_baseline(b)));
    let runs = run_grid(&scene, &strategies, &seeds, &cfg.decode_options(), false, ctx.jobs)?;

    let mut rows = grid
        .iter()
        .zip(&runs)
        .map(|(c, r)| sweep_row(Some(c), StrategyKind::Flb(*c).to_string(), c.beta, r, &scene))
        .collect::<Result<Vec<_>>>()?;
    let references = betas
        .iter()
        .zip(&runs[grid.len()..])
        .map(|(&b, r)| sweep_row(None, StrategyKind::constrained_baseline(b).to_string(), b, r, &scene))
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| b.object_score.total_cmp(&a.object_score));
    for (i, r) in rows.iter_mut().enumerate() {
        r.rank = i + 1;
        r.best = i == 0;
    }
    let report = SweepReport { objective: spec.objective.clone(), scale: "fraction".into(), rows, references };
    ctx.prepare()?;
    if ctx.wants(ReportFormat::Json) {
        write_json(&ctx.path("sweep.json"), &report)?;
    }
    if ctx.wants(ReportFormat::Csv) {
        let pct: Vec<SweepRow> = report
            .rows
            .iter()
            .chain(&report.references)
            .map(|r| SweepRow {
                chair_i: 100.0 * r.chair_i,
                chair_s: 100.0 * r.chair_s,
                cover: 100.0 * r.cover,
                cog: 100.0 * r.cog,
                object_score: 100.0 * r.object_score,
                hal_noun_rate: 100.0 * r.hal_noun_rate,
                ..r.clone()
            })
            .collect();
        write_csv(&ctx.path("sweep.csv"), &pct)?;
    }
    Ok(report)
}

/// Benchmarks the configured strategies single-threaded. Writes `bench.json` /
/// `bench.csv`.
pub fn cmd_bench(cfg: &RunConfig, ctx: &Context) -> Result<BenchReport> {
    cfg.validate()?;
    cfg.require_strategies()?;
    let scene = cfg.scene()?;
    let spec = cfg.bench.clone().unwrap_or_default();
    let BenchSpec { cost, min_tokens } = spec;
    let report = run_bench(&cfg.strategies, &scene, cost, &cfg.seeds(), &cfg.decode_options(), min_tokens)?;
    ctx.prepare()?;
    if ctx.wants(ReportFormat::Json) {
        write_json(&ctx.path("bench.json"), &report)?;
    }
    if ctx.wants(ReportFormat::Csv) {
        write_csv(&ctx.path("bench.csv"), &report.rows)?;
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub config: String,
    pub strategy: String,
    pub metrics: MetricsReport,
    pub hal_noun_rate: RateSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblateReport {
    pub scale: String,
    pub rows: Vec<AblationRow>,
}

/// The ablation strategies: baseline, then FLB with the first logit limited
/// to nouns, to "The", and unrestricted.
pub fn ablation_strategies(flb: FlbConfig) -> [(&'static str, StrategyKind); 4] {
    let with = |m| StrategyKind::Flb(FlbConfig { l0_mask: m, ..flb });
    [
        ("baseline", StrategyKind::baseline()),
        ("nouns_only", with(L0Mask::NounsOnly)),
        ("the_only", with(L0Mask::TheOnly)),
        ("full", with(L0Mask::Full)),
    ]
}

/// Uses the first FLB strategy in the config for gamma, lambda and beta, or
/// the defaults. Writes `ablate.json` / `ablate.csv`.
pub fn cmd_ablate(cfg: &RunConfig, ctx: &Context) -> Result<AblateReport> {
    cfg.validate()?;
    let flb = cfg
        .strategies
        .iter()
        .find_map(|s| match s {
            StrategyKind::Flb(c) => Some(*c),
            _ => None,
        })
        .unwrap_or_default();
    let scene = cfg.scene()?;
    let configs = ablation_strategies(flb);
    let strategies: Vec<StrategyKind> = configs.iter().map(|(_, s)| *s).collect();
    let runs = run_grid(&scene, &strategies, &cfg.seeds(), &cfg.decode_options(), false, ctx.jobs)?;
    let rows = configs
        .iter()
        .zip(&runs)
        .map(|((name, s), r)| {
            Ok(AblationRow {
                config: name.to_string(),
                strategy: s.to_string(),
                metrics: caption_metrics(r, &scene)?,
                hal_noun_rate: RateSummary::of(r),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let report = AblateReport { scale: "fraction".into(), rows };
    ctx.prepare()?;
    if ctx.wants(ReportFormat::Json) {
        write_json(&ctx.path("ablate.json"), &report)?;
    }
    if ctx.wants(ReportFormat::Csv) {
        let rows: Vec<SummaryRow> = report
            .rows
            .iter()
            .map(|r| SummaryRow::new(&r.config, r.metrics.counts.captions as usize, 0, &r.metrics, &r.hal_noun_rate))
            .collect();
        write_csv(&ctx.path("ablate.csv"), &rows)?;
    }
    Ok(report)
}
