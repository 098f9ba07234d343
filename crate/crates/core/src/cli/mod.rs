//! Command-line front end.

mod commands;
mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{
    ablation_strategies, cmd_ablate, cmd_bench, cmd_evaluate, cmd_simulate, cmd_sweep, evaluate_groups, run_grid,
    strategy_report, AblateReport, AblationRow, CaptionSource, Context, EvaluateReport, EvaluationRow, RateSummary,
    SimulateReport, StrategyReport, SweepReport, SweepRow,
};
pub use config::{parse_seeds, BenchSpec, ReportFormat, RunConfig, SeedSpec, SweepSpec, SEED_ENV};

use crate::error::{Error, Result};

pub const DEFAULT_CONFIG: &str = include_str!("../../configs/default.toml");

#[derive(Debug, Parser)]
#[command(name = "logit-anchor", version, about = "First-logit boosting and contrastive decoding on a synthetic captioner")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Run configuration (TOML). Defaults to the built-in configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory [default: config `out`, else ./out]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads for independent runs.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Seed list, e.g. `0..200` or `1,2,3`. Overrides the config and LOGIT_ANCHOR_SEED.
    #[arg(long)]
    pub seeds: Option<String>,
    /// Store full per-step distributions in traces.
    #[arg(long)]
    pub full_dist: bool,
    /// Report formats to write (repeatable) [default: config `formats`]
    #[arg(long, value_enum)]
    pub format: Vec<ReportFormat>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run strategies on the synthetic scene; write traces and reports.
    Simulate(Common),
    /// Score captions or saved traces against annotations.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// JSONL captions: {"id", "caption"} or {"id", "tokens"} per line.
        #[arg(long, conflicts_with = "traces", required_unless_present = "traces")]
        captions: Option<PathBuf>,
        /// Directory of traces written by `simulate`.
        #[arg(long)]
        traces: Option<PathBuf>,
        /// JSON array of {"id", "gt_objects", "cognition_objects"}
        #[arg(long)]
        annotations: PathBuf,
        /// JSON object mapping each object name to its surface forms
        #[arg(long)]
        lexicon: PathBuf,
    },
    /// Grid search over FLB parameters, ranked by object score.
    Sweep(Common),
    /// Per-token provider calls and latency.
    Bench(Common),
    /// Baseline against FLB with the first logit restricted to nouns, to "The", or unrestricted.
    Ablate(Common),
}

/// Loads the config, then applies LOGIT_ANCHOR_SEED and `--seeds` in that order.
pub fn resolve(common: &Common) -> Result<(RunConfig, Context)> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::from_toml_str(DEFAULT_CONFIG)?,
    };
    cfg.apply_env()?;
    if let Some(s) = &common.seeds {
        cfg.seeds = SeedSpec::List(parse_seeds(s)?);
    }
    if common.jobs == 0 {
        return Err(Error::config("--jobs", "must be at least 1"));
    }
    let out = common.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let formats = if common.format.is_empty() { cfg.formats.clone() } else { common.format.clone() };
    let ctx = Context { out, jobs: common.jobs, full_dist: common.full_dist, formats };
    Ok((cfg, ctx))
}

fn pct(x: f64) -> String {
    format!("{:6.2}", 100.0 * x)
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(c) => {
            let (cfg, ctx) = resolve(&c)?;
            let rep = cmd_simulate(&cfg, &ctx)?;
            println!("{:<60} {:>6} {:>6} {:>6} {:>6} {:>7} {:>7}", "strategy", "CHAIR", "Cover", "Hal", "Cog", "halrate", "The@0");
            for s in &rep.strategies {
                let m = &s.metrics;
                println!(
                    "{:<60} {} {} {} {} {:>7} {:>7}",
                    s.strategy,
                    pct(m.chair_i),
                    pct(m.cover),
                    pct(m.chair_s),
                    pct(m.cog),
                    pct(s.hal_noun_rate.pooled),
                    pct(s.sentence_initial.first_token_fraction)
                );
            }
            println!("wrote {}", ctx.out.display());
        }
        Command::Evaluate { common, captions, traces, annotations, lexicon } => {
            let (_, ctx) = resolve(&common)?;
            let source = match (captions, traces) {
                (Some(c), None) => CaptionSource::Captions(c),
                (None, Some(t)) => CaptionSource::Traces(t),
                _ => return Err(Error::config("evaluate", "give exactly one of --captions or --traces")),
            };
            let rep = cmd_evaluate(&source, &annotations, &lexicon, &ctx)?;
            for w in &rep.warnings {
                eprintln!("warning: {w}");
            }
            for r in &rep.rows {
                let m = &r.metrics;
                println!(
                    "{:<60} CHAIR_i {} CHAIR_s {} Cover {} Cog {} Recall {} score {}",
                    r.source,
                    pct(m.chair_i),
                    pct(m.chair_s),
                    pct(m.cover),
                    pct(m.cog),
                    pct(m.recall),
                    pct(m.object_score)
                );
            }
        }
        Command::Sweep(c) => {
            let (cfg, ctx) = resolve(&c)?;
            let rep = cmd_sweep(&cfg, &ctx)?;
            println!("{:>4}  {:<12} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6}", "rank", "schedule", "gamma", "lambda", "beta", "CHAIR", "Cover", "score");
            for r in rep.rows.iter().chain(&rep.references) {
                let mark = if r.best { "*" } else { " " };
                let rank = if r.rank == 0 { "ref".to_string() } else { r.rank.to_string() };
                let schedule = if r.schedule.is_empty() { &r.strategy } else { &r.schedule };
                println!(
                    "{rank:>4}{mark} {schedule:<12} {:>6} {:>6} {:>6} {} {} {}",
                    r.gamma,
                    r.lambda,
                    r.beta,
                    pct(r.chair_i),
                    pct(r.cover),
                    pct(r.object_score)
                );
            }
        }
        Command::Bench(c) => {
            let (cfg, ctx) = resolve(&c)?;
            let rep = cmd_bench(&cfg, &ctx)?;
            println!("{:<60} {:>8} {:>10} {:>10} {:>8}", "strategy", "calls/t", "ms/token", "overhead", "tokens");
            for r in &rep.rows {
                println!(
                    "{:<60} {:>8.3} {:>10.4} {:>10.4} {:>8}",
                    r.strategy, r.provider_calls_per_token, r.wall_ms_per_token, r.overhead_ms_per_token, r.tokens_measured
                );
            }
        }
        Command::Ablate(c) => {
            let (cfg, ctx) = resolve(&c)?;
            let rep = cmd_ablate(&cfg, &ctx)?;
            println!("{:<12} {:>6} {:>6} {:>6} {:>6} {:>7}", "config", "CHAIR", "Cover", "Hal", "Cog", "halrate");
            for r in &rep.rows {
                let m = &r.metrics;
                println!(
                    "{:<12} {} {} {} {} {:>7}",
                    r.config,
                    pct(m.chair_i),
                    pct(m.cover),
                    pct(m.chair_s),
                    pct(m.cog),
                    pct(r.hal_noun_rate.pooled)
                );
            }
        }
    }
    Ok(())
}
