use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulator::{preset, CostModel, Scene, SceneSpec};
use crate::strategies::{DecodeMode, DecodeOptions, FlbConfig, StrategyKind};
use crate::weighting::ScheduleKind;

pub const SEED_ENV: &str = "LOGIT_ANCHOR_SEED";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedSpec {
    List(Vec<u64>),
    Range { start: u64, count: u64 },
}

impl SeedSpec {
    pub fn expand(&self) -> Vec<u64> {
        match self {
            SeedSpec::List(v) => v.clone(),
            SeedSpec::Range { start, count } => (*start..start.saturating_add(*count)).collect(),
        }
    }
}

/// Parses `1,2,7` or ranges like `0..200` (end exclusive), mixed freely.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let bad = |item: &str| Error::config("seeds", format!("cannot parse {item:?} as a seed or start..end range"));
    let mut out = Vec::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if let Some((a, b)) = item.split_once("..") {
            let a: u64 = a.trim().parse().map_err(|_| bad(item))?;
            let b: u64 = b.trim().parse().map_err(|_| bad(item))?;
            out.extend(a..b);
        } else {
            out.push(item.parse().map_err(|_| bad(item))?);
        }
    }
    if out.is_empty() {
        return Err(Error::config("seeds", "seed list is empty"));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub gamma: Vec<f64>,
    pub lambda: Vec<f64>,
    pub beta: Vec<f64>,
    #[serde(default = "default_schedules")]
    pub schedule: Vec<ScheduleKind>,
    /// Only `object_score` is supported.
    #[serde(default = "default_objective")]
    pub objective: String,
}

fn default_schedules() -> Vec<ScheduleKind> {
    vec![ScheduleKind::Increasing]
}

fn default_objective() -> String {
    "object_score".into()
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, empty) in [
            ("sweep.gamma", self.gamma.is_empty()),
            ("sweep.lambda", self.lambda.is_empty()),
            ("sweep.beta", self.beta.is_empty()),
            ("sweep.schedule", self.schedule.is_empty()),
        ] {
            if empty {
                return Err(Error::config(name, "grid must be nonempty"));
            }
        }
        if self.objective != "object_score" {
            return Err(Error::config("sweep.objective", format!("unsupported objective {:?}", self.objective)));
        }
        for cfg in self.grid() {
            cfg.validate().map_err(|e| match e {
                Error::Config { path, msg } => Error::config(format!("sweep.{path}"), msg),
                other => other,
            })?;
        }
        Ok(())
    }

    /// Grid cells in schedule, gamma, lambda, beta order.
    pub fn grid(&self) -> Vec<FlbConfig> {
        let mut out = Vec::new();
        for &kind in &self.schedule {
            for &gamma in &self.gamma {
                for &lambda in &self.lambda {
                    for &beta in &self.beta {
                        let mut cfg = FlbConfig { beta, ..FlbConfig::default() };
                        cfg.schedule.kind = kind;
                        cfg.schedule.gamma = gamma;
                        cfg.schedule.lambda = lambda;
                        out.push(cfg);
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchSpec {
    #[serde(flatten)]
    pub cost: CostModel,
    #[serde(default = "default_min_tokens")]
    pub min_tokens: usize,
}

fn default_min_tokens() -> usize {
    crate::bench::MIN_TOKENS
}

impl Default for BenchSpec {
    fn default() -> Self {
        Self { cost: CostModel::Cheap, min_tokens: default_min_tokens() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Built-in preset name.
    #[serde(default)]
    pub scene: Option<String>,
    /// Scene description file, relative to the config file.
    #[serde(default)]
    pub scene_file: Option<PathBuf>,
    #[serde(rename = "strategy", default)]
    pub strategies: Vec<StrategyKind>,
    pub seeds: SeedSpec,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    #[serde(default)]
    pub mode: DecodeMode,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default = "default_formats")]
    pub formats: Vec<ReportFormat>,
    #[serde(default = "default_bin_width")]
    pub bin_width: usize,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub bench: Option<BenchSpec>,
}

fn default_max_steps() -> usize {
    60
}

fn default_temperature() -> f64 {
    1.0
}

fn default_formats() -> Vec<ReportFormat> {
    vec![ReportFormat::Json, ReportFormat::Csv]
}

fn default_bin_width() -> usize {
    10
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let msg = e.message().to_string();
            let at = e.span().map(|s| format!("config (byte {})", s.start)).unwrap_or_else(|| "config".into());
            Error::config(at, msg)
        })
    }

    /// Reads the file and resolves `scene_file` against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let (Some(f), Some(dir)) = (&cfg.scene_file, path.parent()) {
            if f.is_relative() {
                cfg.scene_file = Some(dir.join(f));
            }
        }
        Ok(cfg)
    }

    pub fn seeds(&self) -> Vec<u64> {
        self.seeds.expand()
    }

    /// Replaces the seed list from `LOGIT_ANCHOR_SEED`, if set.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seeds = SeedSpec::List(parse_seeds(&v).map_err(|e| match e {
                Error::Config { msg, .. } => Error::config(SEED_ENV, msg),
                other => other,
            })?);
        }
        Ok(())
    }

    pub fn decode_options(&self) -> DecodeOptions {
        DecodeOptions { max_steps: self.max_steps, mode: self.mode, temperature: self.temperature }
    }

    pub fn validate(&self) -> Result<()> {
        if self.scene.is_some() && self.scene_file.is_some() {
            return Err(Error::config("scene", "set either scene or scene_file, not both"));
        }
        if self.seeds().is_empty() {
            return Err(Error::config("seeds", "seed list is empty"));
        }
        if self.max_steps == 0 {
            return Err(Error::config("max_steps", "must be at least 1"));
        }
        if self.bin_width == 0 {
            return Err(Error::config("bin_width", "must be at least 1"));
        }
        self.decode_options().validate()?;
        for (i, s) in self.strategies.iter().enumerate() {
            s.validate().map_err(|e| match e {
                Error::Config { path, msg } => Error::config(format!("strategy[{i}].{path}"), msg),
                other => other,
            })?;
        }
        if let Some(sw) = &self.sweep {
            sw.validate()?;
        }
        Ok(())
    }

    /// Commands that run strategies call this instead of [`Self::validate`].
    pub fn require_strategies(&self) -> Result<()> {
        if self.strategies.is_empty() {
            return Err(Error::config("strategy", "at least one [[strategy]] is required"));
        }
        Ok(())
    }

    pub fn scene(&self) -> Result<Arc<Scene>> {
        let spec = match (&self.scene, &self.scene_file) {
            (_, Some(path)) => SceneSpec::load(path)?,
            (Some(name), None) => preset(name)?,
            (None, None) => preset("default")?,
        };
        Ok(Arc::new(spec.compile()?))
    }
}
