use serde::{Deserialize, Serialize};

use super::objects::CaptionRecord;
use crate::error::{Error, Result};
use crate::logits::{GenerationRecord, TokenId};
use crate::simulator::{GrammarState, Scene, TokenClass};

/// Compact per-step telemetry: everything the trace analyses consume.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepSummary {
    pub t: usize,
    pub chosen: TokenId,
    pub token: String,
    pub class: TokenClass,
    /// Whether the grammar admitted a noun at this step.
    pub noun_slot: bool,
    pub entropy: f64,
    pub chosen_prob: f64,
    pub gt_mass: f64,
    pub hal_mass: f64,
    pub provider_calls: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dist: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub prompt_id: String,
    pub strategy: String,
    pub seed: u64,
    pub steps: Vec<StepSummary>,
}

pub fn summarize(record: &GenerationRecord, scene: &Scene, full_dist: bool) -> RunSummary {
    let mut state = GrammarState::Start;
    let steps = record
        .steps
        .iter()
        .map(|s| {
            let class = scene.class(s.chosen);
            let out = StepSummary {
                t: s.step_index,
                chosen: s.chosen,
                token: scene.vocab().token(s.chosen).to_string(),
                class,
                noun_slot: state.admits_nouns(),
                entropy: s.entropy_nats,
                chosen_prob: s.dist.prob(s.chosen),
                gt_mass: s.dist.mass(scene.gt_ids().iter().copied()),
                hal_mass: s.dist.mass(scene.hal_ids().iter().copied()),
                provider_calls: s.provider_calls,
                dist: full_dist.then(|| s.dist.probs().to_vec()),
            };
            state = state.advance(class);
            out
        })
        .collect();
    RunSummary { prompt_id: record.prompt_id.clone(), strategy: record.strategy.clone(), seed: record.seed, steps }
}

impl RunSummary {
    pub fn tokens(&self) -> Vec<String> {
        self.steps.iter().map(|s| s.token.clone()).collect()
    }

    pub fn caption(&self) -> Result<CaptionRecord> {
        CaptionRecord::new(self.prompt_id.clone(), self.tokens())
    }

    pub fn noun_counts(&self) -> (usize, usize) {
        let gt = self.steps.iter().filter(|s| s.class == TokenClass::GtObject).count();
        let hal = self.steps.iter().filter(|s| s.class == TokenClass::HalObject).count();
        (gt, hal)
    }

    /// Hallucinated nouns over all emitted nouns; 0 for a run without nouns.
    pub fn hal_noun_rate(&self) -> f64 {
        match self.noun_counts() {
            (0, 0) => 0.0,
            (g, h) => h as f64 / (g + h) as f64,
        }
    }

    pub fn provider_calls(&self) -> u64 {
        self.steps.iter().map(|s| u64::from(s.provider_calls)).sum()
    }
}

/// Pooled hallucinated-noun rate over runs.
pub fn pooled_hal_noun_rate(runs: &[RunSummary]) -> f64 {
    let (g, h) = runs.iter().map(RunSummary::noun_counts).fold((0, 0), |(a, b), (g, h)| (a + g, b + h));
    if g + h == 0 {
        0.0
    } else {
        h as f64 / (g + h) as f64
    }
}

/// Noun-set probability mass at noun-admitting steps, averaged in step bins.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveBin {
    pub start: usize,
    pub end: usize,
    pub samples: usize,
    pub gt_mass: f64,
    pub hal_mass: f64,
}

pub const CURVE_NAME: &str = "positional_curves(reconstructed)";

/// Bins cover `[0, bin_width)`, `[bin_width, 2·bin_width)`, ... up to the
/// longest run. Bins without noun slots report zero samples and zero mass.
pub fn positional_curves(runs: &[RunSummary], bin_width: usize) -> Result<Vec<CurveBin>> {
    if bin_width == 0 {
        return Err(Error::Contract("bin_width must be positive".into()));
    }
    let max_t = runs.iter().flat_map(|r| r.steps.last()).map(|s| s.t).max();
    let Some(max_t) = max_t else { return Ok(Vec::new()) };
    let mut bins: Vec<CurveBin> = (0..=max_t / bin_width)
        .map(|b| CurveBin { start: b * bin_width, end: (b + 1) * bin_width, samples: 0, gt_mass: 0.0, hal_mass: 0.0 })
        .collect();
    for s in runs.iter().flat_map(|r| &r.steps).filter(|s| s.noun_slot) {
        let bin = &mut bins[s.t / bin_width];
        bin.samples += 1;
        bin.gt_mass += s.gt_mass;
        bin.hal_mass += s.hal_mass;
    }
    for b in &mut bins {
        if b.samples > 0 {
            b.gt_mass /= b.samples as f64;
            b.hal_mass /= b.samples as f64;
        }
    }
    Ok(bins)
}

/// Mean hal-noun mass over noun slots with `start <= t < end`.
pub fn hal_mass_in(runs: &[RunSummary], start: usize, end: usize) -> Option<f64> {
    let (n, sum) = runs
        .iter()
        .flat_map(|r| &r.steps)
        .filter(|s| s.noun_slot && (start..end).contains(&s.t))
        .fold((0usize, 0.0), |(n, sum), s| (n + 1, sum + s.hal_mass));
    (n > 0).then(|| sum / n as f64)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ArticleRow {
    pub gt_count: usize,
    pub hal_count: usize,
    pub gt_share: f64,
    pub hal_share: f64,
    pub gt_mean_prob: f64,
    pub hal_mean_prob: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ArticleStats {
    pub after_the: ArticleRow,
    pub after_a: ArticleRow,
}

fn is_the(tok: &str) -> bool {
    tok == "The" || tok == "the"
}

fn is_a(tok: &str) -> bool {
    tok == "A" || tok == "a"
}

/// Emitted nouns paired with the token emitted right before them.
fn nouns_with_previous(runs: &[RunSummary]) -> impl Iterator<Item = (Option<&StepSummary>, &StepSummary)> {
    runs.iter().flat_map(|r| {
        r.steps
            .iter()
            .enumerate()
            .filter(|(_, s)| s.class.is_noun())
            .map(|(i, s)| (i.checked_sub(1).map(|p| &r.steps[p]), s))
    })
}

pub fn article_stats(runs: &[RunSummary]) -> ArticleStats {
    let row = |pred: fn(&str) -> bool| {
        let (mut gt, mut hal, mut gt_p, mut hal_p) = (0usize, 0usize, 0.0, 0.0);
        for (prev, s) in nouns_with_previous(runs) {
            if !prev.is_some_and(|p| pred(&p.token)) {
                continue;
            }
            if s.class == TokenClass::GtObject {
                gt += 1;
                gt_p += s.chosen_prob;
            } else {
                hal += 1;
                hal_p += s.chosen_prob;
            }
        }
        let div = |a: f64, n: usize| if n == 0 { 0.0 } else { a / n as f64 };
        ArticleRow {
            gt_count: gt,
            hal_count: hal,
            gt_share: div(gt as f64, gt + hal),
            hal_share: div(hal as f64, gt + hal),
            gt_mean_prob: div(gt_p, gt),
            hal_mean_prob: div(hal_p, hal),
        }
    };
    ArticleStats { after_the: row(is_the), after_a: row(is_a) }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyGroup {
    pub group: String,
    pub mean: f64,
    pub count: usize,
}

/// Mean step entropy for: all tokens, all nouns, gt nouns, hal nouns, and
/// nouns after The/the, after anything else, and after A/a.
pub fn entropy_stats(runs: &[RunSummary]) -> Vec<EntropyGroup> {
    let mut groups: Vec<(&str, f64, usize)> = [
        "all_tokens",
        "all_nouns",
        "gt_nouns",
        "hal_nouns",
        "after_the",
        "after_other_than_the",
        "after_a",
    ]
    .into_iter()
    .map(|g| (g, 0.0, 0))
    .collect();
    let mut add = |i: usize, h: f64| {
        groups[i].1 += h;
        groups[i].2 += 1;
    };
    for s in runs.iter().flat_map(|r| &r.steps) {
        add(0, s.entropy);
    }
    for (prev, s) in nouns_with_previous(runs) {
        add(1, s.entropy);
        add(if s.class == TokenClass::GtObject { 2 } else { 3 }, s.entropy);
        let prev = prev.map(|p| p.token.as_str()).unwrap_or("");
        add(if is_the(prev) { 4 } else { 5 }, s.entropy);
        if is_a(prev) {
            add(6, s.entropy);
        }
    }
    groups
        .into_iter()
        .map(|(g, sum, n)| EntropyGroup { group: g.into(), mean: if n == 0 { 0.0 } else { sum / n as f64 }, count: n })
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SentenceInitialStats {
    pub runs: usize,
    pub runs_starting_with_the: usize,
    pub first_token_fraction: f64,
    pub sentence_starts: usize,
    pub sentence_starts_the: usize,
    /// Share of "The" among all sentence-initial tokens: the first token and
    /// every token after one ending in `.`, `!` or `?`.
    pub sentence_fraction: f64,
}

pub fn sentence_initial_stats(runs: &[RunSummary]) -> SentenceInitialStats {
    let mut st = SentenceInitialStats { runs: runs.len(), ..Default::default() };
    for r in runs {
        if r.steps.first().is_some_and(|s| s.token == "The") {
            st.runs_starting_with_the += 1;
        }
        let mut initial = true;
        for s in &r.steps {
            if s.class == TokenClass::Eos {
                break;
            }
            if initial {
                st.sentence_starts += 1;
                st.sentence_starts_the += usize::from(s.token == "The");
            }
            initial = s.token.ends_with(['.', '!', '?']);
        }
    }
    let frac = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    st.first_token_fraction = frac(st.runs_starting_with_the, st.runs);
    st.sentence_fraction = frac(st.sentence_starts_the, st.sentence_starts);
    st
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step(t: usize, token: &str, class: TokenClass, entropy: f64, p: f64) -> StepSummary {
        StepSummary {
            t,
            chosen: TokenId(0),
            token: token.into(),
            class,
            noun_slot: false,
            entropy,
            chosen_prob: p,
            gt_mass: 0.0,
            hal_mass: 0.0,
            provider_calls: 1,
            dist: None,
        }
    }

    fn run(tokens: &[(&str, TokenClass)]) -> RunSummary {
        RunSummary {
            prompt_id: "x".into(),
            strategy: "baseline".into(),
            seed: 0,
            steps: tokens.iter().enumerate().map(|(t, &(tok, c))| step(t, tok, c, t as f64, 0.5)).collect(),
        }
    }

    use TokenClass::*;

    #[test]
    fn all_nouns_after_the() {
        let r = run(&[("The", Article(0)), ("dog", GtObject), (".", Connective), ("The", Article(0)), ("cat", HalObject)]);
        let st = article_stats(&[r]);
        assert_eq!(st.after_a, ArticleRow::default());
        assert_eq!((st.after_the.gt_count, st.after_the.hal_count), (1, 1));
        assert_eq!(st.after_the.hal_share, 0.5);
    }

    #[test]
    fn entropy_partition_sums_to_nouns() {
        let r = run(&[("a", Article(3)), ("dog", GtObject), ("and", Connective), ("The", Article(0)), ("cat", HalObject)]);
        let g = entropy_stats(&[r]);
        let by = |n: &str| g.iter().find(|e| e.group == n).unwrap();
        assert_eq!(by("all_tokens").count, 5);
        assert_eq!(by("all_tokens").mean, 2.0);
        assert_eq!(by("after_the").count + by("after_other_than_the").count, by("all_nouns").count);
        assert_eq!(by("after_a").mean, 1.0);
        assert_eq!(by("hal_nouns").mean, 4.0);
    }

    #[test]
    fn sentence_starts() {
        let r = run(&[("In", Article(1)), ("dog", GtObject), (".", Connective), ("The", Article(0)), ("cat", HalObject), ("</s>", Eos)]);
        let st = sentence_initial_stats(&[r]);
        assert_eq!(st.runs_starting_with_the, 0);
        assert_eq!((st.sentence_starts, st.sentence_starts_the), (2, 1));
        assert_eq!(st.sentence_fraction, 0.5);
    }

    #[test]
    fn curves_bin_noun_slots() {
        let mut r = run(&[("The", Article(0)), ("dog", GtObject), (".", Connective), ("A", Article(2)), ("cat", HalObject)]);
        r.steps[1].noun_slot = true;
        r.steps[1].hal_mass = 0.2;
        r.steps[4].noun_slot = true;
        r.steps[4].hal_mass = 0.6;
        let bins = positional_curves(&[r.clone()], 2).unwrap();
        assert_eq!(bins.len(), 3);
        assert_eq!((bins[0].samples, bins[0].hal_mass), (1, 0.2));
        assert_eq!(bins[1].samples, 0);
        assert_eq!(bins[2].hal_mass, 0.6);
        assert!((hal_mass_in(&[r], 0, 10).unwrap() - 0.4).abs() < 1e-15);
    }
}
