use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::objects::{extract_objects, mention_set, Annotation, CaptionRecord, ObjectLexicon};
use crate::error::{Error, Result};
use crate::weighting::{object_score, ScoreScale};

/// `|mentions \ gt| / |mentions|`, 0 for no mentions.
pub fn chair_i(mentions: &BTreeSet<String>, gt: &BTreeSet<String>) -> f64 {
    if mentions.is_empty() {
        return 0.0;
    }
    mentions.difference(gt).count() as f64 / mentions.len() as f64
}

/// Fraction of captions with at least one hallucinated mention.
pub fn chair_s(hallucinated: &[bool]) -> Result<f64> {
    if hallucinated.is_empty() {
        return Err(Error::input(None, "chair_s over an empty corpus"));
    }
    Ok(hallucinated.iter().filter(|&&h| h).count() as f64 / hallucinated.len() as f64)
}

/// `|mentions ∩ gt| / |gt|`.
pub fn cover(mentions: &BTreeSet<String>, gt: &BTreeSet<String>) -> Result<f64> {
    if gt.is_empty() {
        return Err(Error::input(None, "cover needs a nonempty ground-truth set"));
    }
    Ok(mentions.intersection(gt).count() as f64 / gt.len() as f64)
}

/// Same quantity as [`cover`]; reported under its own name.
pub fn recall(mentions: &BTreeSet<String>, gt: &BTreeSet<String>) -> Result<f64> {
    cover(mentions, gt)
}

/// `|hallucinated ∩ cognition| / |hallucinated|`, 0 for no hallucinations.
pub fn cog(hallucinated: &BTreeSet<String>, cognition: &BTreeSet<String>) -> f64 {
    if hallucinated.is_empty() {
        return 0.0;
    }
    hallucinated.intersection(cognition).count() as f64 / hallucinated.len() as f64
}

/// Set-level counts for one caption against its annotation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricCounts {
    pub captions: u64,
    /// Distinct mentioned objects, summed over captions.
    pub mentions: u64,
    pub hallucinated: u64,
    pub captions_with_hallucination: u64,
    pub gt_objects: u64,
    pub gt_covered: u64,
    pub cognition_hits: u64,
}

impl MetricCounts {
    pub fn for_caption(mentions: &BTreeSet<String>, ann: &Annotation) -> Self {
        let hal: BTreeSet<String> = mentions.difference(&ann.gt_objects).cloned().collect();
        MetricCounts {
            captions: 1,
            mentions: mentions.len() as u64,
            hallucinated: hal.len() as u64,
            captions_with_hallucination: u64::from(!hal.is_empty()),
            gt_objects: ann.gt_objects.len() as u64,
            gt_covered: mentions.intersection(&ann.gt_objects).count() as u64,
            cognition_hits: hal.intersection(&ann.cognition_objects).count() as u64,
        }
    }

    pub fn merge(&mut self, o: &MetricCounts) {
        self.captions += o.captions;
        self.mentions += o.mentions;
        self.hallucinated += o.hallucinated;
        self.captions_with_hallucination += o.captions_with_hallucination;
        self.gt_objects += o.gt_objects;
        self.gt_covered += o.gt_covered;
        self.cognition_hits += o.cognition_hits;
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Corpus-level rates as fractions, with the counts behind them. Rates pool
/// counts over captions (micro averages).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub chair_i: f64,
    pub chair_s: f64,
    pub cover: f64,
    pub cog: f64,
    pub recall: f64,
    pub object_score: f64,
    pub counts: MetricCounts,
}

impl MetricsReport {
    pub fn from_counts(counts: MetricCounts) -> Result<Self> {
        if counts.captions == 0 {
            return Err(Error::input(None, "no captions to evaluate"));
        }
        if counts.gt_objects == 0 {
            return Err(Error::input(None, "annotations contain no ground-truth objects"));
        }
        let chair_i = ratio(counts.hallucinated, counts.mentions);
        let cover = ratio(counts.gt_covered, counts.gt_objects);
        Ok(MetricsReport {
            chair_i,
            chair_s: ratio(counts.captions_with_hallucination, counts.captions),
            cover,
            cog: ratio(counts.cognition_hits, counts.hallucinated),
            recall: cover,
            object_score: object_score(chair_i, cover, ScoreScale::Fraction),
            counts,
        })
    }

    /// Rates scaled to percent.
    pub fn percent(&self) -> [f64; 6] {
        [self.chair_i, self.chair_s, self.cover, self.cog, self.recall, self.object_score].map(|r| 100.0 * r)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorpusEvaluation {
    pub report: MetricsReport,
    /// Caption ids without an annotation, and annotation ids without a caption.
    pub warnings: Vec<String>,
}

/// Joins captions to annotations by id and pools counts. Captions with no
/// matching annotation are skipped and reported as warnings.
pub fn evaluate_corpus(
    captions: &[CaptionRecord],
    annotations: &[Annotation],
    lexicon: &ObjectLexicon,
) -> Result<CorpusEvaluation> {
    let mut by_id: BTreeMap<&str, &Annotation> = BTreeMap::new();
    for a in annotations {
        a.validate()?;
        if by_id.insert(&a.item_id, a).is_some() {
            return Err(Error::input(None, format!("duplicate annotation id {:?}", a.item_id)));
        }
    }
    let mut warnings = Vec::new();
    let mut seen = BTreeSet::new();
    let mut counts = MetricCounts::default();
    for c in captions {
        match by_id.get(c.item_id.as_str()) {
            Some(ann) => {
                seen.insert(c.item_id.as_str());
                let mentions = mention_set(&extract_objects(c, lexicon));
                counts.merge(&MetricCounts::for_caption(&mentions, ann));
            }
            None => warnings.push(format!("caption {:?} has no annotation", c.item_id)),
        }
    }
    for id in by_id.keys().filter(|id| !seen.contains(*id)) {
        warnings.push(format!("annotation {id:?} has no caption"));
    }
    Ok(CorpusEvaluation { report: MetricsReport::from_counts(counts)?, warnings })
}
