//! Object-hallucination metrics over captions and decoding traces.

mod analysis;
mod chair;
pub mod io;
mod objects;
pub mod stats;

pub use analysis::{
    article_stats, entropy_stats, hal_mass_in, pooled_hal_noun_rate, positional_curves, sentence_initial_stats,
    summarize, ArticleRow, ArticleStats, CurveBin, EntropyGroup, RunSummary, SentenceInitialStats, StepSummary,
    CURVE_NAME,
};
pub use chair::{chair_i, chair_s, cog, cover, evaluate_corpus, recall, CorpusEvaluation, MetricCounts, MetricsReport};
pub use objects::{extract_objects, mention_set, tokenize, Annotation, CaptionRecord, Mention, ObjectLexicon};
