//! Preference-pair curation from dual translations.
//!
//! Each article's two candidate translations pass through three stages in
//! fixed order: language check, truncation check, then quality-score delta.
//! The first stage that can tell the candidates apart emits the pair; later
//! stages never see that article again.

mod assemble;
mod formatting;
mod pipeline;

pub use assemble::{assemble_dataset, formatting_count, Assembled, CategoryShare, Manifest};
pub use formatting::make_formatting_pairs;
pub use pipeline::{curate, curate_and_assemble, CleanTranslation, Curated, CurationRun, ScoreSource};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::langid::LanguageJudge;
use crate::scorer::ScorerError;
use crate::types::{Article, CandidateTranslation};

/// Slack for comparisons on decimal thresholds, so that 0.80 - 0.75 is not
/// read as exceeding 0.05 because of binary rounding.
const THRESHOLD_EPS: f64 = 1e-12;

pub const DEFAULT_PROMPT_TEMPLATE: &str =
    "Prevedi naslednje angleško besedilo v slovenščino.\n\n{source}";

/// `delta > threshold`, strictly, up to float noise.
pub fn exceeds_threshold(delta: f64, threshold: f64) -> bool {
    delta - threshold > THRESHOLD_EPS
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurationError {
    #[error("invalid curation config: {0}")]
    InvalidConfig(String),
    #[error("translations belong to different articles: {0} vs {1}")]
    MismatchedArticles(String, String),
    #[error("both translations of {0} come from the same model")]
    SameModel(String),
    #[error("missing quality score for {article_id}/{model_id}")]
    MissingScore { article_id: String, model_id: String },
    #[error("prompt template lacks the {{source}} placeholder")]
    MissingPlaceholder,
    #[error("cannot sample {requested} formatting pairs from an empty pool")]
    EmptyPool { requested: usize },
    #[error("prefix list is empty")]
    NoPrefixes,
    #[error("formatting fraction needs {requested} pairs but at most {max_attainable} are attainable")]
    FormattingUnattainable { requested: usize, max_attainable: usize },
    #[error("no language, truncation or score-delta pairs to assemble")]
    NoPairs,
    #[error("formatting pairs are generated during assembly and must not be supplied")]
    FormattingSupplied,
    #[error("article {article_id} has {found} translations, expected 2")]
    TranslationCount { article_id: String, found: usize },
    #[error("translation references unknown article {0}")]
    UnknownArticle(String),
    #[error("val_count {val_count} leaves no training pairs out of {total}")]
    ValidationSplit { val_count: usize, total: usize },
    #[error(transparent)]
    Scorer(#[from] ScorerError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CurationConfig {
    pub target_language: String,
    pub truncation_ratio: f64,
    pub score_delta_threshold: f64,
    pub formatting_fraction: f64,
    pub prefix_list: Vec<String>,
    pub min_confidence: f64,
    pub seed: u64,
    pub prompt_template: String,
    pub val_count: usize,
}

impl Default for CurationConfig {
    fn default() -> Self {
        Self {
            target_language: "sl".into(),
            truncation_ratio: 0.5,
            score_delta_threshold: 0.05,
            formatting_fraction: 0.20,
            prefix_list: vec!["Slovenski prevod:".into(), "Slovene translation:".into()],
            min_confidence: 0.5,
            seed: 0,
            prompt_template: DEFAULT_PROMPT_TEMPLATE.into(),
            val_count: 1000,
        }
    }
}

impl CurationConfig {
    pub fn validate(&self) -> Result<(), CurationError> {
        let bad = |m: String| Err(CurationError::InvalidConfig(m));
        if !(self.truncation_ratio > 0.0 && self.truncation_ratio < 1.0) {
            return bad(format!("truncation_ratio {} not in (0, 1)", self.truncation_ratio));
        }
        if !(0.0..1.0).contains(&self.score_delta_threshold) {
            return bad(format!("score_delta_threshold {} not in [0, 1)", self.score_delta_threshold));
        }
        if !(0.0..1.0).contains(&self.formatting_fraction) {
            return bad(format!("formatting_fraction {} not in [0, 1)", self.formatting_fraction));
        }
        if !(0.0..=1.0).contains(&self.min_confidence) {
            return bad(format!("min_confidence {} not in [0, 1]", self.min_confidence));
        }
        if !self.prompt_template.contains("{source}") {
            return Err(CurationError::MissingPlaceholder);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    PairLanguage,
    PairTruncation,
    PairScoreDelta,
    DroppedBothBad,
    DroppedBelowThreshold,
    DroppedIndeterminate,
}

/// Audit record: what happened to one article.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairVerdict {
    pub article_id: String,
    pub outcome: Outcome,
    pub detail: String,
}

/// Result of one classification stage.
#[derive(Debug, Clone, PartialEq)]
pub enum StageDecision<'a> {
    Pair {
        chosen: &'a CandidateTranslation,
        rejected: &'a CandidateTranslation,
        /// `(chosen, rejected)` quality scores, when the stage used them.
        scores: Option<(f64, f64)>,
        verdict: PairVerdict,
    },
    /// Stage found no signal; hand the article to the next stage.
    Pass,
    Drop(PairVerdict),
}

pub fn build_prompt(cfg: &CurationConfig, article: &Article) -> Result<String, CurationError> {
    if !cfg.prompt_template.contains("{source}") {
        return Err(CurationError::MissingPlaceholder);
    }
    Ok(cfg.prompt_template.replace("{source}", &article.source_text))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LangCheck {
    Target,
    Other,
    Indeterminate,
}

/// Language predicate shared by curation and evaluation. A target-language
/// verdict below `min_confidence` counts as `Other`.
pub fn language_check(
    judge: &dyn LanguageJudge,
    t: &CandidateTranslation,
    cfg: &CurationConfig,
) -> (LangCheck, String) {
    match judge.judge(t) {
        Ok(v) => {
            let detail = format!("{}: {} ({:.3})", t.model_id, v.label, v.confidence);
            if v.label == cfg.target_language && v.confidence >= cfg.min_confidence {
                (LangCheck::Target, detail)
            } else {
                (LangCheck::Other, detail)
            }
        }
        Err(e) => (LangCheck::Indeterminate, format!("{}: {e}", t.model_id)),
    }
}

/// Truncation predicate: strictly fewer characters than `ratio` of the source.
pub fn is_truncated(source: &Article, t: &CandidateTranslation, cfg: &CurationConfig) -> bool {
    let limit = cfg.truncation_ratio * source.source_char_count as f64;
    limit - (t.char_count as f64) > 1e-9
}

fn check_same_article(t1: &CandidateTranslation, t2: &CandidateTranslation) -> Result<(), CurationError> {
    if t1.article_id != t2.article_id {
        return Err(CurationError::MismatchedArticles(
            t1.article_id.clone(),
            t2.article_id.clone(),
        ));
    }
    if t1.model_id == t2.model_id {
        return Err(CurationError::SameModel(t1.article_id.clone()));
    }
    Ok(())
}

fn verdict(t: &CandidateTranslation, outcome: Outcome, detail: String) -> PairVerdict {
    PairVerdict {
        article_id: t.article_id.clone(),
        outcome,
        detail,
    }
}

pub fn classify_language_pair<'a>(
    t1: &'a CandidateTranslation,
    t2: &'a CandidateTranslation,
    judge: &dyn LanguageJudge,
    cfg: &CurationConfig,
) -> Result<StageDecision<'a>, CurationError> {
    check_same_article(t1, t2)?;
    let (c1, d1) = language_check(judge, t1, cfg);
    let (c2, d2) = language_check(judge, t2, cfg);
    let detail = format!("{d1}; {d2}");
    let pair = |chosen, rejected| StageDecision::Pair {
        chosen,
        rejected,
        scores: None,
        verdict: verdict(t1, Outcome::PairLanguage, detail.clone()),
    };
    Ok(match (c1, c2) {
        (LangCheck::Target, LangCheck::Target) => StageDecision::Pass,
        (LangCheck::Target, _) => pair(t1, t2),
        (_, LangCheck::Target) => pair(t2, t1),
        (LangCheck::Indeterminate, _) | (_, LangCheck::Indeterminate) => {
            StageDecision::Drop(verdict(t1, Outcome::DroppedIndeterminate, detail))
        }
        _ => StageDecision::Drop(verdict(t1, Outcome::DroppedBothBad, detail)),
    })
}

pub fn classify_truncation_pair<'a>(
    source: &Article,
    t1: &'a CandidateTranslation,
    t2: &'a CandidateTranslation,
    cfg: &CurationConfig,
) -> Result<StageDecision<'a>, CurationError> {
    check_same_article(t1, t2)?;
    let detail = format!(
        "source {} chars; {}: {}; {}: {}",
        source.source_char_count, t1.model_id, t1.char_count, t2.model_id, t2.char_count
    );
    let pair = |chosen, rejected| StageDecision::Pair {
        chosen,
        rejected,
        scores: None,
        verdict: verdict(t1, Outcome::PairTruncation, detail.clone()),
    };
    Ok(match (is_truncated(source, t1, cfg), is_truncated(source, t2, cfg)) {
        (false, false) => StageDecision::Pass,
        (true, false) => pair(t2, t1),
        (false, true) => pair(t1, t2),
        (true, true) => StageDecision::Drop(verdict(t1, Outcome::DroppedBothBad, detail)),
    })
}

pub fn classify_score_pair<'a>(
    t1: &'a CandidateTranslation,
    s1: Option<f64>,
    t2: &'a CandidateTranslation,
    s2: Option<f64>,
    cfg: &CurationConfig,
) -> Result<StageDecision<'a>, CurationError> {
    check_same_article(t1, t2)?;
    let missing = |t: &CandidateTranslation| CurationError::MissingScore {
        article_id: t.article_id.clone(),
        model_id: t.model_id.clone(),
    };
    let s1 = s1.ok_or_else(|| missing(t1))?;
    let s2 = s2.ok_or_else(|| missing(t2))?;
    let detail = format!("{}: {s1:.4}; {}: {s2:.4}", t1.model_id, t2.model_id);
    if !exceeds_threshold((s1 - s2).abs(), cfg.score_delta_threshold) {
        return Ok(StageDecision::Drop(verdict(t1, Outcome::DroppedBelowThreshold, detail)));
    }
    let (chosen, rejected, scores) = if s1 > s2 { (t1, t2, (s1, s2)) } else { (t2, t1, (s2, s1)) };
    Ok(StageDecision::Pair {
        chosen,
        rejected,
        scores: Some(scores),
        verdict: verdict(t1, Outcome::PairScoreDelta, detail),
    })
}
