//! Domain records shared by every stage of the pipeline.

use serde::{Deserialize, Serialize};

use crate::jsonl::Record;

/// Number of Unicode scalar values in `s`. "čebela" has 6.
pub fn char_count(s: &str) -> usize {
    s.chars().count()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Wiki,
    News,
    Other,
}

/// An English source document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Article {
    pub id: String,
    pub source_text: String,
    pub source_char_count: usize,
    pub origin: Origin,
}

impl Article {
    pub fn new(id: impl Into<String>, source_text: impl Into<String>, origin: Origin) -> Self {
        let source_text = source_text.into();
        Self {
            id: id.into(),
            source_char_count: char_count(&source_text),
            source_text,
            origin,
        }
    }
}

impl Record for Article {
    fn record_id(&self) -> String {
        self.id.clone()
    }

    fn validate(&self) -> Result<(), String> {
        if self.id.is_empty() {
            return Err("article id is empty".into());
        }
        let actual = char_count(&self.source_text);
        if actual != self.source_char_count {
            return Err(format!(
                "source_char_count is {} but source_text has {actual} characters",
                self.source_char_count
            ));
        }
        Ok(())
    }

    fn unique_key(&self) -> Option<String> {
        Some(self.id.clone())
    }
}

/// One model's translation of one article.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateTranslation {
    pub article_id: String,
    pub model_id: String,
    pub text: String,
    pub char_count: usize,
}

impl CandidateTranslation {
    pub fn new(
        article_id: impl Into<String>,
        model_id: impl Into<String>,
        text: impl Into<String>,
    ) -> Self {
        let text = text.into();
        Self {
            article_id: article_id.into(),
            model_id: model_id.into(),
            char_count: char_count(&text),
            text,
        }
    }

    pub fn key(&self) -> (String, String) {
        (self.article_id.clone(), self.model_id.clone())
    }
}

impl Record for CandidateTranslation {
    fn record_id(&self) -> String {
        format!("{}/{}", self.article_id, self.model_id)
    }

    fn validate(&self) -> Result<(), String> {
        let actual = char_count(&self.text);
        if actual != self.char_count {
            return Err(format!(
                "char_count is {} but text has {actual} characters",
                self.char_count
            ));
        }
        Ok(())
    }

    fn unique_key(&self) -> Option<String> {
        Some(self.record_id())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Language,
    Truncation,
    Formatting,
    ScoreDelta,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::Language,
        Category::Truncation,
        Category::Formatting,
        Category::ScoreDelta,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Language => "language",
            Category::Truncation => "truncation",
            Category::Formatting => "formatting",
            Category::ScoreDelta => "score_delta",
        }
    }
}

/// A `(prompt, chosen, rejected)` training triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferencePair {
    pub id: String,
    pub prompt: String,
    pub chosen: String,
    pub rejected: String,
    pub category: Category,
    #[serde(default)]
    pub score_chosen: Option<f64>,
    #[serde(default)]
    pub score_rejected: Option<f64>,
}

impl PreferencePair {
    /// Checks the score-delta margin against a concrete threshold.
    pub fn validate_margin(&self, threshold: f64) -> Result<(), String> {
        if self.category != Category::ScoreDelta {
            return Ok(());
        }
        match (self.score_chosen, self.score_rejected) {
            (Some(c), Some(r)) if crate::curation::exceeds_threshold(c - r, threshold) => Ok(()),
            (Some(c), Some(r)) => Err(format!(
                "score_delta pair margin {} does not exceed {threshold}",
                c - r
            )),
            _ => Err("score_delta pair is missing a score".into()),
        }
    }
}

impl Record for PreferencePair {
    fn record_id(&self) -> String {
        self.id.clone()
    }

    fn validate(&self) -> Result<(), String> {
        if self.chosen == self.rejected {
            return Err("chosen and rejected are identical".into());
        }
        for s in [self.score_chosen, self.score_rejected].into_iter().flatten() {
            if !(0.0..=1.0).contains(&s) {
                return Err(format!("score {s} outside [0, 1]"));
            }
        }
        self.validate_margin(0.0)
    }

    fn unique_key(&self) -> Option<String> {
        Some(self.id.clone())
    }
}

/// Quality estimate for one translation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityScore {
    pub article_id: String,
    pub model_id: String,
    pub score: f64,
}

impl Record for QualityScore {
    fn record_id(&self) -> String {
        format!("{}/{}", self.article_id, self.model_id)
    }

    fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.score) {
            return Err(format!("score {} outside [0, 1]", self.score));
        }
        Ok(())
    }

    fn unique_key(&self) -> Option<String> {
        Some(self.record_id())
    }
}
