//! Character n-gram language identification.
//!
//! Multinomial Naive Bayes over hashed character n-grams. Each n-gram's UTF-8
//! bytes are hashed with FNV-1a and masked into `bucket_count` buckets; each
//! label keeps add-alpha smoothed log-likelihoods over those buckets. Only
//! buckets actually observed for a label are stored; every other bucket shares
//! the label's smoothed unseen value.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hash::fnv1a64;
use crate::jsonl::{self, JsonlError, Record};
use crate::types::CandidateTranslation;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LangIdError {
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("need at least 2 distinct labels, found {0}")]
    TooFewLabels(usize),
    #[error("invalid language-id config: {0}")]
    InvalidConfig(String),
    #[error("language is indeterminate: {0}")]
    Indeterminate(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LangIdConfig {
    pub min_n: usize,
    pub max_n: usize,
    pub bucket_count: u32,
    pub alpha: f64,
}

impl Default for LangIdConfig {
    fn default() -> Self {
        Self {
            min_n: 1,
            max_n: 3,
            bucket_count: 1 << 18,
            alpha: 1.0,
        }
    }
}

impl LangIdConfig {
    pub fn validate(&self) -> Result<(), LangIdError> {
        if !(1 <= self.min_n && self.min_n <= self.max_n && self.max_n <= 5) {
            return Err(LangIdError::InvalidConfig(format!(
                "ngram range ({}, {}) must satisfy 1 <= min <= max <= 5",
                self.min_n, self.max_n
            )));
        }
        if !self.bucket_count.is_power_of_two() {
            return Err(LangIdError::InvalidConfig(format!(
                "bucket_count {} is not a power of two",
                self.bucket_count
            )));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(LangIdError::InvalidConfig(format!(
                "smoothing alpha {} must be positive",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// One labelled training document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LangSample {
    pub text: String,
    pub label: String,
}

impl Record for LangSample {
    fn record_id(&self) -> String {
        self.label.clone()
    }
}

/// Smoothed log-likelihoods of one label over all buckets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketLogLikelihoods {
    pub seen: BTreeMap<u32, f64>,
    pub unseen: f64,
}

impl BucketLogLikelihoods {
    pub fn get(&self, bucket: u32) -> f64 {
        self.seen.get(&bucket).copied().unwrap_or(self.unseen)
    }
}

/// Trained classifier state. Labels are kept in lexicographic order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LangProfile {
    pub labels: Vec<String>,
    pub ngram_range: (usize, usize),
    pub bucket_count: u32,
    pub log_priors: Vec<f64>,
    pub log_likelihoods: Vec<BucketLogLikelihoods>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LangVerdict {
    pub label: String,
    pub confidence: f64,
}

fn ngram_buckets(text: &str, min_n: usize, max_n: usize, bucket_count: u32) -> Vec<u32> {
    let mask = u64::from(bucket_count - 1);
    let mut bounds: Vec<usize> = text.char_indices().map(|(i, _)| i).collect();
    bounds.push(text.len());
    let n_chars = bounds.len() - 1;
    let mut out = Vec::new();
    for n in min_n..=max_n {
        if n > n_chars {
            break;
        }
        for start in 0..=(n_chars - n) {
            let gram = &text.as_bytes()[bounds[start]..bounds[start + n]];
            out.push((fnv1a64(gram) & mask) as u32);
        }
    }
    out
}

pub fn train_langid(corpus: &[LangSample], config: &LangIdConfig) -> Result<LangProfile, LangIdError> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(LangIdError::EmptyCorpus);
    }
    let mut docs: BTreeMap<&str, usize> = BTreeMap::new();
    let mut counts: BTreeMap<&str, HashMap<u32, u64>> = BTreeMap::new();
    for sample in corpus {
        *docs.entry(&sample.label).or_default() += 1;
        let per_label = counts.entry(&sample.label).or_default();
        for b in ngram_buckets(&sample.text, config.min_n, config.max_n, config.bucket_count) {
            *per_label.entry(b).or_default() += 1;
        }
    }
    if docs.len() < 2 {
        return Err(LangIdError::TooFewLabels(docs.len()));
    }

    let n_docs = corpus.len() as f64;
    let buckets = f64::from(config.bucket_count);
    let labels: Vec<String> = docs.keys().map(|s| s.to_string()).collect();
    let log_priors = docs.values().map(|&d| (d as f64 / n_docs).ln()).collect();
    let log_likelihoods = labels
        .iter()
        .map(|label| {
            let c = &counts[label.as_str()];
            let total: u64 = c.values().sum();
            let denom = (total as f64 + config.alpha * buckets).ln();
            BucketLogLikelihoods {
                seen: c
                    .iter()
                    .map(|(&b, &n)| (b, (n as f64 + config.alpha).ln() - denom))
                    .collect(),
                unseen: config.alpha.ln() - denom,
            }
        })
        .collect();

    Ok(LangProfile {
        labels,
        ngram_range: (config.min_n, config.max_n),
        bucket_count: config.bucket_count,
        log_priors,
        log_likelihoods,
    })
}

impl LangProfile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, JsonlError> {
        jsonl::read_json(path)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), JsonlError> {
        jsonl::write_json(path, self)
    }

    /// Unnormalised log-posterior per label.
    pub fn log_scores(&self, text: &str) -> Vec<f64> {
        let buckets = ngram_buckets(text, self.ngram_range.0, self.ngram_range.1, self.bucket_count);
        self.log_priors
            .iter()
            .zip(&self.log_likelihoods)
            .map(|(prior, ll)| prior + buckets.iter().map(|&b| ll.get(b)).sum::<f64>())
            .collect()
    }

    /// Posterior probability per label, in label order.
    pub fn posteriors(&self, text: &str) -> Vec<f64> {
        let scores = self.log_scores(text);
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        exps.into_iter().map(|e| e / z).collect()
    }

    pub fn identify(&self, text: &str) -> Result<LangVerdict, LangIdError> {
        if text.trim().is_empty() {
            return Err(LangIdError::Indeterminate("text is empty".into()));
        }
        let scores = self.log_scores(text);
        // first maximum wins, so ties resolve to the lexicographically smallest label
        let mut best = 0;
        for (i, s) in scores.iter().enumerate() {
            if *s > scores[best] {
                best = i;
            }
        }
        let posteriors = self.posteriors(text);
        Ok(LangVerdict {
            label: self.labels[best].clone(),
            confidence: posteriors[best],
        })
    }

    /// Checks that priors and per-label likelihoods are normalised.
    pub fn check_normalization(&self) -> Result<(), String> {
        let prior_sum: f64 = self.log_priors.iter().map(|p| p.exp()).sum();
        if (prior_sum - 1.0).abs() > 1e-12 {
            return Err(format!("priors sum to {prior_sum}"));
        }
        for (label, ll) in self.labels.iter().zip(&self.log_likelihoods) {
            let unseen_buckets = f64::from(self.bucket_count) - ll.seen.len() as f64;
            let sum: f64 =
                ll.seen.values().map(|v| v.exp()).sum::<f64>() + unseen_buckets * ll.unseen.exp();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(format!("likelihoods of {label} sum to {sum}"));
            }
        }
        Ok(())
    }
}

/// Source of language verdicts for candidate translations.
pub trait LanguageJudge: Sync {
    fn judge(&self, translation: &CandidateTranslation) -> Result<LangVerdict, LangIdError>;
}

impl LanguageJudge for LangProfile {
    fn judge(&self, translation: &CandidateTranslation) -> Result<LangVerdict, LangIdError> {
        self.identify(&translation.text)
    }
}

/// Externally computed verdict, one JSONL line per translation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidecarVerdict {
    pub article_id: String,
    pub model_id: String,
    pub label: String,
    pub confidence: f64,
}

impl Record for SidecarVerdict {
    fn record_id(&self) -> String {
        format!("{}/{}", self.article_id, self.model_id)
    }

    fn validate(&self) -> Result<(), String> {
        if !(self.confidence > 0.0 && self.confidence <= 1.0) {
            return Err(format!("confidence {} outside (0, 1]", self.confidence));
        }
        Ok(())
    }

    fn unique_key(&self) -> Option<String> {
        Some(self.record_id())
    }
}

/// Precomputed verdicts replacing the built-in classifier.
#[derive(Debug, Clone, Default)]
pub struct VerdictSidecar {
    verdicts: HashMap<(String, String), LangVerdict>,
}

impl VerdictSidecar {
    pub fn from_records(records: impl IntoIterator<Item = SidecarVerdict>) -> Self {
        Self {
            verdicts: records
                .into_iter()
                .map(|r| {
                    (
                        (r.article_id, r.model_id),
                        LangVerdict {
                            label: r.label,
                            confidence: r.confidence,
                        },
                    )
                })
                .collect(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, JsonlError> {
        Ok(Self::from_records(jsonl::read_jsonl::<SidecarVerdict>(path)?))
    }
}

impl LanguageJudge for VerdictSidecar {
    fn judge(&self, t: &CandidateTranslation) -> Result<LangVerdict, LangIdError> {
        if t.text.trim().is_empty() {
            return Err(LangIdError::Indeterminate("text is empty".into()));
        }
        self.verdicts.get(&t.key()).cloned().ok_or_else(|| {
            LangIdError::Indeterminate(format!("no verdict for {}/{}", t.article_id, t.model_id))
        })
    }
}
