//! Preference-data curation and DPO fine-tuning for English to Slovene
//! machine translation, at a scale that runs on a laptop.
//!
//! The pipeline has four stages:
//!
//! 1. [`mt_client`] produces two candidate translations per article.
//! 2. [`curation`] turns the candidate pairs into chosen/rejected preference
//!    pairs using a language check ([`langid`]), a length check and a quality
//!    score ([`scorer`]), then mixes in synthetic formatting pairs.
//! 3. [`dpo`] fine-tunes a bigram toy policy on those pairs.
//! 4. [`eval`] reports per-model error rates and quality scores.
//!
//! Every random choice draws from a [`rng::Rng`] seeded from one run seed.

pub mod config;
pub mod curation;
pub mod dpo;
pub mod eval;
pub mod hash;
pub mod http;
pub mod jsonl;
pub mod langid;
pub mod mt_client;
pub mod rng;
pub mod scorer;
pub mod types;

pub use config::PipelineConfig;
pub use jsonl::{JsonlError, Record};
pub use rng::Rng;
pub use types::{Article, CandidateTranslation, Category, Origin, PreferencePair, QualityScore};

use thiserror::Error;

/// Any failure the pipeline can report, for callers that do not care which
/// stage it came from.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Io(#[from] JsonlError),
    #[error(transparent)]
    LangId(#[from] langid::LangIdError),
    #[error(transparent)]
    Scorer(#[from] scorer::ScorerError),
    #[error(transparent)]
    Curation(#[from] curation::CurationError),
    #[error(transparent)]
    Dpo(#[from] dpo::DpoError),
    #[error(transparent)]
    Mt(#[from] mt_client::MtError),
    #[error(transparent)]
    Eval(#[from] eval::EvalError),
    #[error("{0}")]
    Other(String),
}

impl Error {
    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io(_) => "io",
            Error::LangId(_) => "langid",
            Error::Scorer(_) => "scorer",
            Error::Curation(_) => "curation",
            Error::Dpo(_) => "dpo",
            Error::Mt(_) => "translate",
            Error::Eval(_) => "evaluate",
            Error::Other(_) => "other",
        }
    }
}
