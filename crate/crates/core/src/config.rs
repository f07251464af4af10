//! Whole-run configuration, loaded from one JSON file.

use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::curation::CurationConfig;
use crate::dpo::TrainConfig;
use crate::http::{HttpTransport, RetryPolicy};
use crate::jsonl::{self, JsonlError};
use crate::langid::LangIdConfig;
use crate::mt_client::BackendSpec;
use crate::rng::Rng;
use crate::scorer::{HttpScorer, HttpScorerConfig, ProxyScorer, QualityScorer, ScorerError, SubprocessScorer};

/// Where quality scores come from.
///
/// Parsed from `proxy`, `http:<base-url>` (or a bare `http://…` URL) and
/// `cmd:<command line>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScorerSpec {
    Proxy,
    Http(String),
    Command(String),
}

impl FromStr for ScorerSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "proxy" {
            Ok(Self::Proxy)
        } else if s.starts_with("http://") || s.starts_with("https://") {
            Ok(Self::Http(s.to_string()))
        } else if let Some(url) = s.strip_prefix("http:") {
            Ok(Self::Http(url.to_string()))
        } else if let Some(cmd) = s.strip_prefix("cmd:") {
            Ok(Self::Command(cmd.to_string()))
        } else {
            Err(format!("unknown scorer {s:?} (expected proxy, http:<url> or cmd:<command>)"))
        }
    }
}

impl std::fmt::Display for ScorerSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Proxy => f.write_str("proxy"),
            Self::Http(u) => write!(f, "http:{u}"),
            Self::Command(c) => write!(f, "cmd:{c}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScorerSettings {
    pub endpoint: String,
    pub timeout_s: u64,
    pub batch_size: usize,
    pub max_in_flight: usize,
    pub retry: RetryPolicy,
}

impl Default for ScorerSettings {
    fn default() -> Self {
        Self {
            endpoint: "proxy".into(),
            timeout_s: 60,
            batch_size: 32,
            max_in_flight: 4,
            retry: RetryPolicy::default(),
        }
    }
}

impl ScorerSettings {
    pub fn spec(&self) -> Result<ScorerSpec, String> {
        self.endpoint.parse()
    }

    pub fn build(&self, seed: u64, transport: Arc<dyn HttpTransport>) -> Result<Box<dyn QualityScorer>, ScorerError> {
        let spec = self.spec().map_err(ScorerError::Process)?;
        Ok(match spec {
            ScorerSpec::Proxy => Box::new(ProxyScorer),
            ScorerSpec::Http(base_url) => Box::new(HttpScorer::new(
                HttpScorerConfig {
                    base_url,
                    timeout_s: self.timeout_s,
                    batch_size: self.batch_size,
                    max_in_flight: self.max_in_flight,
                    retry: self.retry.clone(),
                    seed,
                },
                transport,
            )),
            ScorerSpec::Command(cmd) => Box::new(SubprocessScorer::from_command_line(&cmd, self.batch_size)?),
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathsConfig {
    pub articles: Option<PathBuf>,
    pub translations: Option<PathBuf>,
    pub lang_profile: Option<PathBuf>,
    pub lang_corpus: Option<PathBuf>,
    pub scores: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub langid: LangIdConfig,
    pub curation: CurationConfig,
    pub train: TrainConfig,
    pub backends: Vec<BackendSpec>,
    pub scorer: ScorerSettings,
    pub paths: PathsConfig,
}

impl PipelineConfig {
    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, JsonlError> {
        jsonl::read_json(path)
    }

    /// Seed for one module, derived from the run seed and a fixed tag.
    pub fn sub_seed(&self, tag: &str) -> u64 {
        sub_seed(self.seed, tag)
    }

    /// Copies the derived sub-seeds into the module configs.
    pub fn with_derived_seeds(mut self) -> Self {
        self.curation.seed = self.sub_seed("curation");
        self.train.seed = self.sub_seed("dpo");
        self
    }
}

pub fn sub_seed(seed: u64, tag: &str) -> u64 {
    Rng::derive(seed, tag).next_u64()
}
