//! Dual-translation generation against chat-completion endpoints.
//!
//! Each article is sent once to each backend. Completed records are appended
//! to the output JSONL as they arrive; records already present are skipped, so
//! an interrupted run can simply be restarted.

use std::collections::HashSet;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{mpsc, Arc};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::http::{self, classify_status, Failure, HttpTransport, RetryError, RetryPolicy, StatusClass};
use crate::jsonl::{self, JsonlError};
use crate::rng::Rng;
use crate::types::{Article, CandidateTranslation};

#[derive(Debug, Error)]
pub enum MtError {
    #[error("invalid backend {model_id}: {message}")]
    InvalidBackend { model_id: String, message: String },
    #[error("environment variable {0} holding the API key is not set")]
    MissingApiKey(String),
    #[error("no articles to translate")]
    NoArticles,
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendSpec {
    pub model_id: String,
    pub base_url: String,
    /// Name of the environment variable holding the bearer token. Empty
    /// means the endpoint needs no authentication.
    pub api_key_env: String,
    pub prompt_instruction: String,
    pub max_in_flight: usize,
    pub timeout_s: u64,
    pub max_retries: u32,
    pub temperature: f64,
    pub max_tokens: Option<u32>,
    pub base_delay_ms: u64,
}

impl Default for BackendSpec {
    fn default() -> Self {
        Self {
            model_id: String::new(),
            base_url: "http://127.0.0.1:8000/v1".into(),
            api_key_env: String::new(),
            prompt_instruction: "Translate the following English text to Slovenian.".into(),
            max_in_flight: 4,
            timeout_s: 120,
            max_retries: 3,
            temperature: 0.0,
            max_tokens: None,
            base_delay_ms: 500,
        }
    }
}

impl BackendSpec {
    pub fn validate(&self) -> Result<(), MtError> {
        let bad = |m: &str| {
            Err(MtError::InvalidBackend {
                model_id: self.model_id.clone(),
                message: m.into(),
            })
        };
        if self.model_id.is_empty() {
            return bad("model_id is empty");
        }
        if self.max_in_flight == 0 {
            return bad("max_in_flight must be at least 1");
        }
        Ok(())
    }

    /// User message: instruction, blank line, source text.
    pub fn user_message(&self, article: &Article) -> String {
        format!("{}\n\n{}", self.prompt_instruction, article.source_text)
    }

    fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy {
            max_retries: self.max_retries,
            base_delay_ms: self.base_delay_ms,
            ..RetryPolicy::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
}

#[derive(Debug, Clone, Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Debug, Clone, Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureEntry {
    pub article_id: String,
    pub model_id: String,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub requested: usize,
    pub written: usize,
    pub skipped_existing: usize,
    pub retries: u64,
    pub failures: Vec<FailureEntry>,
}

enum Completion {
    Done(CandidateTranslation, u32),
    Failed(FailureEntry, u32),
}

fn request_one(
    backend: &BackendSpec,
    api_key: Option<&str>,
    article: &Article,
    transport: &dyn HttpTransport,
    seed: u64,
) -> Completion {
    let url = format!("{}/chat/completions", backend.base_url.trim_end_matches('/'));
    let body = serde_json::to_string(&ChatRequest {
        model: backend.model_id.clone(),
        messages: vec![ChatMessage {
            role: "user".into(),
            content: backend.user_message(article),
        }],
        temperature: backend.temperature,
        max_tokens: backend.max_tokens,
    })
    .expect("chat request serializes");
    let timeout = Duration::from_secs(backend.timeout_s);
    let mut rng = Rng::derive(seed, &format!("mt/{}/{}", backend.model_id, article.id));
    let fail = |error: String| FailureEntry {
        article_id: article.id.clone(),
        model_id: backend.model_id.clone(),
        error,
    };

    let result = http::with_retries(&backend.retry_policy(), &mut rng, || {
        let resp = transport
            .post_json(&url, api_key, &body, timeout)
            .map_err(|e| Failure::Transient(e.to_string()))?;
        match classify_status(resp.status) {
            StatusClass::Success => {}
            StatusClass::Retryable => return Err(Failure::Transient(format!("HTTP {}", resp.status))),
            StatusClass::Auth => return Err(Failure::Permanent(format!("authentication failed (HTTP {})", resp.status))),
            StatusClass::Fatal => return Err(Failure::Permanent(format!("HTTP {}: {}", resp.status, resp.body))),
        }
        let parsed: ChatResponse = serde_json::from_str(&resp.body)
            .map_err(|e| Failure::Permanent(format!("malformed response: {e}")))?;
        let text = parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .unwrap_or_default();
        if text.trim().is_empty() {
            return Err(Failure::Permanent("empty response".into()));
        }
        Ok(text)
    });
    match result {
        Ok((text, retries)) => Completion::Done(
            CandidateTranslation::new(article.id.clone(), backend.model_id.clone(), text),
            retries,
        ),
        Err(RetryError::Permanent(msg)) => Completion::Failed(fail(msg), 0),
        Err(RetryError::Exhausted { attempts, last }) => Completion::Failed(
            fail(format!("gave up after {attempts} attempts: {last}")),
            attempts - 1,
        ),
    }
}

/// Translates every article with every backend, appending to `out`.
///
/// `env` resolves API-key variable names; pass `|k| std::env::var(k).ok()`
/// in production. Output order is completion order.
pub fn translate_corpus(
    articles: &[Article],
    backends: &[BackendSpec],
    out: &Path,
    transport: Arc<dyn HttpTransport>,
    env: &dyn Fn(&str) -> Option<String>,
    seed: u64,
) -> Result<RunReport, MtError> {
    if articles.is_empty() {
        return Err(MtError::NoArticles);
    }
    let mut keys = Vec::with_capacity(backends.len());
    for b in backends {
        b.validate()?;
        if b.api_key_env.is_empty() {
            keys.push(None);
        } else {
            keys.push(Some(env(&b.api_key_env).ok_or_else(|| MtError::MissingApiKey(b.api_key_env.clone()))?));
        }
    }

    let existing: HashSet<(String, String)> = if out.exists() {
        jsonl::read_jsonl::<CandidateTranslation>(out)?
            .into_iter()
            .map(|t| t.key())
            .collect()
    } else {
        HashSet::new()
    };

    let mut report = RunReport::default();
    let mut jobs: Vec<Vec<&Article>> = vec![Vec::new(); backends.len()];
    for (bi, b) in backends.iter().enumerate() {
        for a in articles {
            if existing.contains(&(a.id.clone(), b.model_id.clone())) {
                report.skipped_existing += 1;
            } else {
                jobs[bi].push(a);
                report.requested += 1;
            }
        }
    }

    let io_err = |source| {
        MtError::Jsonl(JsonlError::Io {
            path: out.display().to_string(),
            source,
        })
    };
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(out)
        .map_err(io_err)?;

    let (tx, rx) = mpsc::channel::<Completion>();
    let transport = transport.as_ref();
    std::thread::scope(|s| -> Result<(), MtError> {
        for (bi, backend) in backends.iter().enumerate() {
            let queue = &jobs[bi];
            let next = Arc::new(AtomicUsize::new(0));
            let key = keys[bi].as_deref();
            for _ in 0..backend.max_in_flight.min(queue.len()) {
                let tx = tx.clone();
                let next = Arc::clone(&next);
                s.spawn(move || loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(article) = queue.get(i) else { break };
                    if tx.send(request_one(backend, key, article, transport, seed)).is_err() {
                        break;
                    }
                });
            }
        }
        drop(tx);
        for completion in rx {
            match completion {
                Completion::Done(record, retries) => {
                    let line = jsonl::to_canonical_string(&record)? + "\n";
                    file.write_all(line.as_bytes()).map_err(io_err)?;
                    report.written += 1;
                    report.retries += u64::from(retries);
                }
                Completion::Failed(entry, retries) => {
                    report.failures.push(entry);
                    report.retries += u64::from(retries);
                }
            }
        }
        file.flush().map_err(io_err)
    })?;
    report
        .failures
        .sort_by(|a, b| (&a.article_id, &a.model_id).cmp(&(&b.article_id, &b.model_id)));
    Ok(report)
}
