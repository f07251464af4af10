//! Translation quality scoring.
//!
//! [`proxy_score`] is a deterministic stand-in used for tests and offline
//! runs. Production scoring goes through [`HttpScorer`] or
//! [`SubprocessScorer`], which speak the same JSON protocol:
//! request `{"items": [{"source", "translation"}]}`, response
//! `{"scores": [f64]}`.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicU32, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::http::{self, classify_status, Failure, HttpTransport, RetryError, RetryPolicy, StatusClass};
use crate::rng::Rng;
use crate::types::{char_count, QualityScore};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScorerError {
    #[error("source text is empty")]
    EmptySource,
    #[error("scorer unreachable after {attempts} attempts: {last}")]
    Unreachable { attempts: u32, last: String },
    #[error("scorer protocol error at item {item}: {message}")]
    Protocol { item: usize, message: String },
    #[error("scorer rejected request: {0}")]
    Rejected(String),
    #[error("scorer process failed: {0}")]
    Process(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreItem {
    pub source: String,
    pub translation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub items: Vec<ScoreItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub scores: Vec<f64>,
}

/// Reference-free proxy for translation quality.
///
/// Harmonic mean of the length-ratio fitness `min(Lt/Ls, Ls/Lt)` and a
/// repetition penalty `1 - f`, where `f` is the fraction of the
/// translation's character 3-gram occurrences whose 3-gram appears more than
/// once.
pub fn proxy_score(source: &str, translation: &str) -> Result<f64, ScorerError> {
    let ls = char_count(source);
    if ls == 0 {
        return Err(ScorerError::EmptySource);
    }
    let lt = char_count(translation);
    if lt == 0 {
        return Ok(0.0);
    }
    let ratio = (lt as f64 / ls as f64).min(ls as f64 / lt as f64);
    let coverage = 1.0 - repetition_fraction(translation);
    if ratio + coverage == 0.0 {
        return Ok(0.0);
    }
    Ok((2.0 * ratio * coverage / (ratio + coverage)).clamp(0.0, 1.0))
}

fn repetition_fraction(text: &str) -> f64 {
    let chars: Vec<char> = text.chars().collect();
    if chars.len() < 3 {
        return 0.0;
    }
    let mut counts: HashMap<&[char], usize> = HashMap::new();
    for w in chars.windows(3) {
        *counts.entry(w).or_default() += 1;
    }
    let total = chars.len() - 2;
    let repeated: usize = counts.values().filter(|&&c| c > 1).sum();
    repeated as f64 / total as f64
}

/// Anything that can score `(source, translation)` items in order.
pub trait QualityScorer: Sync {
    fn score(&self, items: &[ScoreItem]) -> Result<Vec<f64>, ScorerError>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ProxyScorer;

impl QualityScorer for ProxyScorer {
    fn score(&self, items: &[ScoreItem]) -> Result<Vec<f64>, ScorerError> {
        items
            .iter()
            .map(|it| proxy_score(&it.source, &it.translation))
            .collect()
    }
}

/// A translation to score, with the ids its score is reported under.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTarget {
    pub article_id: String,
    pub model_id: String,
    pub item: ScoreItem,
}

/// Scores `targets` in order and attaches their ids.
pub fn external_score_batch(
    scorer: &dyn QualityScorer,
    targets: &[ScoreTarget],
) -> Result<Vec<QualityScore>, ScorerError> {
    let items: Vec<ScoreItem> = targets.iter().map(|t| t.item.clone()).collect();
    let scores = scorer.score(&items)?;
    Ok(targets
        .iter()
        .zip(scores)
        .map(|(t, score)| QualityScore {
            article_id: t.article_id.clone(),
            model_id: t.model_id.clone(),
            score,
        })
        .collect())
}

fn check_response(resp: &ScoreResponse, offset: usize, expected: usize) -> Result<(), ScorerError> {
    if resp.scores.len() != expected {
        return Err(ScorerError::Protocol {
            item: offset,
            message: format!("expected {expected} scores, got {}", resp.scores.len()),
        });
    }
    for (i, s) in resp.scores.iter().enumerate() {
        if !(0.0..=1.0).contains(s) {
            return Err(ScorerError::Protocol {
                item: offset + i,
                message: format!("score {s} outside [0, 1]"),
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpScorerConfig {
    pub base_url: String,
    pub timeout_s: u64,
    pub batch_size: usize,
    pub max_in_flight: usize,
    pub retry: RetryPolicy,
    pub seed: u64,
}

impl Default for HttpScorerConfig {
    fn default() -> Self {
        Self {
            base_url: "http://127.0.0.1:8080".into(),
            timeout_s: 60,
            batch_size: 32,
            max_in_flight: 4,
            retry: RetryPolicy::default(),
            seed: 0,
        }
    }
}

/// Scorer speaking `POST {base_url}/score`.
pub struct HttpScorer {
    config: HttpScorerConfig,
    transport: Arc<dyn HttpTransport>,
    retries: AtomicU32,
}

impl HttpScorer {
    pub fn new(config: HttpScorerConfig, transport: Arc<dyn HttpTransport>) -> Self {
        Self {
            config,
            transport,
            retries: AtomicU32::new(0),
        }
    }

    /// Total retries spent across all calls so far.
    pub fn retries(&self) -> u32 {
        self.retries.load(Ordering::Relaxed)
    }

    fn score_chunk(&self, chunk_idx: usize, offset: usize, items: &[ScoreItem]) -> Result<Vec<f64>, ScorerError> {
        let url = format!("{}/score", self.config.base_url.trim_end_matches('/'));
        let body = serde_json::to_string(&ScoreRequest { items: items.to_vec() })
            .expect("score request serializes");
        let timeout = Duration::from_secs(self.config.timeout_s);
        let mut rng = Rng::derive(self.config.seed, &format!("score-batch-{chunk_idx}"));
        let result = http::with_retries(&self.config.retry, &mut rng, || {
            let resp = self
                .transport
                .post_json(&url, None, &body, timeout)
                .map_err(|e| Failure::Transient(e.to_string()))?;
            match classify_status(resp.status) {
                StatusClass::Success => {}
                StatusClass::Retryable => {
                    return Err(Failure::Transient(format!("HTTP {}", resp.status)))
                }
                StatusClass::Auth | StatusClass::Fatal => {
                    return Err(Failure::Permanent(ScorerError::Rejected(format!(
                        "HTTP {}: {}",
                        resp.status, resp.body
                    ))))
                }
            }
            let parsed: ScoreResponse = serde_json::from_str(&resp.body).map_err(|e| {
                Failure::Permanent(ScorerError::Protocol {
                    item: offset,
                    message: format!("malformed response: {e}"),
                })
            })?;
            check_response(&parsed, offset, items.len()).map_err(Failure::Permanent)?;
            Ok(parsed.scores)
        });
        match result {
            Ok((scores, retries)) => {
                self.retries.fetch_add(retries, Ordering::Relaxed);
                Ok(scores)
            }
            Err(RetryError::Permanent(e)) => Err(e),
            Err(RetryError::Exhausted { attempts, last }) => {
                self.retries.fetch_add(attempts - 1, Ordering::Relaxed);
                Err(ScorerError::Unreachable { attempts, last })
            }
        }
    }
}

impl QualityScorer for HttpScorer {
    /// Batches are issued concurrently (at most `max_in_flight`) but results
    /// are reassembled in input order.
    fn score(&self, items: &[ScoreItem]) -> Result<Vec<f64>, ScorerError> {
        let batch = self.config.batch_size.max(1);
        let chunks: Vec<&[ScoreItem]> = items.chunks(batch).collect();
        let slots: Vec<Mutex<Option<Result<Vec<f64>, ScorerError>>>> =
            chunks.iter().map(|_| Mutex::new(None)).collect();
        let next = AtomicUsize::new(0);
        let workers = self.config.max_in_flight.max(1).min(chunks.len().max(1));
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let idx = next.fetch_add(1, Ordering::SeqCst);
                    if idx >= chunks.len() {
                        break;
                    }
                    let res = self.score_chunk(idx, idx * batch, chunks[idx]);
                    *slots[idx].lock().expect("slot lock") = Some(res);
                });
            }
        });
        let mut out = Vec::with_capacity(items.len());
        for slot in slots {
            let res = slot.into_inner().expect("slot lock").expect("every chunk scored");
            out.extend(res?);
        }
        Ok(out)
    }
}

/// Scorer running a child process: one request object per stdin line, one
/// response object per stdout line, strictly 1:1.
pub struct SubprocessScorer {
    pub program: String,
    pub args: Vec<String>,
    pub batch_size: usize,
}

impl SubprocessScorer {
    /// Splits a command line on whitespace.
    pub fn from_command_line(cmd: &str, batch_size: usize) -> Result<Self, ScorerError> {
        let mut parts = cmd.split_whitespace().map(str::to_string);
        let program = parts
            .next()
            .ok_or_else(|| ScorerError::Process("empty scorer command".into()))?;
        Ok(Self {
            program,
            args: parts.collect(),
            batch_size,
        })
    }
}

impl QualityScorer for SubprocessScorer {
    fn score(&self, items: &[ScoreItem]) -> Result<Vec<f64>, ScorerError> {
        if items.is_empty() {
            return Ok(Vec::new());
        }
        let proc_err = |e: std::io::Error| ScorerError::Process(e.to_string());
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(proc_err)?;
        let mut stdin = child.stdin.take().expect("piped stdin");
        let mut stdout = BufReader::new(child.stdout.take().expect("piped stdout"));

        let batch = self.batch_size.max(1);
        let mut out = Vec::with_capacity(items.len());
        for (i, chunk) in items.chunks(batch).enumerate() {
            let offset = i * batch;
            let mut line = serde_json::to_string(&ScoreRequest { items: chunk.to_vec() })
                .expect("score request serializes");
            line.push('\n');
            stdin.write_all(line.as_bytes()).map_err(proc_err)?;
            stdin.flush().map_err(proc_err)?;
            let mut reply = String::new();
            if stdout.read_line(&mut reply).map_err(proc_err)? == 0 {
                return Err(ScorerError::Protocol {
                    item: offset,
                    message: "scorer closed stdout".into(),
                });
            }
            let resp: ScoreResponse = serde_json::from_str(&reply).map_err(|e| ScorerError::Protocol {
                item: offset,
                message: format!("malformed response: {e}"),
            })?;
            check_response(&resp, offset, chunk.len())?;
            out.extend(resp.scores);
        }
        drop(stdin);
        let status = child.wait().map_err(proc_err)?;
        if !status.success() {
            return Err(ScorerError::Process(format!("scorer exited with {status}")));
        }
        Ok(out)
    }
}
