//! Per-model error rates and score comparison with critical-mistake exclusion.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curation::{is_truncated, language_check, CurationConfig, CurationError, LangCheck, ScoreSource};
use crate::jsonl::{self, JsonlError, Record};
use crate::langid::LanguageJudge;
use crate::scorer::{external_score_batch, ScoreItem, ScoreTarget, ScorerError};
use crate::types::{Article, CandidateTranslation, Origin};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no articles to evaluate")]
    NoArticles,
    #[error("no translations supplied")]
    NoModels,
    #[error("missing translation for article {article_id} from model {model_id}")]
    MissingCell { article_id: String, model_id: String },
    #[error("duplicate translation for article {article_id} from model {model_id}")]
    DuplicateCell { article_id: String, model_id: String },
    #[error("translation refers to unknown article {0}")]
    UnknownArticle(String),
    #[error("no score for article {article_id} from model {model_id}")]
    MissingScore { article_id: String, model_id: String },
    #[error(transparent)]
    Config(#[from] CurationError),
    #[error(transparent)]
    Scorer(#[from] ScorerError),
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub article_id: String,
    pub model_id: String,
    pub origin: Origin,
    pub language_error: bool,
    pub truncation_error: bool,
    pub score: Option<f64>,
}

impl EvalRecord {
    pub fn critical(&self) -> bool {
        self.language_error || self.truncation_error
    }
}

impl Record for EvalRecord {
    fn record_id(&self) -> String {
        format!("{}/{}", self.article_id, self.model_id)
    }

    fn validate(&self) -> Result<(), String> {
        match self.score {
            Some(s) if !s.is_finite() => Err(format!("score {s} is not finite")),
            _ => Ok(()),
        }
    }

    fn unique_key(&self) -> Option<String> {
        Some(self.record_id())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelStats {
    pub language_errors: usize,
    pub truncation_errors: usize,
    /// Articles with a language or a truncation error (or both).
    pub combined_errors: usize,
    pub language_error_rate: f64,
    pub truncation_error_rate: f64,
    pub combined_rate: f64,
    /// Mean over articles no model got critically wrong; `None` when none remain.
    pub mean_score: Option<f64>,
    pub n_scored: usize,
    pub domain_means: BTreeMap<Origin, f64>,
    /// Unweighted mean of `domain_means`.
    pub average: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_articles: usize,
    pub per_model: BTreeMap<String, ModelStats>,
    /// Sorted ids of articles where at least one model made a critical mistake.
    pub excluded_articles: Vec<String>,
}

impl EvalReport {
    /// Model ids ordered by combined rate, ties by id.
    pub fn ranked(&self) -> Vec<(&String, &ModelStats)> {
        let mut rows: Vec<_> = self.per_model.iter().collect();
        rows.sort_by(|a, b| a.1.combined_rate.total_cmp(&b.1.combined_rate).then_with(|| a.0.cmp(b.0)));
        rows
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Markdown,
    Json,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "markdown" | "md" => Ok(Self::Markdown),
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            other => Err(format!("unknown report format {other:?} (expected markdown, json or csv)")),
        }
    }
}

/// Scores the kept cells and builds the per-translation records, in article
/// order then model order.
pub fn evaluate_records(
    articles: &[Article],
    translations: &[CandidateTranslation],
    judge: &dyn LanguageJudge,
    scores: Option<ScoreSource<'_>>,
    cfg: &CurationConfig,
) -> Result<Vec<EvalRecord>, EvalError> {
    cfg.validate()?;
    if articles.is_empty() {
        return Err(EvalError::NoArticles);
    }
    let by_id: HashMap<&str, &Article> = articles.iter().map(|a| (a.id.as_str(), a)).collect();
    let mut cells: HashMap<(&str, &str), &CandidateTranslation> = HashMap::new();
    let mut models = BTreeSet::new();
    for t in translations {
        if !by_id.contains_key(t.article_id.as_str()) {
            return Err(EvalError::UnknownArticle(t.article_id.clone()));
        }
        if cells.insert((&t.article_id, &t.model_id), t).is_some() {
            return Err(EvalError::DuplicateCell {
                article_id: t.article_id.clone(),
                model_id: t.model_id.clone(),
            });
        }
        models.insert(t.model_id.as_str());
    }
    if models.is_empty() {
        return Err(EvalError::NoModels);
    }
    let mut grid = Vec::with_capacity(articles.len());
    for a in articles {
        let mut row = Vec::with_capacity(models.len());
        for m in &models {
            let t = cells.get(&(a.id.as_str(), *m)).ok_or_else(|| EvalError::MissingCell {
                article_id: a.id.clone(),
                model_id: m.to_string(),
            })?;
            row.push(*t);
        }
        grid.push((a, row));
    }

    let mut records: Vec<EvalRecord> = grid
        .par_iter()
        .flat_map_iter(|(a, row)| {
            row.iter().map(|t| EvalRecord {
                article_id: a.id.clone(),
                model_id: t.model_id.clone(),
                origin: a.origin,
                language_error: language_check(judge, t, cfg).0 != LangCheck::Target,
                truncation_error: is_truncated(a, t, cfg),
                score: None,
            })
        })
        .collect();

    let excluded = excluded_set(&records);
    let kept: Vec<usize> = (0..records.len())
        .filter(|&i| !excluded.contains(records[i].article_id.as_str()))
        .collect();
    match scores {
        None => {}
        Some(ScoreSource::Precomputed(map)) => {
            for &i in &kept {
                let r = &mut records[i];
                let key = (r.article_id.clone(), r.model_id.clone());
                r.score = Some(*map.get(&key).ok_or_else(|| EvalError::MissingScore {
                    article_id: key.0.clone(),
                    model_id: key.1.clone(),
                })?);
            }
        }
        Some(ScoreSource::Scorer(scorer)) => {
            let targets: Vec<ScoreTarget> = kept
                .iter()
                .map(|&i| {
                    let r = &records[i];
                    let t = cells[&(r.article_id.as_str(), r.model_id.as_str())];
                    ScoreTarget {
                        article_id: r.article_id.clone(),
                        model_id: r.model_id.clone(),
                        item: ScoreItem {
                            source: by_id[r.article_id.as_str()].source_text.clone(),
                            translation: t.text.clone(),
                        },
                    }
                })
                .collect();
            let scored = external_score_batch(scorer, &targets)?;
            for (&i, q) in kept.iter().zip(scored) {
                records[i].score = Some(q.score);
            }
        }
    }
    Ok(records)
}

fn excluded_set(records: &[EvalRecord]) -> BTreeSet<&str> {
    records
        .iter()
        .filter(|r| r.critical())
        .map(|r| r.article_id.as_str())
        .collect()
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Aggregates per-translation records into the report.
pub fn aggregate(records: &[EvalRecord]) -> EvalReport {
    let excluded = excluded_set(records);
    let articles: BTreeSet<&str> = records.iter().map(|r| r.article_id.as_str()).collect();
    let n = articles.len();
    let mut grouped: BTreeMap<&str, Vec<&EvalRecord>> = BTreeMap::new();
    for r in records {
        grouped.entry(&r.model_id).or_default().push(r);
    }
    let per_model = grouped
        .into_iter()
        .map(|(model, rs)| {
            let count = |f: &dyn Fn(&EvalRecord) -> bool| rs.iter().filter(|r| f(r)).count();
            let language_errors = count(&|r| r.language_error);
            let truncation_errors = count(&|r| r.truncation_error);
            let combined_errors = count(&|r| r.critical());

            let mut all = Vec::new();
            let mut by_domain: BTreeMap<Origin, Vec<f64>> = BTreeMap::new();
            for r in &rs {
                if excluded.contains(r.article_id.as_str()) {
                    continue;
                }
                if let Some(s) = r.score {
                    all.push(s);
                    by_domain.entry(r.origin).or_default().push(s);
                }
            }
            let domain_means: BTreeMap<Origin, f64> = by_domain
                .into_iter()
                .map(|(d, xs)| (d, mean(&xs).expect("nonempty by construction")))
                .collect();
            let average = mean(&domain_means.values().copied().collect::<Vec<_>>());
            let rate = |k: usize| k as f64 / n as f64;
            let stats = ModelStats {
                language_errors,
                truncation_errors,
                combined_errors,
                language_error_rate: rate(language_errors),
                truncation_error_rate: rate(truncation_errors),
                combined_rate: rate(combined_errors),
                mean_score: mean(&all),
                n_scored: all.len(),
                domain_means,
                average,
            };
            (model.to_string(), stats)
        })
        .collect();
    EvalReport {
        n_articles: n,
        per_model,
        excluded_articles: excluded.into_iter().map(str::to_string).collect(),
    }
}

pub fn evaluate(
    articles: &[Article],
    translations: &[CandidateTranslation],
    judge: &dyn LanguageJudge,
    scores: Option<ScoreSource<'_>>,
    cfg: &CurationConfig,
) -> Result<EvalReport, EvalError> {
    Ok(aggregate(&evaluate_records(articles, translations, judge, scores, cfg)?))
}

fn pct(rate: f64) -> String {
    format!("{:.1}%", rate * 100.0)
}

fn score3(s: Option<f64>) -> String {
    s.map(|x| format!("{x:.3}")).unwrap_or_default()
}

fn domains(report: &EvalReport) -> Vec<Origin> {
    let set: BTreeSet<Origin> = report
        .per_model
        .values()
        .flat_map(|m| m.domain_means.keys().copied())
        .collect();
    set.into_iter().collect()
}

fn domain_name(d: Origin) -> &'static str {
    match d {
        Origin::Wiki => "wiki",
        Origin::News => "news",
        Origin::Other => "other",
    }
}

pub fn render_report(report: &EvalReport, format: ReportFormat) -> Result<String, JsonlError> {
    let doms = domains(report);
    let row_cells = |id: &str, m: &ModelStats| {
        let mut cells = vec![
            id.to_string(),
            pct(m.language_error_rate),
            pct(m.truncation_error_rate),
            pct(m.combined_rate),
        ];
        cells.extend(doms.iter().map(|d| score3(m.domain_means.get(d).copied())));
        cells.push(score3(m.average));
        cells.push(score3(m.mean_score));
        cells.push(m.n_scored.to_string());
        cells
    };
    let mut header = vec![
        "model".to_string(),
        "language_error".into(),
        "truncation_error".into(),
        "combined".into(),
    ];
    header.extend(doms.iter().map(|d| domain_name(*d).to_string()));
    header.extend(["average".into(), "mean_score".into(), "n_scored".into()]);

    Ok(match format {
        ReportFormat::Json => jsonl::to_canonical_string(report)? + "\n",
        ReportFormat::Csv => {
            let mut out = header.join(",") + "\n";
            for (id, m) in report.ranked() {
                out += &row_cells(&csv_field(id), m).join(",");
                out.push('\n');
            }
            out
        }
        ReportFormat::Markdown => {
            let mut out = format!("| {} |\n", header.join(" | "));
            out += &format!("|{}\n", "---|".repeat(header.len()));
            for (id, m) in report.ranked() {
                out += &format!("| {} |\n", row_cells(id, m).join(" | "));
            }
            out += &format!(
                "\nArticles: {}. Excluded from scoring: {}.\n",
                report.n_articles,
                report.excluded_articles.len()
            );
            out
        }
    })
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::langid::{LangIdError, LangVerdict};

    struct Prefix;

    impl LanguageJudge for Prefix {
        fn judge(&self, t: &CandidateTranslation) -> Result<LangVerdict, LangIdError> {
            let label = if t.text.starts_with("DE ") { "de" } else { "sl" };
            Ok(LangVerdict { label: label.into(), confidence: 0.99 })
        }
    }

    fn corpus(n: usize, bad: &[(usize, &str, &str)]) -> (Vec<Article>, Vec<CandidateTranslation>) {
        let src = "x".repeat(20);
        let articles: Vec<Article> = (0..n)
            .map(|i| Article::new(format!("a{i:04}"), src.clone(), if i % 2 == 0 { Origin::Wiki } else { Origin::News }))
            .collect();
        let mut ts = Vec::new();
        for (i, a) in articles.iter().enumerate() {
            for m in ["m1", "m2"] {
                let text = match bad.iter().find(|b| b.0 == i && b.1 == m).map(|b| b.2) {
                    Some("lang") => "DE ".to_string() + &"y".repeat(20),
                    Some("trunc") => "y".repeat(5),
                    Some("both") => "DE yy".to_string(),
                    _ => "y".repeat(20),
                };
                ts.push(CandidateTranslation::new(a.id.clone(), m, text));
            }
        }
        (articles, ts)
    }

    #[test]
    fn clean_corpus_has_zero_rates() {
        let (a, t) = corpus(10, &[]);
        let r = evaluate(&a, &t, &Prefix, None, &CurationConfig::default()).unwrap();
        assert_eq!(r.n_articles, 10);
        assert!(r.excluded_articles.is_empty());
        for m in r.per_model.values() {
            assert_eq!((m.language_error_rate, m.truncation_error_rate, m.combined_rate), (0.0, 0.0, 0.0));
            assert_eq!(m.n_scored, 0);
        }
    }

    #[test]
    fn union_rate_and_exclusions() {
        let (a, t) = corpus(10, &[(0, "m1", "lang"), (1, "m1", "trunc"), (2, "m1", "both"), (3, "m2", "trunc")]);
        let r = evaluate(&a, &t, &Prefix, Some(ScoreSource::Scorer(&crate::scorer::ProxyScorer)), &CurationConfig::default()).unwrap();
        let m1 = &r.per_model["m1"];
        assert_eq!((m1.language_errors, m1.truncation_errors, m1.combined_errors), (2, 2, 3));
        assert!((m1.combined_rate - 0.3).abs() < 1e-15);
        assert_eq!(r.excluded_articles, vec!["a0000", "a0001", "a0002", "a0003"]);
        assert_eq!(m1.n_scored, 6);
        assert_eq!(r.per_model["m2"].n_scored, 6);
    }

    #[test]
    fn all_excluded_leaves_mean_undefined() {
        let bad: Vec<_> = (0..4).map(|i| (i, "m2", "lang")).collect();
        let (a, t) = corpus(4, &bad);
        let scores: HashMap<(String, String), f64> = HashMap::new();
        let r = evaluate(&a, &t, &Prefix, Some(ScoreSource::Precomputed(&scores)), &CurationConfig::default()).unwrap();
        assert_eq!(r.per_model["m1"].mean_score, None);
        assert_eq!(r.per_model["m1"].n_scored, 0);
        assert_eq!(r.per_model["m1"].average, None);
    }

    #[test]
    fn missing_cell_is_named() {
        let (a, mut t) = corpus(3, &[]);
        t.retain(|x| !(x.article_id == "a0001" && x.model_id == "m2"));
        match evaluate(&a, &t, &Prefix, None, &CurationConfig::default()) {
            Err(EvalError::MissingCell { article_id, model_id }) => assert_eq!((article_id.as_str(), model_id.as_str()), ("a0001", "m2")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn domain_average_is_unweighted() {
        let (a, t) = corpus(3, &[]);
        let mut scores = HashMap::new();
        for x in &t {
            let s = match (x.article_id.as_str(), x.model_id.as_str()) {
                ("a0000", _) => 0.9,
                ("a0002", _) => 0.7,
                _ => 0.5,
            };
            scores.insert(x.key(), s);
        }
        let r = evaluate(&a, &t, &Prefix, Some(ScoreSource::Precomputed(&scores)), &CurationConfig::default()).unwrap();
        let m = &r.per_model["m1"];
        assert!((m.domain_means[&Origin::Wiki] - 0.8).abs() < 1e-12);
        assert_eq!(m.domain_means[&Origin::News], 0.5);
        assert!((m.average.unwrap() - 0.65).abs() < 1e-12);
        assert!((m.mean_score.unwrap() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn rates_ignore_article_order() {
        let (a, t) = corpus(20, &[(3, "m1", "lang"), (7, "m2", "trunc"), (11, "m1", "both")]);
        let r1 = evaluate(&a, &t, &Prefix, None, &CurationConfig::default()).unwrap();
        let mut a2 = a.clone();
        a2.reverse();
        let mut t2 = t.clone();
        t2.reverse();
        assert_eq!(r1, evaluate(&a2, &t2, &Prefix, None, &CurationConfig::default()).unwrap());
    }

    fn stats(rate: f64) -> ModelStats {
        ModelStats {
            language_errors: 0,
            truncation_errors: 0,
            combined_errors: 0,
            language_error_rate: rate,
            truncation_error_rate: 0.0,
            combined_rate: rate,
            mean_score: Some(0.7123),
            n_scored: 3,
            domain_means: BTreeMap::from([(Origin::Wiki, 0.7123)]),
            average: Some(0.7123),
        }
    }

    #[test]
    fn one_model_one_row() {
        let r = EvalReport { n_articles: 1000, per_model: BTreeMap::from([("gams".into(), stats(0.006))]), excluded_articles: vec![] };
        let csv = render_report(&r, ReportFormat::Csv).unwrap();
        assert_eq!(csv.lines().count(), 2);
        assert_eq!(csv.lines().nth(1).unwrap(), "gams,0.6%,0.0%,0.6%,0.712,0.712,0.712,3");
        let md = render_report(&r, ReportFormat::Markdown).unwrap();
        assert_eq!(md.lines().filter(|l| l.starts_with("| gams")).count(), 1);
    }

    #[test]
    fn ties_sort_by_model_id() {
        let r = EvalReport {
            n_articles: 10,
            per_model: BTreeMap::from([("zeta".into(), stats(0.1)), ("alpha".into(), stats(0.1)), ("best".into(), stats(0.0))]),
            excluded_articles: vec![],
        };
        let csv = render_report(&r, ReportFormat::Csv).unwrap();
        let ids: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
        assert_eq!(ids, ["best", "alpha", "zeta"]);
    }

    #[test]
    fn json_round_trip() {
        let r = EvalReport {
            n_articles: 3,
            per_model: BTreeMap::from([("m".into(), stats(1.0 / 3.0))]),
            excluded_articles: vec!["a".into()],
        };
        let text = render_report(&r, ReportFormat::Json).unwrap();
        let back: EvalReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
    }
}
