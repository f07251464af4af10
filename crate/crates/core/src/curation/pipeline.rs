use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;

use super::{
    assemble_dataset, build_prompt, classify_language_pair, classify_score_pair,
    classify_truncation_pair, Assembled, CurationConfig, CurationError, Outcome, PairVerdict,
    StageDecision,
};
use crate::langid::LanguageJudge;
use crate::rng::Rng;
use crate::scorer::{external_score_batch, QualityScorer, ScoreItem, ScoreTarget};
use crate::types::{Article, CandidateTranslation, Category, PreferencePair};

/// A translation that passed every check; source material for formatting pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct CleanTranslation {
    pub article_id: String,
    pub prompt: String,
    pub text: String,
}

pub enum ScoreSource<'a> {
    /// Scores keyed by `(article_id, model_id)`.
    Precomputed(&'a HashMap<(String, String), f64>),
    Scorer(&'a dyn QualityScorer),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curated {
    /// Language, truncation and score-delta pairs.
    pub pairs: BTreeMap<Category, Vec<PreferencePair>>,
    pub clean_pool: Vec<CleanTranslation>,
    /// One verdict per input article, sorted by article id.
    pub verdicts: Vec<PairVerdict>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurationRun {
    pub assembled: Assembled,
    pub verdicts: Vec<PairVerdict>,
}

enum Early<'a> {
    Decided(Option<PreferencePair>, PairVerdict),
    NeedsScore {
        article: &'a Article,
        t1: &'a CandidateTranslation,
        t2: &'a CandidateTranslation,
    },
}

fn to_pair(
    article: &Article,
    category: Category,
    chosen: &CandidateTranslation,
    rejected: &CandidateTranslation,
    scores: Option<(f64, f64)>,
    cfg: &CurationConfig,
) -> Result<PreferencePair, CurationError> {
    Ok(PreferencePair {
        id: format!("{}:{}", article.id, category.as_str()),
        prompt: build_prompt(cfg, article)?,
        chosen: chosen.text.clone(),
        rejected: rejected.text.clone(),
        category,
        score_chosen: scores.map(|s| s.0),
        score_rejected: scores.map(|s| s.1),
    })
}

/// Turns a stage decision into an emitted pair, refusing degenerate pairs
/// whose two sides are textually identical.
fn settle(
    article: &Article,
    category: Category,
    decision: StageDecision<'_>,
    cfg: &CurationConfig,
) -> Result<Option<(Option<PreferencePair>, PairVerdict)>, CurationError> {
    match decision {
        StageDecision::Pass => Ok(None),
        StageDecision::Drop(v) => Ok(Some((None, v))),
        StageDecision::Pair { chosen, rejected, scores, mut verdict } => {
            if chosen.text == rejected.text {
                verdict.outcome = match category {
                    Category::ScoreDelta => Outcome::DroppedBelowThreshold,
                    _ => Outcome::DroppedIndeterminate,
                };
                verdict.detail.push_str("; identical texts");
                return Ok(Some((None, verdict)));
            }
            let pair = to_pair(article, category, chosen, rejected, scores, cfg)?;
            Ok(Some((Some(pair), verdict)))
        }
    }
}

fn early_stages<'a>(
    article: &'a Article,
    t1: &'a CandidateTranslation,
    t2: &'a CandidateTranslation,
    judge: &dyn LanguageJudge,
    cfg: &CurationConfig,
) -> Result<Early<'a>, CurationError> {
    let lang = classify_language_pair(t1, t2, judge, cfg)?;
    if let Some((pair, v)) = settle(article, Category::Language, lang, cfg)? {
        return Ok(Early::Decided(pair, v));
    }
    let trunc = classify_truncation_pair(article, t1, t2, cfg)?;
    if let Some((pair, v)) = settle(article, Category::Truncation, trunc, cfg)? {
        return Ok(Early::Decided(pair, v));
    }
    Ok(Early::NeedsScore { article, t1, t2 })
}

fn group_translations<'a>(
    articles: &'a [Article],
    translations: &'a [CandidateTranslation],
) -> Result<Vec<(&'a Article, &'a CandidateTranslation, &'a CandidateTranslation)>, CurationError> {
    let mut by_article: HashMap<&str, Vec<&CandidateTranslation>> = HashMap::new();
    for t in translations {
        by_article.entry(t.article_id.as_str()).or_default().push(t);
    }
    let mut sorted: Vec<&Article> = articles.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let mut out = Vec::with_capacity(sorted.len());
    for article in sorted {
        let mut ts = by_article.remove(article.id.as_str()).unwrap_or_default();
        if ts.len() != 2 {
            return Err(CurationError::TranslationCount {
                article_id: article.id.clone(),
                found: ts.len(),
            });
        }
        ts.sort_by(|a, b| a.model_id.cmp(&b.model_id));
        out.push((article, ts[0], ts[1]));
    }
    if let Some(orphan) = by_article.keys().min() {
        return Err(CurationError::UnknownArticle(orphan.to_string()));
    }
    Ok(out)
}

/// Runs the three classification stages over every article.
///
/// Each article must have exactly two translations from distinct models.
/// Only articles that survive the language and truncation stages are scored.
pub fn curate(
    articles: &[Article],
    translations: &[CandidateTranslation],
    judge: &dyn LanguageJudge,
    scores: ScoreSource<'_>,
    cfg: &CurationConfig,
) -> Result<Curated, CurationError> {
    cfg.validate()?;
    let grouped = group_translations(articles, translations)?;
    let early: Vec<Early> = grouped
        .par_iter()
        .map(|&(a, t1, t2)| early_stages(a, t1, t2, judge, cfg))
        .collect::<Result<_, _>>()?;

    let targets: Vec<ScoreTarget> = early
        .iter()
        .filter_map(|e| match e {
            Early::NeedsScore { article, t1, t2 } => Some([*t1, *t2].map(|t| ScoreTarget {
                article_id: t.article_id.clone(),
                model_id: t.model_id.clone(),
                item: ScoreItem {
                    source: article.source_text.clone(),
                    translation: t.text.clone(),
                },
            })),
            Early::Decided(..) => None,
        })
        .flatten()
        .collect();
    let score_map: HashMap<(String, String), f64> = match scores {
        ScoreSource::Precomputed(map) => targets
            .iter()
            .filter_map(|t| {
                let key = (t.article_id.clone(), t.model_id.clone());
                map.get(&key).map(|s| (key, *s))
            })
            .collect(),
        ScoreSource::Scorer(scorer) => external_score_batch(scorer, &targets)?
            .into_iter()
            .map(|q| ((q.article_id, q.model_id), q.score))
            .collect(),
    };
    let lookup = |t: &CandidateTranslation| score_map.get(&t.key()).copied();

    let mut pairs: BTreeMap<Category, Vec<PreferencePair>> = BTreeMap::new();
    let mut clean_pool = Vec::new();
    let mut verdicts = Vec::with_capacity(early.len());
    for e in early {
        match e {
            Early::Decided(pair, v) => {
                if let Some(p) = pair {
                    pairs.entry(p.category).or_default().push(p);
                }
                verdicts.push(v);
            }
            Early::NeedsScore { article, t1, t2 } => {
                let (s1, s2) = (lookup(t1), lookup(t2));
                let decision = classify_score_pair(t1, s1, t2, s2, cfg)?;
                let clean = match &decision {
                    StageDecision::Pair { chosen, .. } => Some(*chosen),
                    StageDecision::Drop(_) => {
                        // both passed every check; keep the better one
                        if s2 > s1 { Some(t2) } else { Some(t1) }
                    }
                    StageDecision::Pass => None,
                };
                let (pair, v) = settle(article, Category::ScoreDelta, decision, cfg)?
                    .expect("score stage always decides");
                if let Some(t) = clean {
                    let prefixed = cfg
                        .prefix_list
                        .iter()
                        .any(|p| t.text.trim_start().starts_with(p.as_str()));
                    if !prefixed && !t.text.trim().is_empty() {
                        clean_pool.push(CleanTranslation {
                            article_id: article.id.clone(),
                            prompt: build_prompt(cfg, article)?,
                            text: t.text.clone(),
                        });
                    }
                }
                if let Some(p) = pair {
                    pairs.entry(p.category).or_default().push(p);
                }
                verdicts.push(v);
            }
        }
    }
    Ok(Curated {
        pairs,
        clean_pool,
        verdicts,
    })
}

/// Curation followed by dataset assembly, with outcome counts in the manifest.
pub fn curate_and_assemble(
    articles: &[Article],
    translations: &[CandidateTranslation],
    judge: &dyn LanguageJudge,
    scores: ScoreSource<'_>,
    cfg: &CurationConfig,
) -> Result<CurationRun, CurationError> {
    let curated = curate(articles, translations, judge, scores, cfg)?;
    let mut rng = Rng::derive(cfg.seed, "curation.assemble");
    let mut assembled = assemble_dataset(&curated.pairs, &curated.clean_pool, cfg, &mut rng)?;
    for v in &curated.verdicts {
        *assembled.manifest.outcomes.entry(v.outcome).or_default() += 1;
    }
    Ok(CurationRun {
        assembled,
        verdicts: curated.verdicts,
    })
}
