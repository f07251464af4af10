use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::error::ErrorKind;
use clap::CommandFactory;
use serde_json::json;

use transpref::config::PipelineConfig;
use transpref::curation::{curate_and_assemble, ScoreSource};
use transpref::dpo::{train_with_observer, Alphabet, DpoItem, ToyPolicy};
use transpref::eval::{self, EvalReport};
use transpref::http::{HttpTransport, UreqTransport};
use transpref::jsonl::{self, read_jsonl};
use transpref::langid::{train_langid, LangProfile, LangSample, LanguageJudge, VerdictSidecar};
use transpref::mt_client::{translate_corpus, BackendSpec};
use transpref::scorer::QualityScorer;
use transpref::{Article, CandidateTranslation, Error, PreferencePair, QualityScore};

use crate::args::{
    Cli, Command, CurateArgs, EvaluateArgs, GlobalArgs, LanguageArgs, ReportArgs, ScoreArgs,
    TrainDpoArgs, TrainLangidArgs, TranslateArgs,
};
use crate::progress::Progress;

pub enum Failure {
    Usage(clap::Error),
    Domain(Error),
}

impl<E: Into<Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Domain(e.into())
    }
}

type Result<T> = std::result::Result<T, Failure>;

fn usage(kind: ErrorKind, message: impl std::fmt::Display) -> Failure {
    Failure::Usage(Cli::command().error(kind, message))
}

fn required(value: Option<PathBuf>, flag: &str) -> Result<PathBuf> {
    value.ok_or_else(|| {
        usage(
            ErrorKind::MissingRequiredArgument,
            format!("the following required argument was not provided: --{flag} <PATH>"),
        )
    })
}

fn other(message: impl Into<String>) -> Failure {
    Failure::Domain(Error::Other(message.into()))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| other(format!("{}: {e}", dir.display())))
}

/// Run-wide settings: merged config plus global flags.
struct Context {
    config: PipelineConfig,
    global: GlobalArgs,
}

impl Context {
    fn new(global: GlobalArgs) -> Result<Self> {
        let mut config = match &global.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        if let Some(seed) = global.seed {
            config.seed = seed;
        }
        let mut config = config.with_derived_seeds();
        if let Some(jobs) = global.jobs {
            let jobs = jobs as usize;
            // a second initialisation only fails if a pool already exists
            let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
            for b in &mut config.backends {
                b.max_in_flight = b.max_in_flight.min(jobs);
            }
            config.scorer.max_in_flight = config.scorer.max_in_flight.min(jobs);
        }
        Ok(Self { config, global })
    }

    fn progress(&self, command: &'static str) -> Progress {
        Progress::new(self.global.progress, command)
    }

    fn judge(&self, args: LanguageArgs) -> Result<Box<dyn LanguageJudge>> {
        if let Some(path) = args.lang_verdicts {
            return Ok(Box::new(VerdictSidecar::load(path)?));
        }
        let path = required(
            args.lang_profile.or_else(|| self.config.paths.lang_profile.clone()),
            "lang-profile",
        )?;
        let profile = LangProfile::load(path)?;
        profile.check_normalization().map_err(other)?;
        Ok(Box::new(profile))
    }

    fn corpus(
        &self,
        articles: Option<PathBuf>,
        translations: Option<PathBuf>,
    ) -> Result<(Vec<Article>, Vec<CandidateTranslation>)> {
        let articles = required(articles.or_else(|| self.config.paths.articles.clone()), "articles")?;
        let translations = required(
            translations.or_else(|| self.config.paths.translations.clone()),
            "translations",
        )?;
        Ok((read_jsonl(articles)?, read_jsonl(translations)?))
    }
}

/// Either a precomputed score table or a live scorer.
enum Scores {
    Table(HashMap<(String, String), f64>),
    Live(Box<dyn QualityScorer>),
}

impl Scores {
    fn load(ctx: &Context, args: ScoreArgs) -> Result<Self> {
        let path = args.scores.or_else(|| ctx.config.paths.scores.clone());
        if let (Some(path), None) = (path, &args.scorer) {
            let table = read_jsonl::<QualityScore>(path)?
                .into_iter()
                .map(|q| ((q.article_id, q.model_id), q.score))
                .collect();
            return Ok(Scores::Table(table));
        }
        let mut settings = ctx.config.scorer.clone();
        if let Some(spec) = args.scorer {
            settings.endpoint = spec;
        }
        settings.spec().map_err(|m| usage(ErrorKind::InvalidValue, m))?;
        let transport: Arc<dyn HttpTransport> = Arc::new(UreqTransport::default());
        Ok(Scores::Live(settings.build(ctx.config.sub_seed("scorer"), transport)?))
    }

    fn source(&self) -> ScoreSource<'_> {
        match self {
            Scores::Table(t) => ScoreSource::Precomputed(t),
            Scores::Live(s) => ScoreSource::Scorer(s.as_ref()),
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let ctx = Context::new(cli.global)?;
    match cli.command {
        Command::Translate(a) => translate(&ctx, a),
        Command::TrainLangid(a) => train_langid_cmd(&ctx, a),
        Command::Curate(a) => curate(&ctx, a),
        Command::TrainDpo(a) => train_dpo(&ctx, a),
        Command::Evaluate(a) => evaluate(&ctx, a),
        Command::Report(a) => report(a),
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", jsonl::to_canonical_string(value)?);
    Ok(())
}

fn translate(ctx: &Context, args: TranslateArgs) -> Result<()> {
    let progress = ctx.progress("translate");
    let articles: Vec<Article> =
        read_jsonl(required(args.articles.or_else(|| ctx.config.paths.articles.clone()), "articles")?)?;
    let backends = if args.backends.is_empty() {
        ctx.config.backends.clone()
    } else {
        let defaults = ctx.config.backends.first().cloned().unwrap_or_default();
        args.backends
            .iter()
            .map(|spec| {
                let (model_id, base_url) = spec.split_once('=').ok_or_else(|| {
                    usage(ErrorKind::InvalidValue, format!("--backend expects MODEL=URL, got {spec:?}"))
                })?;
                let from_config = ctx.config.backends.iter().find(|b| b.model_id == model_id);
                Ok(BackendSpec {
                    model_id: model_id.into(),
                    base_url: base_url.into(),
                    ..from_config.cloned().unwrap_or_else(|| defaults.clone())
                })
            })
            .collect::<Result<Vec<_>>>()?
    };
    if backends.len() != 2 {
        return Err(usage(
            ErrorKind::MissingRequiredArgument,
            format!("translate needs exactly two backends, {} configured", backends.len()),
        ));
    }
    progress.emit("start", json!({ "articles": articles.len(), "backends": backends.len() }));
    let transport: Arc<dyn HttpTransport> = Arc::new(UreqTransport::default());
    let report = translate_corpus(
        &articles,
        &backends,
        &args.out,
        transport,
        &|k| std::env::var(k).ok(),
        ctx.config.sub_seed("mt"),
    )?;
    if let Some(path) = &args.report {
        jsonl::write_json(path, &report)?;
    }
    progress.emit("done", json!({ "written": report.written, "failures": report.failures.len() }));
    print_json(&report)
}

fn train_langid_cmd(ctx: &Context, args: TrainLangidArgs) -> Result<()> {
    let progress = ctx.progress("train-langid");
    let corpus_path = required(args.corpus.or_else(|| ctx.config.paths.lang_corpus.clone()), "corpus")?;
    let corpus: Vec<LangSample> = read_jsonl(corpus_path)?;
    let mut cfg = ctx.config.langid.clone();
    if let Some(v) = args.min_n {
        cfg.min_n = v;
    }
    if let Some(v) = args.max_n {
        cfg.max_n = v;
    }
    if let Some(v) = args.buckets {
        cfg.bucket_count = v;
    }
    if let Some(v) = args.alpha {
        cfg.alpha = v;
    }
    progress.emit("start", json!({ "samples": corpus.len() }));
    let profile = train_langid(&corpus, &cfg)?;
    profile.save(&args.out)?;
    progress.emit("done", json!({ "labels": profile.labels }));
    print_json(&json!({ "labels": profile.labels, "samples": corpus.len() }))
}

fn curate(ctx: &Context, args: CurateArgs) -> Result<()> {
    let progress = ctx.progress("curate");
    let (articles, translations) = ctx.corpus(args.articles, args.translations)?;
    let judge = ctx.judge(args.language)?;
    let scores = Scores::load(ctx, args.scoring)?;

    let mut cfg = ctx.config.curation.clone();
    if let Some(v) = args.target_language {
        cfg.target_language = v;
    }
    if let Some(v) = args.truncation_ratio {
        cfg.truncation_ratio = v;
    }
    if let Some(v) = args.score_delta {
        cfg.score_delta_threshold = v;
    }
    if let Some(v) = args.formatting_fraction {
        cfg.formatting_fraction = v;
    }
    if let Some(v) = args.min_confidence {
        cfg.min_confidence = v;
    }
    if let Some(v) = args.val_count {
        cfg.val_count = v;
    }
    if !args.prefixes.is_empty() {
        cfg.prefix_list = args.prefixes;
    }
    let out_dir = match (args.dry_run, args.out_dir.or_else(|| ctx.config.paths.out_dir.clone())) {
        (true, _) => None,
        (false, Some(dir)) => Some(dir),
        (false, None) => return Err(required(None, "out-dir").unwrap_err()),
    };

    progress.emit("start", json!({ "articles": articles.len(), "translations": translations.len() }));
    let run = curate_and_assemble(&articles, &translations, judge.as_ref(), scores.source(), &cfg)?;
    let manifest = &run.assembled.manifest;
    progress.emit("curated", json!({ "total": manifest.total, "outcomes": manifest.outcomes }));
    if let Some(dir) = out_dir {
        create_dir(&dir)?;
        jsonl::write_jsonl(dir.join("train.jsonl"), &run.assembled.train)?;
        jsonl::write_jsonl(dir.join("val.jsonl"), &run.assembled.val)?;
        jsonl::write_jsonl(dir.join("verdicts.jsonl"), &run.verdicts)?;
        jsonl::write_json(dir.join("manifest.json"), manifest)?;
        progress.emit("done", json!({ "out_dir": dir.display().to_string() }));
    }
    print_json(manifest)
}

fn to_items(alphabet: &Alphabet, pairs: &[PreferencePair]) -> Vec<DpoItem> {
    pairs
        .iter()
        .map(|p| DpoItem {
            prompt: alphabet.encode(&p.prompt),
            chosen: alphabet.encode(&p.chosen),
            rejected: alphabet.encode(&p.rejected),
        })
        .collect()
}

fn train_dpo(ctx: &Context, args: TrainDpoArgs) -> Result<()> {
    let progress = ctx.progress("train-dpo");
    let out_dir = required(args.out_dir.or_else(|| ctx.config.paths.out_dir.clone()), "out-dir")?;
    let train_pairs: Vec<PreferencePair> = read_jsonl(&args.train)?;
    let val_pairs: Vec<PreferencePair> = read_jsonl(&args.val)?;
    let alphabet = match &args.alphabet {
        Some(path) => Alphabet::load(path)?,
        None => Alphabet::default(),
    };

    let mut cfg = ctx.config.train.clone();
    macro_rules! set {
        ($($field:ident),*) => { $( if let Some(v) = args.$field { cfg.$field = v; } )* };
    }
    set!(beta, peak_lr, warmup_steps, epochs, micro_batch, global_batch, eval_every, rank);
    if args.min_lr.is_some() {
        cfg.min_lr = args.min_lr;
    }
    if args.total_steps.is_some() {
        cfg.total_steps = args.total_steps;
    }

    let train_items = to_items(&alphabet, &train_pairs);
    let val_items = to_items(&alphabet, &val_pairs);
    let sequences: Vec<Vec<usize>> = train_items
        .iter()
        .flat_map(|it| {
            [&it.chosen, &it.rejected].map(|r| it.prompt.iter().chain(r.iter()).copied().collect())
        })
        .collect();
    let refs: Vec<&[usize]> = sequences.iter().map(Vec::as_slice).collect();
    let reference = ToyPolicy::fit_bigram(&refs, alphabet.vocab_size(), args.smoothing)?;

    progress.emit("start", json!({ "train": train_items.len(), "val": val_items.len(), "vocab": alphabet.vocab_size() }));
    let state = train_with_observer(&reference, &train_items, &val_items, &cfg, &mut |rec| {
        progress.emit("step", serde_json::to_value(rec).unwrap_or_default());
    })?;

    create_dir(&out_dir)?;
    jsonl::write_json(out_dir.join("reference.json"), &reference)?;
    jsonl::write_json(out_dir.join("checkpoint.json"), &state.checkpoint_file(&cfg))?;
    jsonl::write_jsonl(out_dir.join("train_log.jsonl"), &state.log)?;
    let summary = json!({
        "steps": state.step,
        "total_steps": state.total_steps,
        "best_step": state.best.step,
        "best_val_loss": state.best.val_loss,
        "val_history": state.val_history,
        "epochs": state.epochs,
    });
    jsonl::write_json(out_dir.join("summary.json"), &summary)?;
    progress.emit("done", json!({ "best_step": state.best.step, "best_val_loss": state.best.val_loss }));
    print_json(&summary)
}

fn evaluate(ctx: &Context, args: EvaluateArgs) -> Result<()> {
    let progress = ctx.progress("evaluate");
    let (articles, translations) = ctx.corpus(args.articles, args.translations)?;
    let judge = ctx.judge(args.language)?;
    let scores = if args.no_scores { None } else { Some(Scores::load(ctx, args.scoring)?) };
    progress.emit("start", json!({ "articles": articles.len(), "translations": translations.len() }));
    let records = eval::evaluate_records(
        &articles,
        &translations,
        judge.as_ref(),
        scores.as_ref().map(Scores::source),
        &ctx.config.curation,
    )?;
    let report = eval::aggregate(&records);
    if let Some(path) = &args.records {
        jsonl::write_jsonl(path, &records)?;
    }
    if let Some(path) = &args.out {
        jsonl::write_json(path, &report)?;
    }
    progress.emit("done", json!({ "excluded": report.excluded_articles.len() }));
    print!("{}", eval::render_report(&report, args.format)?);
    Ok(())
}

fn report(args: ReportArgs) -> Result<()> {
    let report: EvalReport = jsonl::read_json(&args.report)?;
    let text = eval::render_report(&report, args.format)?;
    match &args.out {
        Some(path) => std::fs::write(path, text).map_err(|e| other(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
