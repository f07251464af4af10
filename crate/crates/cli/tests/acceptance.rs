//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.
//!
//! Run with `cargo test -p transpref-cli --test acceptance`.

mod common;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::f64::consts::LN_2;
use std::time::{Duration, Instant};

use transpref::curation::{
    assemble_dataset, curate, is_truncated, CleanTranslation, CurationConfig, Outcome, ScoreSource,
};
use transpref::dpo::{
    dpo_grad, dpo_loss, train, AdaptedPolicy, DpoBatch, DpoItem, LowRankAdapter, LrSchedule, Matrix,
    ToyPolicy, TrainConfig,
};
use transpref::eval::{evaluate, render_report, ReportFormat};
use transpref::langid::{
    train_langid, LangIdConfig, LangIdError, LangProfile, LangSample, LangVerdict, LanguageJudge,
};
use transpref::scorer::ProxyScorer;
use transpref::{Article, CandidateTranslation, Category, Origin, PreferencePair, Rng};

type Outcome_ = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn main() {
    let criteria: Vec<(u32, &str, Duration, fn() -> Outcome_)> = vec![
        (1, "DPO identity value", Duration::from_secs(1), dpo_identity),
        (2, "gradient oracle", Duration::from_secs(10), gradient_oracle),
        (3, "toy training convergence", Duration::from_secs(60), toy_convergence),
        (4, "scheduler shape", Duration::from_secs(1), scheduler_shape),
        (5, "curation oracle equivalence", Duration::from_secs(5), curation_oracle),
        (6, "mixture fidelity", Duration::from_secs(5), mixture_fidelity),
        (7, "error-rate report fixture", Duration::from_secs(10), error_rate_fixture),
        (8, "language-ID desk accuracy", Duration::from_secs(10), langid_accuracy),
        (9, "determinism sweep", Duration::from_secs(120), determinism_sweep),
    ];
    let mut failed = 0;
    for (n, name, budget, check) in criteria {
        let start = Instant::now();
        let result = check();
        let took = start.elapsed();
        let result = match result {
            Ok(detail) if took > budget => Err(format!("{detail}; took {took:.2?}, budget {budget:?}")),
            other => other,
        };
        match result {
            Ok(detail) => println!("criterion {n} {name}: PASS ({detail}) [{took:.2?}]"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n} {name}: FAIL ({detail}) [{took:.2?}]");
            }
        }
    }
    println!("criterion 10 not-reproducible scope: DECLARED (leaderboard scores, absolute COMET gains and 9B validation losses are out of scope)");
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all criteria passed");
}

fn random_policy(v: usize, spread: f64, rng: &mut Rng) -> ToyPolicy {
    let init = (0..v).map(|_| rng.uniform_range(-spread, spread)).collect();
    let trans = Matrix::from_fn(v, v, |_, _| rng.uniform_range(-spread, spread));
    ToyPolicy::new(init, trans).unwrap()
}

fn random_seq(len: usize, v: usize, rng: &mut Rng) -> Vec<usize> {
    (0..len).map(|_| rng.below(v)).collect()
}

fn random_batch(v: usize, max_items: usize, max_len: usize, rng: &mut Rng) -> DpoBatch {
    let n = 1 + rng.below(max_items);
    DpoBatch::new(
        (0..n)
            .map(|_| {
                let prompt_len = rng.below(9);
                let (lw, ll) = (1 + rng.below(max_len), 1 + rng.below(max_len));
                DpoItem {
                    prompt: random_seq(prompt_len, v, rng),
                    chosen: random_seq(lw, v, rng),
                    rejected: random_seq(ll, v, rng),
                }
            })
            .collect(),
    )
}

fn dpo_identity() -> Outcome_ {
    let mut rng = Rng::new(101);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let v = 2 + rng.below(63);
        let reference = random_policy(v, 4.0, &mut rng);
        let batch = random_batch(v, 8, 32, &mut rng);
        let beta = rng.uniform_range(0.01, 2.0);
        let zero = LowRankAdapter::zeros(v, 1 + rng.below(8));
        let adapted = AdaptedPolicy::new(&reference, &zero).map_err(|e| e.to_string())?;
        let copy = reference.clone();
        for policy in [&adapted as &dyn transpref::dpo::LogitModel, &copy] {
            let loss = dpo_loss(policy, &reference, &batch, beta).map_err(|e| e.to_string())?.loss;
            worst = worst.max((loss - LN_2).abs());
        }
    }
    ensure!(worst <= 1e-12, "max |loss - ln 2| = {worst:e}");
    Ok(format!("100 batches, max |loss - ln 2| = {worst:.1e}"))
}

fn log_softmax_at(logits: &[f64], t: usize) -> f64 {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = logits.iter().map(|x| (x - m).exp()).sum();
    logits[t] - m - z.ln()
}

/// The DPO loss written over transition counts: a transition used equally
/// often by the chosen and the rejected response drops out exactly, so the
/// finite differences below see no rounding noise from it.
fn count_form_loss(reference: &ToyPolicy, ad: &LowRankAdapter, batch: &DpoBatch, beta: f64) -> f64 {
    let v = reference.vocab_size;
    let row = |p: Option<usize>, adapted: bool| -> Vec<f64> {
        match p {
            None => reference.init_logits.clone(),
            Some(p) => (0..v)
                .map(|j| {
                    let base = reference.transition_logits.get(p, j);
                    if !adapted {
                        return base;
                    }
                    base + (0..ad.rank).map(|k| ad.a.get(p, k) * ad.b.get(j, k)).sum::<f64>()
                })
                .collect(),
        }
    };
    let mut total = 0.0;
    for item in &batch.items {
        let mut diff: BTreeMap<(Option<usize>, usize), i64> = BTreeMap::new();
        for (resp, sign) in [(&item.chosen, 1), (&item.rejected, -1)] {
            let mut prev = item.prompt.last().copied();
            for &t in resp.iter() {
                *diff.entry((prev, t)).or_default() += sign;
                prev = Some(t);
            }
        }
        let mut z = 0.0;
        for ((p, t), c) in diff {
            if c != 0 {
                z += c as f64 * (log_softmax_at(&row(p, true), t) - log_softmax_at(&row(p, false), t));
            }
        }
        z *= beta;
        total += if z > 0.0 { (-z).exp().ln_1p() } else { -z + z.exp().ln_1p() };
    }
    total / batch.items.len() as f64
}

fn gradient_oracle() -> Outcome_ {
    let mut rng = Rng::new(202);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for _ in 0..20 {
        let v = 4 + rng.below(5);
        let r = 2 + rng.below(3);
        let reference = random_policy(v, 1.0, &mut rng);
        let batch = random_batch(v, 4, 6, &mut rng);
        let beta = rng.uniform_range(0.5, 2.0);
        let adapter = LowRankAdapter {
            rank: r,
            a: Matrix::from_fn(v, r, |_, _| rng.uniform_range(-0.5, 0.5)),
            b: Matrix::from_fn(v, r, |_, _| rng.uniform_range(-0.5, 0.5)),
        };
        let loss_at = |ad: &LowRankAdapter| count_form_loss(&reference, ad, &batch, beta);
        let policy = AdaptedPolicy::new(&reference, &adapter).map_err(|e| e.to_string())?;
        let (loss, grad) = dpo_grad(&policy, &reference, &batch, beta).map_err(|e| e.to_string())?;
        let oracle = loss_at(&adapter);
        ensure!((loss.loss - oracle).abs() < 1e-12, "loss {} disagrees with count form {oracle}", loss.loss);
        for which in 0..2 {
            for i in 0..v {
                for k in 0..r {
                    let bump = |delta: f64| {
                        let mut ad = adapter.clone();
                        let m = if which == 0 { &mut ad.a } else { &mut ad.b };
                        m.set(i, k, m.get(i, k) + delta);
                        loss_at(&ad)
                    };
                    let numeric = (bump(h) - bump(-h)) / (2.0 * h);
                    let analytic = if which == 0 { grad.a.get(i, k) } else { grad.b.get(i, k) };
                    let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-12);
                    worst = worst.max(rel);
                    checked += 1;
                }
            }
        }
    }
    ensure!(worst < 1e-6, "max relative error {worst:e} over {checked} entries");
    Ok(format!("{checked} entries, max relative error {worst:.1e}"))
}

/// Chosen responses step by +1 or +2 (mod V); rejected ones by +4 or +5.
fn separable_set(n: usize, rng: &mut Rng) -> Vec<DpoItem> {
    const V: usize = 8;
    let walk = |start: usize, steps: [usize; 2], rng: &mut Rng| {
        let mut out = Vec::with_capacity(8);
        let mut cur = start;
        for _ in 0..8 {
            cur = (cur + steps[rng.below(2)]) % V;
            out.push(cur);
        }
        out
    };
    (0..n)
        .map(|_| {
            let start = rng.below(V);
            DpoItem {
                prompt: vec![start],
                chosen: walk(start, [1, 2], rng),
                rejected: walk(start, [4, 5], rng),
            }
        })
        .collect()
}

fn toy_convergence() -> Outcome_ {
    let mut rng = Rng::new(303);
    let train_set = separable_set(200, &mut rng);
    let val_set = separable_set(50, &mut rng);
    let seqs: Vec<Vec<usize>> = train_set
        .iter()
        .flat_map(|it| [&it.chosen, &it.rejected].map(|r| [it.prompt.as_slice(), r].concat()))
        .collect();
    let refs: Vec<&[usize]> = seqs.iter().map(Vec::as_slice).collect();
    let reference = ToyPolicy::fit_bigram(&refs, 8, 1.0).map_err(|e| e.to_string())?;
    let cfg = TrainConfig {
        beta: 0.1,
        peak_lr: 20.0,
        min_lr: None,
        warmup_steps: 10,
        total_steps: None,
        epochs: 5,
        micro_batch: 4,
        global_batch: 8,
        eval_every: 5,
        seed: 3,
        rank: 4,
        init_scale: 0.1,
    };
    let state = train(&reference, &train_set, &val_set, &cfg).map_err(|e| e.to_string())?;
    let last = state.epochs.last().ok_or("no epochs ran")?;
    let min_val = state.val_history.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
    ensure!(state.epochs.len() == 5, "ran {} epochs", state.epochs.len());
    ensure!(last.train_loss < 0.3, "train loss {:.4}", last.train_loss);
    ensure!(last.mean_margin > 2.0, "mean margin {:.4}", last.mean_margin);
    ensure!(state.best.val_loss < LN_2, "best validation loss {:.4}", state.best.val_loss);
    ensure!(state.best.val_loss == min_val, "best checkpoint is not the validation minimum");
    Ok(format!(
        "train loss {:.4}, mean margin {:.3}, best val loss {:.4} at step {}",
        last.train_loss, last.mean_margin, state.best.val_loss, state.best.step
    ))
}

fn scheduler_shape() -> Outcome_ {
    let (peak, min, warmup, total) = (1e-6, 1e-7, 1500, 3000);
    let s = LrSchedule::new(peak, min, warmup, total).map_err(|e| e.to_string())?;
    let lr = |k| s.lr_at(k).unwrap();
    ensure!(lr(0) == 0.0, "lr(0) = {}", lr(0));
    ensure!((lr(warmup) - peak).abs() <= 1e-15 * peak, "lr({warmup}) = {}", lr(warmup));
    ensure!((lr(total) - min).abs() <= 1e-15 * peak, "lr({total}) = {}", lr(total));
    let mut prev = f64::INFINITY;
    for k in 0..=total {
        let expected = if k < warmup {
            peak * k as f64 / warmup as f64
        } else {
            let t = (k - warmup) as f64 / (total - warmup) as f64;
            min + 0.5 * (peak - min) * (1.0 + (std::f64::consts::PI * t).cos())
        };
        ensure!((lr(k) - expected).abs() <= 1e-12 * peak, "step {k}: {} vs {expected}", lr(k));
        if k >= warmup {
            ensure!(lr(k) <= prev, "increase at step {k}");
            prev = lr(k);
        }
    }
    ensure!(s.lr_at(total + 1).is_err(), "step past the end accepted");
    Ok(format!("{} steps match the closed form", total + 1))
}

/// Judge driven by the first character of the text: S is confident Slovene,
/// L is Slovene below the confidence floor, G is German, Q is unreadable.
struct TagJudge;

impl LanguageJudge for TagJudge {
    fn judge(&self, t: &CandidateTranslation) -> Result<LangVerdict, LangIdError> {
        let (label, confidence) = match t.text.chars().next() {
            Some('S') => ("sl", 0.95),
            Some('L') => ("sl", 0.30),
            Some('G') => ("de", 0.90),
            _ => return Err(LangIdError::Indeterminate("no signal".into())),
        };
        Ok(LangVerdict { label: label.into(), confidence })
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Expected {
    Pair(Category, String),
    Drop(Outcome),
}

/// Straight-line restatement of the selection rules on integers.
fn oracle(src_len: usize, sides: [(char, usize, i64); 2]) -> Expected {
    let models = ["m1", "m2"];
    let lang_ok = |tag: char| tag == 'S';
    let (ok1, ok2) = (lang_ok(sides[0].0), lang_ok(sides[1].0));
    if !(ok1 && ok2) {
        if ok1 {
            return Expected::Pair(Category::Language, models[0].into());
        }
        if ok2 {
            return Expected::Pair(Category::Language, models[1].into());
        }
        if sides[0].0 == 'Q' || sides[1].0 == 'Q' {
            return Expected::Drop(Outcome::DroppedIndeterminate);
        }
        return Expected::Drop(Outcome::DroppedBothBad);
    }
    let short = |len: usize| 2 * len < src_len;
    match (short(sides[0].1), short(sides[1].1)) {
        (true, true) => return Expected::Drop(Outcome::DroppedBothBad),
        (true, false) => return Expected::Pair(Category::Truncation, models[1].into()),
        (false, true) => return Expected::Pair(Category::Truncation, models[0].into()),
        (false, false) => {}
    }
    let (k1, k2) = (sides[0].2, sides[1].2);
    if (k1 - k2).abs() > 50 {
        let winner = if k1 > k2 { models[0] } else { models[1] };
        Expected::Pair(Category::ScoreDelta, winner.into())
    } else {
        Expected::Drop(Outcome::DroppedBelowThreshold)
    }
}

fn curation_oracle() -> Outcome_ {
    let mut rng = Rng::new(505);
    let tags = ['S', 'L', 'G', 'Q'];
    let mut articles = Vec::new();
    let mut translations = Vec::new();
    let mut scores = HashMap::new();
    let mut expected = BTreeMap::new();
    let mut texts = HashMap::new();
    for i in 0..500 {
        let id = format!("a{i:03}");
        let src_len = 40 + rng.below(41);
        // the first 144 articles walk every language x length cell once
        let (lang_cell, len_cell) = if i < 144 {
            (i % 16, i / 16)
        } else {
            let lang = if rng.below(10) < 6 { 0 } else { rng.below(16) };
            let len = if rng.below(10) < 6 { 0 } else { rng.below(9) };
            (lang, len)
        };
        let delta = match rng.below(6) {
            0 => 0,
            1 => 49,
            2 => 50,
            3 => 51,
            _ => rng.below(301) as i64,
        };
        let base = 300 + rng.below(401) as i64;
        let milli = if rng.below(2) == 0 { [base, base + delta] } else { [base + delta, base] };
        let lens = [len_cell % 3, len_cell / 3].map(|c| match c {
            0 => src_len,
            1 => src_len.div_ceil(2),
            _ => (src_len - 1) / 2,
        });
        let lang = [tags[lang_cell % 4], tags[lang_cell / 4]];
        let mut sides = Vec::new();
        for (m, model) in ["m1", "m2"].iter().enumerate() {
            let text: String = std::iter::once(lang[m])
                .chain(std::iter::once(if m == 0 { '1' } else { '2' }))
                .chain(std::iter::repeat('x'))
                .take(lens[m])
                .collect();
            texts.insert((id.clone(), model.to_string()), text.clone());
            translations.push(CandidateTranslation::new(id.clone(), *model, text));
            scores.insert((id.clone(), model.to_string()), milli[m] as f64 / 1000.0);
            sides.push((lang[m], lens[m], milli[m]));
        }
        articles.push(Article::new(id.clone(), "e".repeat(src_len), Origin::Wiki));
        expected.insert(id, oracle(src_len, [sides[0], sides[1]]));
    }

    let cfg = CurationConfig::default();
    let curated = curate(&articles, &translations, &TagJudge, ScoreSource::Precomputed(&scores), &cfg)
        .map_err(|e| e.to_string())?;
    let mut got: BTreeMap<String, Expected> = curated
        .verdicts
        .iter()
        .filter(|v| !matches!(v.outcome, Outcome::PairLanguage | Outcome::PairTruncation | Outcome::PairScoreDelta))
        .map(|v| (v.article_id.clone(), Expected::Drop(v.outcome)))
        .collect();
    for pairs in curated.pairs.values() {
        for p in pairs {
            let article = p.id.split(':').next().unwrap().to_string();
            let winner = ["m1", "m2"]
                .into_iter()
                .find(|m| texts[&(article.clone(), m.to_string())] == p.chosen)
                .ok_or("chosen text matches neither model")?;
            got.insert(article, Expected::Pair(p.category, winner.into()));
        }
    }
    let mismatches: Vec<_> = expected
        .iter()
        .filter(|(id, want)| got.get(*id) != Some(want))
        .map(|(id, want)| format!("{id}: want {want:?}, got {:?}", got.get(id)))
        .collect();
    ensure!(mismatches.is_empty(), "{} mismatches, first: {}", mismatches.len(), mismatches[0]);

    let mut cells = BTreeSet::new();
    for e in expected.values() {
        cells.insert(format!("{e:?}").split('"').next().unwrap().to_string());
    }
    ensure!(cells.len() == 6, "only {} outcome kinds exercised: {cells:?}", cells.len());

    // boundaries: exactly half the source length, and a delta of exactly 0.05
    let src = Article::new("b", "e".repeat(40), Origin::Wiki);
    let half = CandidateTranslation::new("b", "m1", format!("S1{}", "x".repeat(18)));
    ensure!(!is_truncated(&src, &half, &cfg), "ratio 0.5 counted as truncated");
    let full = CandidateTranslation::new("b", "m2", format!("S2{}", "x".repeat(38)));
    let edge = HashMap::from([
        (("b".to_string(), "m1".to_string()), 0.80),
        (("b".to_string(), "m2".to_string()), 0.75),
    ]);
    let run = curate(&[src], &[half, full], &TagJudge, ScoreSource::Precomputed(&edge), &cfg)
        .map_err(|e| e.to_string())?;
    ensure!(
        run.verdicts[0].outcome == Outcome::DroppedBelowThreshold,
        "delta 0.05 gave {:?}",
        run.verdicts[0].outcome
    );
    Ok(format!("500 articles, 0 mismatches, {} outcome kinds, both boundaries hold", cells.len()))
}

fn pairs_of(cat: Category, n: usize) -> Vec<PreferencePair> {
    (0..n)
        .map(|i| PreferencePair {
            id: format!("{}:{i:05}", cat.as_str()),
            prompt: "p".into(),
            chosen: format!("dober {i}"),
            rejected: format!("slab {i}"),
            category: cat,
            score_chosen: None,
            score_rejected: None,
        })
        .collect()
}

fn clean_pool(n: usize) -> Vec<CleanTranslation> {
    (0..n)
        .map(|i| CleanTranslation {
            article_id: format!("c{i:05}"),
            prompt: "p".into(),
            text: format!("čisti prevod {i}"),
        })
        .collect()
}

fn mixture_fidelity() -> Outcome_ {
    let cfg = CurationConfig { val_count: 1, ..CurationConfig::default() };
    let mut notes = Vec::new();
    for n in [10, 100, 1000] {
        let by_cat = BTreeMap::from([(Category::ScoreDelta, pairs_of(Category::ScoreDelta, n))]);
        for pool in [n, 3] {
            let out = assemble_dataset(&by_cat, &clean_pool(pool), &cfg, &mut Rng::new(n as u64))
                .map_err(|e| e.to_string())?;
            let total = out.train.len() + out.val.len();
            let f = out
                .train
                .iter()
                .chain(&out.val)
                .filter(|p| p.category == Category::Formatting)
                .count();
            ensure!(f == out.manifest.formatting_count, "manifest says {} formatting, data has {f}", out.manifest.formatting_count);
            let gap = (f as f64 - 0.2 * total as f64).abs();
            ensure!(gap <= 1.0, "N={n}, pool={pool}: {f} of {total} is {gap} pairs from 20%");
        }
        notes.push(format!("N={n}"));
    }

    let by_cat = BTreeMap::from([
        (Category::Language, pairs_of(Category::Language, 220)),
        (Category::Truncation, pairs_of(Category::Truncation, 30)),
        (Category::ScoreDelta, pairs_of(Category::ScoreDelta, 550)),
    ]);
    let out = assemble_dataset(&by_cat, &clean_pool(500), &cfg, &mut Rng::new(7)).map_err(|e| e.to_string())?;
    let pct = |c: Category| (out.manifest.categories[&c].fraction * 100.0).round() as i64;
    let got = [Category::Language, Category::Truncation, Category::Formatting, Category::ScoreDelta].map(pct);
    ensure!(got == [22, 3, 20, 55], "category percentages {got:?}");
    Ok(format!("{} within one pair; mixture 22/3/20/55", notes.join(", ")))
}

fn words(alphabet: &[char], weights: &[f64], n_chars: usize, rng: &mut Rng) -> String {
    let total: f64 = weights.iter().sum();
    let mut out = String::new();
    while out.chars().count() < n_chars {
        let len = 2 + rng.below(7);
        for _ in 0..len {
            let mut x = rng.next_uniform() * total;
            let mut pick = alphabet[alphabet.len() - 1];
            for (c, w) in alphabet.iter().zip(weights) {
                if x < *w {
                    pick = *c;
                    break;
                }
                x -= w;
            }
            out.push(pick);
        }
        out.push(' ');
    }
    out.trim_end().to_string()
}

struct SynthLang {
    label: &'static str,
    alphabet: Vec<char>,
    weights: Vec<f64>,
}

impl SynthLang {
    fn zipf(label: &'static str, alphabet: &str) -> Self {
        let alphabet: Vec<char> = alphabet.chars().collect();
        let weights = (1..=alphabet.len()).map(|r| 1.0 / r as f64).collect();
        Self { label, alphabet, weights }
    }

    fn doc(&self, n_chars: usize, rng: &mut Rng) -> String {
        words(&self.alphabet, &self.weights, n_chars, rng)
    }

    fn samples(&self, n: usize, rng: &mut Rng) -> Vec<LangSample> {
        (0..n)
            .map(|_| LangSample { text: self.doc(40 + rng.below(80), rng), label: self.label.into() })
            .collect()
    }
}

fn accuracy(profile: &LangProfile, langs: &[&SynthLang], per_lang: usize, rng: &mut Rng) -> Result<f64, String> {
    let mut right = 0;
    for lang in langs {
        for _ in 0..per_lang {
            let text = lang.doc(40 + rng.below(80), rng);
            if profile.identify(&text).map_err(|e| e.to_string())?.label == lang.label {
                right += 1;
            }
        }
    }
    Ok(right as f64 / (per_lang * langs.len()) as f64)
}

fn train_pair(a: &SynthLang, b: &SynthLang, rng: &mut Rng) -> Result<LangProfile, String> {
    let mut corpus = a.samples(200, rng);
    corpus.extend(b.samples(200, rng));
    train_langid(&corpus, &LangIdConfig::default()).map_err(|e| e.to_string())
}

fn langid_accuracy() -> Outcome_ {
    let mut rng = Rng::new(808);
    let sl = SynthLang::zipf("sl", "aeiolnrstjkvdmpčšž");
    let de = SynthLang::zipf("de", "ßäöüwxyzqfghbcäu");
    let disjoint = train_pair(&sl, &de, &mut rng)?;
    let acc1 = accuracy(&disjoint, &[&sl, &de], 100, &mut rng)?;
    ensure!(acc1 == 1.0, "disjoint alphabets: accuracy {acc1}");

    // 24 shared letters, 3 private letters each: 24 / 30 = 80% overlap
    let shared = "abcdefghijklmnoprstuvzyw";
    let x = SynthLang::zipf("x", &format!("{shared}čšž"));
    let y_order: String = shared.chars().rev().chain("qäö".chars()).collect();
    let y = SynthLang::zipf("y", &y_order);
    let sx: BTreeSet<char> = x.alphabet.iter().copied().collect();
    let sy: BTreeSet<char> = y.alphabet.iter().copied().collect();
    let overlap = sx.intersection(&sy).count() as f64 / sx.union(&sy).count() as f64;
    ensure!(overlap >= 0.8, "overlap only {overlap}");
    let overlapping = train_pair(&x, &y, &mut rng)?;
    let acc2 = accuracy(&overlapping, &[&x, &y], 200, &mut rng)?;
    ensure!(acc2 >= 0.95, "overlapping alphabets: accuracy {acc2}");
    Ok(format!("disjoint {:.1}%, {:.0}% shared alphabet {:.1}%", acc1 * 100.0, overlap * 100.0, acc2 * 100.0))
}

fn error_rate_fixture() -> Outcome_ {
    let mut rng = Rng::new(707);
    let sl = SynthLang::zipf("sl", "aeiolnrstjkvdmpčšž");
    let de = SynthLang::zipf("de", "ßäöüwxyzqfghbc");
    let profile = train_pair(&sl, &de, &mut rng)?;

    // (model, language errors, truncation errors) per 1000 articles
    let planted = [
        ("EuroLLM-9B-Instruct", 10, 4, ["1.0", "0.4", "1.4"]),
        ("GaMS-9B-Instruct", 95, 35, ["9.5", "3.5", "13.0"]),
        ("GaMS-9B-DPO-Translator", 6, 2, ["0.6", "0.2", "0.8"]),
    ];
    let n = 1000;
    let articles: Vec<Article> = (0..n)
        .map(|i| {
            let origin = if i % 3 == 0 { Origin::News } else { Origin::Wiki };
            Article::new(format!("w{i:04}"), "the source text ".repeat(8), origin)
        })
        .collect();
    let mut translations = Vec::new();
    let mut union = BTreeSet::new();
    for (model, n_lang, n_trunc, _) in planted {
        let mut order: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut order);
        let lang: BTreeSet<usize> = order[..n_lang].iter().copied().collect();
        let trunc: BTreeSet<usize> = order[n_lang..n_lang + n_trunc].iter().copied().collect();
        for (i, a) in articles.iter().enumerate() {
            let text = if lang.contains(&i) {
                de.doc(a.source_char_count, &mut rng)
            } else if trunc.contains(&i) {
                sl.doc(a.source_char_count / 4, &mut rng)
            } else {
                sl.doc(a.source_char_count, &mut rng)
            };
            translations.push(CandidateTranslation::new(a.id.clone(), model, text));
            if lang.contains(&i) || trunc.contains(&i) {
                union.insert(a.id.clone());
            }
        }
    }
    let report = evaluate(
        &articles,
        &translations,
        &profile,
        Some(ScoreSource::Scorer(&ProxyScorer)),
        &CurationConfig::default(),
    )
    .map_err(|e| e.to_string())?;
    for (model, n_lang, n_trunc, printed) in planted {
        let m = report.per_model.get(model).ok_or(format!("{model} missing"))?;
        let want = [n_lang as f64 / 1000.0, n_trunc as f64 / 1000.0, (n_lang + n_trunc) as f64 / 1000.0];
        let got = [m.language_error_rate, m.truncation_error_rate, m.combined_rate];
        ensure!(got == want, "{model}: rates {got:?}, planted {want:?}");
        let shown = got.map(|r| format!("{:.1}", r * 100.0));
        ensure!(shown == printed, "{model}: rendered {shown:?}");
    }
    let excluded: BTreeSet<String> = report.excluded_articles.iter().cloned().collect();
    ensure!(excluded == union, "exclusion set has {} articles, planted union {}", excluded.len(), union.len());
    let kept = n - union.len();
    ensure!(report.per_model.values().all(|m| m.n_scored == kept), "scored count differs from {kept}");
    let table = render_report(&report, ReportFormat::Csv).map_err(|e| e.to_string())?;
    ensure!(table.contains("GaMS-9B-DPO-Translator,0.6%,0.2%,0.8%"), "csv row missing:\n{table}");
    Ok(format!("three rows reproduced exactly; {} articles excluded", union.len()))
}

fn determinism_sweep() -> Outcome_ {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let files_a = common::full_pipeline(a.path(), "42");
    let files_b = common::full_pipeline(b.path(), "42");
    for (fa, fb) in files_a.iter().zip(&files_b) {
        let (da, db) = (std::fs::read(fa).map_err(|e| e.to_string())?, std::fs::read(fb).map_err(|e| e.to_string())?);
        ensure!(da == db, "{} differs between runs", fa.file_name().unwrap().to_string_lossy());
    }
    Ok(format!("{} artifacts byte-identical across two runs", files_a.len()))
}
