#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_transpref"))
}

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 path")
}

/// Runs train-langid, curate, train-dpo, evaluate and report on the bundled
/// corpus, writing everything under `dir`. Panics on any nonzero exit.
pub fn full_pipeline(dir: &Path, seed: &str) -> Vec<PathBuf> {
    let fx = fixtures();
    let config = fx.join("config.json");
    let profile = dir.join("profile.json");
    let data = dir.join("data");
    let model = dir.join("model");
    let report = dir.join("report.json");
    let table = dir.join("report.md");
    let steps: Vec<Vec<String>> = vec![
        vec!["train-langid".into(), "--corpus".into(), p(&fx.join("langid_corpus.jsonl")).into(), "--out".into(), p(&profile).into()],
        vec![
            "curate".into(), "--articles".into(), p(&fx.join("articles.jsonl")).into(),
            "--translations".into(), p(&fx.join("translations.jsonl")).into(),
            "--lang-profile".into(), p(&profile).into(), "--scorer".into(), "proxy".into(),
            "--out-dir".into(), p(&data).into(),
        ],
        vec![
            "train-dpo".into(), "--train".into(), p(&data.join("train.jsonl")).into(),
            "--val".into(), p(&data.join("val.jsonl")).into(), "--out-dir".into(), p(&model).into(),
        ],
        vec![
            "evaluate".into(), "--articles".into(), p(&fx.join("articles.jsonl")).into(),
            "--translations".into(), p(&fx.join("translations.jsonl")).into(),
            "--lang-profile".into(), p(&profile).into(), "--out".into(), p(&report).into(),
            "--records".into(), p(&dir.join("records.jsonl")).into(),
        ],
        vec!["report".into(), "--report".into(), p(&report).into(), "--out".into(), p(&table).into()],
    ];
    for step in steps {
        let out = bin()
            .args(["--config", p(&config), "--seed", seed])
            .args(&step)
            .output()
            .expect("binary runs");
        assert!(
            out.status.success(),
            "{} failed: {}",
            step[0],
            String::from_utf8_lossy(&out.stderr)
        );
    }
    vec![
        profile,
        data.join("train.jsonl"),
        data.join("val.jsonl"),
        data.join("manifest.json"),
        data.join("verdicts.jsonl"),
        model.join("checkpoint.json"),
        model.join("reference.json"),
        model.join("train_log.jsonl"),
        model.join("summary.json"),
        report,
        dir.join("records.jsonl"),
        table,
    ]
}
