use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{make_formatting_pairs, CleanTranslation, CurationConfig, CurationError, Outcome};
use crate::rng::Rng;
use crate::types::{Category, PreferencePair};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryShare {
    pub count: usize,
    pub fraction: f64,
    pub train: usize,
    pub val: usize,
}

/// Summary of an assembled dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub total: usize,
    pub train_count: usize,
    pub val_count: usize,
    pub n_other: usize,
    pub formatting_count: usize,
    pub formatting_fraction_target: f64,
    pub formatting_fraction_achieved: f64,
    pub clean_pool_size: usize,
    pub categories: BTreeMap<Category, CategoryShare>,
    /// Per-article stage outcomes; empty when assembled outside the pipeline.
    #[serde(default)]
    pub outcomes: BTreeMap<Outcome, usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assembled {
    pub train: Vec<PreferencePair>,
    pub val: Vec<PreferencePair>,
    pub manifest: Manifest,
}

/// Formatting pairs needed so that `F / (F + n_other)` is closest to `fraction`.
pub fn formatting_count(fraction: f64, n_other: usize) -> usize {
    if fraction <= 0.0 {
        return 0;
    }
    (fraction * n_other as f64 / (1.0 - fraction)).round() as usize
}

/// Adds formatting pairs to reach the configured mixture, shuffles
/// deterministically, and takes the validation split from the shuffled tail.
pub fn assemble_dataset(
    pairs_by_category: &BTreeMap<Category, Vec<PreferencePair>>,
    clean_pool: &[CleanTranslation],
    cfg: &CurationConfig,
    rng: &mut Rng,
) -> Result<Assembled, CurationError> {
    if pairs_by_category
        .get(&Category::Formatting)
        .is_some_and(|v| !v.is_empty())
    {
        return Err(CurationError::FormattingSupplied);
    }
    let n_other: usize = pairs_by_category.values().map(Vec::len).sum();
    if n_other == 0 {
        return Err(CurationError::NoPairs);
    }
    let n_formatting = formatting_count(cfg.formatting_fraction, n_other);
    if n_formatting > 0 && clean_pool.is_empty() {
        return Err(CurationError::FormattingUnattainable {
            requested: n_formatting,
            max_attainable: 0,
        });
    }
    let formatting = make_formatting_pairs(clean_pool, n_formatting, &cfg.prefix_list, rng)?;

    let mut all: Vec<PreferencePair> = pairs_by_category
        .values()
        .flatten()
        .cloned()
        .chain(formatting)
        .collect();
    all.sort_by(|a, b| a.id.cmp(&b.id));
    rng.shuffle(&mut all);

    let total = all.len();
    if cfg.val_count >= total {
        return Err(CurationError::ValidationSplit {
            val_count: cfg.val_count,
            total,
        });
    }
    let val = all.split_off(total - cfg.val_count);
    let train = all;

    let mut categories = BTreeMap::new();
    for cat in Category::ALL {
        let tr = train.iter().filter(|p| p.category == cat).count();
        let va = val.iter().filter(|p| p.category == cat).count();
        categories.insert(
            cat,
            CategoryShare {
                count: tr + va,
                fraction: (tr + va) as f64 / total as f64,
                train: tr,
                val: va,
            },
        );
    }
    let manifest = Manifest {
        seed: cfg.seed,
        total,
        train_count: train.len(),
        val_count: val.len(),
        n_other,
        formatting_count: n_formatting,
        formatting_fraction_target: cfg.formatting_fraction,
        formatting_fraction_achieved: n_formatting as f64 / total as f64,
        clean_pool_size: clean_pool.len(),
        categories,
        outcomes: BTreeMap::new(),
    };
    Ok(Assembled { train, val, manifest })
}
