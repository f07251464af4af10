use super::{CleanTranslation, CurationError};
use crate::rng::Rng;
use crate::types::{Category, PreferencePair};

/// Synthesises formatting pairs: `rejected = prefix + "\n" + chosen`.
///
/// Items are drawn without replacement while the pool lasts, then with
/// replacement. Each pair's prefix is drawn uniformly from `prefixes`.
pub fn make_formatting_pairs(
    pool: &[CleanTranslation],
    count: usize,
    prefixes: &[String],
    rng: &mut Rng,
) -> Result<Vec<PreferencePair>, CurationError> {
    if count == 0 {
        return Ok(Vec::new());
    }
    if pool.is_empty() {
        return Err(CurationError::EmptyPool { requested: count });
    }
    if prefixes.is_empty() {
        return Err(CurationError::NoPrefixes);
    }

    let mut order: Vec<usize> = (0..pool.len()).collect();
    rng.shuffle(&mut order);
    let mut uses = vec![0usize; pool.len()];
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let idx = if k < order.len() { order[k] } else { rng.below(pool.len()) };
        let prefix = &prefixes[rng.below(prefixes.len())];
        let item = &pool[idx];
        out.push(PreferencePair {
            id: format!("{}:formatting:{}", item.article_id, uses[idx]),
            prompt: item.prompt.clone(),
            chosen: item.text.clone(),
            rejected: format!("{prefix}\n{}", item.text),
            category: Category::Formatting,
            score_chosen: None,
            score_rejected: None,
        });
        uses[idx] += 1;
    }
    Ok(out)
}
