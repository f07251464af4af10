use serde::{Deserialize, Serialize};

use super::{DpoError, Matrix};
use crate::rng::Rng;

/// Anything that yields next-token logits given the previous token.
/// `prev = None` selects the start-of-sequence distribution.
pub trait LogitModel: Sync {
    fn vocab_size(&self) -> usize;

    fn row_logits(&self, prev: Option<usize>, out: &mut Vec<f64>);
}

/// Bigram autoregressive policy: `softmax(init_logits)` for the first token of
/// an empty context, `softmax(transition_logits[prev])` afterwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyPolicy {
    pub vocab_size: usize,
    pub init_logits: Vec<f64>,
    pub transition_logits: Matrix,
}

impl ToyPolicy {
    pub fn new(init_logits: Vec<f64>, transition_logits: Matrix) -> Result<Self, DpoError> {
        let v = init_logits.len();
        if v < 2 {
            return Err(DpoError::Shape(format!("vocabulary of {v} is too small")));
        }
        if transition_logits.rows() != v || transition_logits.cols() != v {
            return Err(DpoError::Shape(format!(
                "transition matrix is {}x{}, expected {v}x{v}",
                transition_logits.rows(),
                transition_logits.cols()
            )));
        }
        if !transition_logits.is_finite() || init_logits.iter().any(|x| !x.is_finite()) {
            return Err(DpoError::Shape("logits must be finite".into()));
        }
        Ok(Self {
            vocab_size: v,
            init_logits,
            transition_logits,
        })
    }

    pub fn uniform(vocab_size: usize) -> Self {
        Self::new(vec![0.0; vocab_size], Matrix::zeros(vocab_size, vocab_size))
            .expect("uniform policy is valid")
    }

    /// Maximum-likelihood bigram fit with add-`smoothing` counts, in log space.
    pub fn fit_bigram(
        sequences: &[&[usize]],
        vocab_size: usize,
        smoothing: f64,
    ) -> Result<Self, DpoError> {
        let mut init = vec![smoothing; vocab_size];
        let mut trans = Matrix::from_fn(vocab_size, vocab_size, |_, _| smoothing);
        for seq in sequences {
            for &t in seq.iter() {
                if t >= vocab_size {
                    return Err(DpoError::TokenOutOfRange { token: t, vocab: vocab_size });
                }
            }
            if let Some(&first) = seq.first() {
                init[first] += 1.0;
            }
            for w in seq.windows(2) {
                let row = trans.row_mut(w[0]);
                row[w[1]] += 1.0;
            }
        }
        let log_normalize = |row: &mut [f64]| {
            let z: f64 = row.iter().sum();
            row.iter_mut().for_each(|x| *x = (*x / z).ln());
        };
        log_normalize(&mut init);
        for r in 0..vocab_size {
            log_normalize(trans.row_mut(r));
        }
        Self::new(init, trans)
    }
}

impl LogitModel for ToyPolicy {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn row_logits(&self, prev: Option<usize>, out: &mut Vec<f64>) {
        out.clear();
        match prev {
            None => out.extend_from_slice(&self.init_logits),
            Some(p) => out.extend_from_slice(self.transition_logits.row(p)),
        }
    }
}

/// Trainable low-rank delta `A·Bᵀ` on the transition logits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowRankAdapter {
    pub rank: usize,
    pub a: Matrix,
    pub b: Matrix,
}

impl LowRankAdapter {
    pub fn zeros(vocab_size: usize, rank: usize) -> Self {
        Self {
            rank,
            a: Matrix::zeros(vocab_size, rank),
            b: Matrix::zeros(vocab_size, rank),
        }
    }

    /// `A` uniform in `[-scale, scale)`, `B` zero, so the delta starts at zero.
    pub fn init(vocab_size: usize, rank: usize, scale: f64, rng: &mut Rng) -> Self {
        Self {
            rank,
            a: Matrix::from_fn(vocab_size, rank, |_, _| rng.uniform_range(-scale, scale)),
            b: Matrix::zeros(vocab_size, rank),
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.a.rows()
    }

    /// `delta[row][j] = Σ_k A[row,k]·B[j,k]`, added into `out`.
    pub fn add_row_delta(&self, row: usize, out: &mut [f64]) {
        let a_row = self.a.row(row);
        for (j, o) in out.iter_mut().enumerate() {
            let b_row = self.b.row(j);
            *o += a_row.iter().zip(b_row).map(|(x, y)| x * y).sum::<f64>();
        }
    }

    pub fn is_zero(&self) -> bool {
        self.a.max_abs() == 0.0 || self.b.max_abs() == 0.0
    }
}

/// Reference policy plus adapter: `W_eff = W_ref + A·Bᵀ`.
#[derive(Debug, Clone, Copy)]
pub struct AdaptedPolicy<'a> {
    pub base: &'a ToyPolicy,
    pub adapter: &'a LowRankAdapter,
}

impl<'a> AdaptedPolicy<'a> {
    pub fn new(base: &'a ToyPolicy, adapter: &'a LowRankAdapter) -> Result<Self, DpoError> {
        if adapter.vocab_size() != base.vocab_size || adapter.b.rows() != base.vocab_size {
            return Err(DpoError::VocabMismatch {
                policy: adapter.vocab_size(),
                reference: base.vocab_size,
            });
        }
        Ok(Self { base, adapter })
    }
}

impl LogitModel for AdaptedPolicy<'_> {
    fn vocab_size(&self) -> usize {
        self.base.vocab_size
    }

    fn row_logits(&self, prev: Option<usize>, out: &mut Vec<f64>) {
        self.base.row_logits(prev, out);
        if let Some(p) = prev {
            self.adapter.add_row_delta(p, out);
        }
    }
}

pub(crate) fn log_sum_exp(row: &[f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

pub(crate) fn check_tokens(tokens: &[usize], vocab: usize) -> Result<(), DpoError> {
    match tokens.iter().find(|&&t| t >= vocab) {
        Some(&token) => Err(DpoError::TokenOutOfRange { token, vocab }),
        None => Ok(()),
    }
}

/// `log π(response | prompt)`, summed over response positions.
pub fn seq_logprob(
    model: &dyn LogitModel,
    prompt: &[usize],
    response: &[usize],
) -> Result<f64, DpoError> {
    if response.is_empty() {
        return Err(DpoError::EmptyResponse);
    }
    let v = model.vocab_size();
    check_tokens(prompt, v)?;
    check_tokens(response, v)?;
    let mut prev = prompt.last().copied();
    let mut row = Vec::with_capacity(v);
    let mut total = 0.0;
    for &tok in response {
        model.row_logits(prev, &mut row);
        total += row[tok] - log_sum_exp(&row);
        prev = Some(tok);
    }
    Ok(total)
}
