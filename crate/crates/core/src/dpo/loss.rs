use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::policy::{check_tokens, log_sum_exp};
use super::{seq_logprob, AdaptedPolicy, DpoError, LogitModel, Matrix};

/// One `(prompt, chosen, rejected)` example in token space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpoItem {
    pub prompt: Vec<usize>,
    pub chosen: Vec<usize>,
    pub rejected: Vec<usize>,
}

impl DpoItem {
    pub fn validate(&self, vocab: usize) -> Result<(), DpoError> {
        if self.chosen.is_empty() || self.rejected.is_empty() {
            return Err(DpoError::EmptyResponse);
        }
        check_tokens(&self.prompt, vocab)?;
        check_tokens(&self.chosen, vocab)?;
        check_tokens(&self.rejected, vocab)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DpoBatch {
    pub items: Vec<DpoItem>,
}

impl DpoBatch {
    pub fn new(items: Vec<DpoItem>) -> Self {
        Self { items }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DpoLoss {
    pub loss: f64,
    /// `β·(Δ_w − Δ_l)` per item.
    pub margins: Vec<f64>,
}

impl DpoLoss {
    pub fn mean_margin(&self) -> f64 {
        self.margins.iter().sum::<f64>() / self.margins.len() as f64
    }
}

/// Gradient of the loss with respect to the adapter factors.
#[derive(Debug, Clone, PartialEq)]
pub struct AdapterGrad {
    pub a: Matrix,
    pub b: Matrix,
}

/// `log σ(z) = −softplus(−z)`, stable for any finite `z`.
pub fn log_sigmoid(z: f64) -> f64 {
    let x = -z;
    -(x.max(0.0) + (-x.abs()).exp().ln_1p())
}

fn check_pair(policy: &dyn LogitModel, reference: &dyn LogitModel, batch: &DpoBatch) -> Result<usize, DpoError> {
    let v = policy.vocab_size();
    if reference.vocab_size() != v {
        return Err(DpoError::VocabMismatch {
            policy: v,
            reference: reference.vocab_size(),
        });
    }
    if batch.items.is_empty() {
        return Err(DpoError::EmptyBatch);
    }
    for item in &batch.items {
        item.validate(v)?;
    }
    Ok(v)
}

fn item_margin(
    policy: &dyn LogitModel,
    reference: &dyn LogitModel,
    item: &DpoItem,
    beta: f64,
) -> Result<f64, DpoError> {
    let dw = seq_logprob(policy, &item.prompt, &item.chosen)?
        - seq_logprob(reference, &item.prompt, &item.chosen)?;
    let dl = seq_logprob(policy, &item.prompt, &item.rejected)?
        - seq_logprob(reference, &item.prompt, &item.rejected)?;
    Ok(beta * (dw - dl))
}

/// Mean DPO loss over the batch. Items are evaluated in parallel and summed
/// in index order.
pub fn dpo_loss(
    policy: &dyn LogitModel,
    reference: &dyn LogitModel,
    batch: &DpoBatch,
    beta: f64,
) -> Result<DpoLoss, DpoError> {
    check_pair(policy, reference, batch)?;
    let margins: Vec<f64> = batch
        .items
        .par_iter()
        .map(|item| item_margin(policy, reference, item, beta))
        .collect::<Result<_, _>>()?;
    let loss = margins.iter().map(|&z| -log_sigmoid(z)).sum::<f64>() / margins.len() as f64;
    Ok(DpoLoss { loss, margins })
}

/// Accumulates `sign · ∂ log π(response|prompt) / ∂W_eff` as sparse rows.
/// Positions conditioned on the start distribution do not touch `W`.
fn logprob_row_grads(
    policy: &dyn LogitModel,
    prompt: &[usize],
    response: &[usize],
    sign: f64,
    out: &mut Vec<(usize, Vec<f64>)>,
) {
    let mut prev = prompt.last().copied();
    let mut row = Vec::with_capacity(policy.vocab_size());
    for &tok in response {
        if let Some(p) = prev {
            policy.row_logits(Some(p), &mut row);
            let lse = log_sum_exp(&row);
            let mut g: Vec<f64> = row.iter().map(|x| -sign * (x - lse).exp()).collect();
            g[tok] += sign;
            out.push((p, g));
        }
        prev = Some(tok);
    }
}

/// Loss and exact analytic gradient with respect to `A` and `B`.
///
/// With `G = ∂L/∂W_eff`, the chain rule through `W_eff = W_ref + A·Bᵀ`
/// gives `∂L/∂A = G·B` and `∂L/∂B = Gᵀ·A`.
pub fn dpo_grad(
    policy: &AdaptedPolicy<'_>,
    reference: &dyn LogitModel,
    batch: &DpoBatch,
    beta: f64,
) -> Result<(DpoLoss, AdapterGrad), DpoError> {
    let v = check_pair(policy, reference, batch)?;
    let n = batch.items.len() as f64;

    let per_item: Vec<(f64, Vec<(usize, Vec<f64>)>)> = batch
        .items
        .par_iter()
        .map(|item| {
            let z = item_margin(policy, reference, item, beta)?;
            let mut rows = Vec::new();
            logprob_row_grads(policy, &item.prompt, &item.chosen, 1.0, &mut rows);
            logprob_row_grads(policy, &item.prompt, &item.rejected, -1.0, &mut rows);
            Ok((z, rows))
        })
        .collect::<Result<_, DpoError>>()?;

    let mut g = Matrix::zeros(v, v);
    let mut margins = Vec::with_capacity(per_item.len());
    let mut loss = 0.0;
    for (z, rows) in per_item {
        loss -= log_sigmoid(z);
        // dL/dz = −σ(−z)/n, and dz/dW = β·(∇log π(y_w) − ∇log π(y_l))
        let coef = -log_sigmoid(-z).exp() * beta / n;
        for (r, grad_row) in rows {
            for (dst, src) in g.row_mut(r).iter_mut().zip(&grad_row) {
                *dst += coef * src;
            }
        }
        margins.push(z);
    }
    loss /= n;

    let adapter = policy.adapter;
    let rank = adapter.rank;
    let mut ga = Matrix::zeros(v, rank);
    let mut gb = Matrix::zeros(v, rank);
    for i in 0..v {
        let g_row = g.row(i);
        if g_row.iter().all(|&x| x == 0.0) {
            continue;
        }
        let a_row = adapter.a.row(i).to_vec();
        for (j, &gij) in g_row.iter().enumerate() {
            if gij == 0.0 {
                continue;
            }
            let b_row = adapter.b.row(j);
            for k in 0..rank {
                ga.as_mut_slice()[i * rank + k] += gij * b_row[k];
                gb.as_mut_slice()[j * rank + k] += gij * a_row[k];
            }
        }
    }
    Ok((DpoLoss { loss, margins }, AdapterGrad { a: ga, b: gb }))
}
