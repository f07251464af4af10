use serde::{Deserialize, Serialize};

use super::{dpo_grad, dpo_loss, AdaptedPolicy, DpoBatch, DpoError, DpoItem, LowRankAdapter, LrSchedule, Matrix, ToyPolicy};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub beta: f64,
    pub peak_lr: f64,
    /// Defaults to `0.1 × peak_lr` when unset.
    pub min_lr: Option<f64>,
    pub warmup_steps: usize,
    /// Defaults to `epochs × ceil(n_train / global_batch)` when unset.
    pub total_steps: Option<usize>,
    pub epochs: usize,
    pub micro_batch: usize,
    pub global_batch: usize,
    pub eval_every: usize,
    pub seed: u64,
    pub rank: usize,
    pub init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            beta: 0.1,
            peak_lr: 1e-6,
            min_lr: None,
            warmup_steps: 1500,
            total_steps: None,
            epochs: 3,
            micro_batch: 1,
            global_batch: 16,
            eval_every: 50,
            seed: 0,
            rank: 4,
            init_scale: 0.01,
        }
    }
}

impl TrainConfig {
    pub fn resolved_min_lr(&self) -> f64 {
        self.min_lr.unwrap_or(0.1 * self.peak_lr)
    }

    pub fn steps_per_epoch(&self, n_train: usize) -> usize {
        n_train.div_ceil(self.global_batch.max(1))
    }

    pub fn resolved_total_steps(&self, n_train: usize) -> usize {
        self.total_steps
            .unwrap_or(self.epochs * self.steps_per_epoch(n_train))
    }

    pub fn schedule(&self, total_steps: usize) -> Result<LrSchedule, DpoError> {
        LrSchedule::new(self.peak_lr, self.resolved_min_lr(), self.warmup_steps, total_steps)
    }

    pub fn validate(&self) -> Result<(), DpoError> {
        let bad = |m: String| Err(DpoError::InvalidConfig(m));
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad(format!("beta {} must be positive", self.beta));
        }
        if !(self.peak_lr >= 0.0 && self.peak_lr.is_finite()) {
            return bad(format!("peak_lr {} must be non-negative", self.peak_lr));
        }
        if self.micro_batch == 0 || self.global_batch == 0 {
            return bad("batch sizes must be positive".into());
        }
        if !self.global_batch.is_multiple_of(self.micro_batch) {
            return bad(format!(
                "global_batch {} is not a multiple of micro_batch {}",
                self.global_batch, self.micro_batch
            ));
        }
        if self.rank == 0 {
            return bad("adapter rank must be at least 1".into());
        }
        if self.eval_every == 0 {
            return bad("eval_every must be positive".into());
        }
        Ok(())
    }
}

/// Adapter snapshot with the validation loss it achieved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub step: usize,
    pub val_loss: f64,
    pub adapter: LowRankAdapter,
}

/// On-disk checkpoint layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointFile {
    pub config: TrainConfig,
    pub step: usize,
    #[serde(rename = "A")]
    pub a: Matrix,
    #[serde(rename = "B")]
    pub b: Matrix,
    pub val_loss: f64,
}

impl CheckpointFile {
    pub fn adapter(&self) -> LowRankAdapter {
        LowRankAdapter {
            rank: self.a.cols(),
            a: self.a.clone(),
            b: self.b.clone(),
        }
    }
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLogRecord {
    pub step: usize,
    pub lr: f64,
    pub train_loss: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub val_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochSummary {
    pub epoch: usize,
    pub step: usize,
    pub train_loss: f64,
    pub mean_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    pub step: usize,
    pub total_steps: usize,
    pub adapter: LowRankAdapter,
    pub loss_history: Vec<(usize, f64)>,
    pub val_history: Vec<(usize, f64)>,
    pub log: Vec<TrainLogRecord>,
    pub epochs: Vec<EpochSummary>,
    pub best: Checkpoint,
}

impl TrainState {
    pub fn checkpoint_file(&self, config: &TrainConfig) -> CheckpointFile {
        CheckpointFile {
            config: config.clone(),
            step: self.best.step,
            a: self.best.adapter.a.clone(),
            b: self.best.adapter.b.clone(),
            val_loss: self.best.val_loss,
        }
    }
}

pub fn train(
    reference: &ToyPolicy,
    train_set: &[DpoItem],
    val_set: &[DpoItem],
    cfg: &TrainConfig,
) -> Result<TrainState, DpoError> {
    train_with_observer(reference, train_set, val_set, cfg, &mut |_| {})
}

fn eval_loss(
    reference: &ToyPolicy,
    adapter: &LowRankAdapter,
    set: &[DpoItem],
    beta: f64,
) -> Result<(f64, f64), DpoError> {
    let policy = AdaptedPolicy::new(reference, adapter)?;
    let out = dpo_loss(&policy, reference, &DpoBatch::new(set.to_vec()), beta)?;
    Ok((out.loss, out.mean_margin()))
}

/// Plain SGD on the adapter with gradient accumulation, the warmup-cosine
/// schedule, periodic validation, and best-by-validation checkpointing.
/// `observer` sees every log record as it is produced.
pub fn train_with_observer(
    reference: &ToyPolicy,
    train_set: &[DpoItem],
    val_set: &[DpoItem],
    cfg: &TrainConfig,
    observer: &mut dyn FnMut(&TrainLogRecord),
) -> Result<TrainState, DpoError> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(DpoError::EmptyDataset("train"));
    }
    if val_set.is_empty() {
        return Err(DpoError::EmptyDataset("validation"));
    }
    let vocab = reference.vocab_size;
    for item in train_set.iter().chain(val_set) {
        item.validate(vocab)?;
    }
    let total_steps = cfg.resolved_total_steps(train_set.len());
    let schedule = cfg.schedule(total_steps)?;

    let mut adapter = LowRankAdapter::init(
        vocab,
        cfg.rank,
        cfg.init_scale,
        &mut Rng::derive(cfg.seed, "dpo.adapter-init"),
    );
    let mut shuffle_rng = Rng::derive(cfg.seed, "dpo.shuffle");

    let (val0, _) = eval_loss(reference, &adapter, val_set, cfg.beta)?;
    if !val0.is_finite() {
        return Err(DpoError::NonFiniteLoss { step: 0 });
    }
    let mut state = TrainState {
        step: 0,
        total_steps,
        adapter: adapter.clone(),
        loss_history: Vec::new(),
        val_history: vec![(0, val0)],
        log: Vec::new(),
        epochs: Vec::new(),
        best: Checkpoint {
            step: 0,
            val_loss: val0,
            adapter: adapter.clone(),
        },
    };

    let mut step = 0;
    'epochs: for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        shuffle_rng.shuffle(&mut order);
        for batch_idx in order.chunks(cfg.global_batch) {
            if step >= total_steps {
                break 'epochs;
            }
            let batch_len = batch_idx.len() as f64;
            let mut grad_a = Matrix::zeros(vocab, cfg.rank);
            let mut grad_b = Matrix::zeros(vocab, cfg.rank);
            let mut batch_loss = 0.0;
            for micro in batch_idx.chunks(cfg.micro_batch) {
                let items = DpoBatch::new(micro.iter().map(|&i| train_set[i].clone()).collect());
                let policy = AdaptedPolicy::new(reference, &adapter)?;
                let (loss, grad) = dpo_grad(&policy, reference, &items, cfg.beta)?;
                let weight = micro.len() as f64 / batch_len;
                batch_loss += weight * loss.loss;
                grad_a.axpy(weight, &grad.a);
                grad_b.axpy(weight, &grad.b);
            }
            step += 1;
            if !batch_loss.is_finite() || !grad_a.is_finite() || !grad_b.is_finite() {
                return Err(DpoError::NonFiniteLoss { step });
            }
            let lr = schedule.lr_at(step)?;
            adapter.a.axpy(-lr, &grad_a);
            adapter.b.axpy(-lr, &grad_b);
            if !adapter.a.is_finite() || !adapter.b.is_finite() {
                return Err(DpoError::NonFiniteLoss { step });
            }

            let val_loss = if step % cfg.eval_every == 0 || step == total_steps {
                Some(validate_step(reference, &adapter, val_set, cfg, step, &mut state)?)
            } else {
                None
            };
            let record = TrainLogRecord {
                step,
                lr,
                train_loss: batch_loss,
                val_loss,
            };
            observer(&record);
            state.loss_history.push((step, batch_loss));
            state.log.push(record);
        }
        let (loss, margin) = eval_loss(reference, &adapter, train_set, cfg.beta)?;
        state.epochs.push(EpochSummary {
            epoch,
            step,
            train_loss: loss,
            mean_margin: margin,
        });
    }
    if state.val_history.last().map(|v| v.0) != Some(step) {
        validate_step(reference, &adapter, val_set, cfg, step, &mut state)?;
    }
    state.step = step;
    state.adapter = adapter;
    Ok(state)
}

fn validate_step(
    reference: &ToyPolicy,
    adapter: &LowRankAdapter,
    val_set: &[DpoItem],
    cfg: &TrainConfig,
    step: usize,
    state: &mut TrainState,
) -> Result<f64, DpoError> {
    let (val, _) = eval_loss(reference, adapter, val_set, cfg.beta)?;
    if !val.is_finite() {
        return Err(DpoError::NonFiniteLoss { step });
    }
    state.val_history.push((step, val));
    if val < state.best.val_loss {
        state.best = Checkpoint {
            step,
            val_loss: val,
            adapter: adapter.clone(),
        };
    }
    Ok(val)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jsonl::to_canonical_string;

    fn item(prompt: &[usize], chosen: &[usize], rejected: &[usize]) -> DpoItem {
        DpoItem { prompt: prompt.to_vec(), chosen: chosen.to_vec(), rejected: rejected.to_vec() }
    }

    fn quick_cfg() -> TrainConfig {
        TrainConfig {
            beta: 0.1,
            peak_lr: 5.0,
            min_lr: None,
            warmup_steps: 2,
            total_steps: None,
            epochs: 200,
            micro_batch: 1,
            global_batch: 1,
            eval_every: 10,
            seed: 7,
            rank: 2,
            init_scale: 0.1,
        }
    }

    #[test]
    fn single_preference_is_overfit() {
        let reference = ToyPolicy::uniform(4);
        let data = vec![item(&[0], &[1, 2, 1, 2], &[3, 3, 3, 3])];
        let state = train(&reference, &data, &data, &quick_cfg()).unwrap();
        let final_loss = state.loss_history.last().unwrap().1;
        assert!(final_loss < 0.1, "final loss {final_loss}");
        assert!(state.best.val_loss < 0.1);
    }

    #[test]
    fn zero_lr_is_a_null_update() {
        let reference = ToyPolicy::uniform(4);
        let data = vec![item(&[0], &[1, 2], &[3, 3]), item(&[1], &[2], &[0])];
        let cfg = TrainConfig { peak_lr: 0.0, min_lr: Some(0.0), epochs: 3, ..quick_cfg() };
        let state = train(&reference, &data, &data, &cfg).unwrap();
        let init = LowRankAdapter::init(4, 2, 0.1, &mut Rng::derive(7, "dpo.adapter-init"));
        assert_eq!(state.adapter, init);
        let first = state.loss_history[0].1;
        assert!(state.loss_history.iter().all(|&(_, l)| l == first));
        assert_eq!(first, std::f64::consts::LN_2);
    }

    #[test]
    fn deterministic_history() {
        let reference = ToyPolicy::uniform(5);
        let data: Vec<DpoItem> = (0..12).map(|i| item(&[i % 5], &[1, 2], &[3, 4, i % 5])).collect();
        let cfg = TrainConfig { epochs: 3, global_batch: 4, micro_batch: 2, ..quick_cfg() };
        let a = train(&reference, &data, &data[..4], &cfg).unwrap();
        let b = train(&reference, &data, &data[..4], &cfg).unwrap();
        assert_eq!(to_canonical_string(&a.log).unwrap(), to_canonical_string(&b.log).unwrap());
        assert_eq!(a.log.len(), 9);
    }

    #[test]
    fn best_checkpoint_is_min_validation() {
        let reference = ToyPolicy::uniform(4);
        let data = vec![item(&[0], &[1, 2], &[3, 3]), item(&[2], &[1], &[0])];
        let state = train(&reference, &data, &data, &TrainConfig { epochs: 20, ..quick_cfg() }).unwrap();
        let min = state.val_history.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
        assert_eq!(state.best.val_loss, min);
    }

    #[test]
    fn divergent_lr_reports_step() {
        let reference = ToyPolicy::uniform(4);
        let data = vec![item(&[0], &[1, 2, 1, 2, 1], &[3, 3, 3, 3, 3])];
        let cfg = TrainConfig { peak_lr: f64::MAX, min_lr: Some(f64::MAX), warmup_steps: 0, beta: 1.0, init_scale: 1.0, ..quick_cfg() };
        match train(&reference, &data, &data, &cfg) {
            Err(DpoError::NonFiniteLoss { step }) => assert!(step >= 1),
            other => panic!("expected divergence, got {:?}", other.map(|s| s.step)),
        }
    }

    #[test]
    fn config_errors() {
        let reference = ToyPolicy::uniform(4);
        let data = vec![item(&[0], &[1], &[2])];
        assert!(matches!(train(&reference, &[], &data, &quick_cfg()), Err(DpoError::EmptyDataset("train"))));
        assert!(matches!(train(&reference, &data, &[], &quick_cfg()), Err(DpoError::EmptyDataset("validation"))));
        let cfg = TrainConfig { global_batch: 3, micro_batch: 2, ..quick_cfg() };
        assert!(matches!(train(&reference, &data, &data, &cfg), Err(DpoError::InvalidConfig(_))));
        let cfg = TrainConfig { warmup_steps: 10_000, epochs: 1, ..quick_cfg() };
        assert!(matches!(train(&reference, &data, &data, &cfg), Err(DpoError::InvalidConfig(_))));
    }

    #[test]
    fn reference_unchanged_by_training() {
        let reference = ToyPolicy::fit_bigram(&[&[0, 1, 2, 3][..]], 4, 1.0).unwrap();
        let before = to_canonical_string(&reference).unwrap();
        let data = vec![item(&[0], &[1, 2], &[3, 3])];
        train(&reference, &data, &data, &TrainConfig { epochs: 5, ..quick_cfg() }).unwrap();
        assert_eq!(before, to_canonical_string(&reference).unwrap());
    }
}
