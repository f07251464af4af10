use serde::{Deserialize, Serialize};

use super::{DpoError, TrainConfig};

/// Linear warmup to `peak_lr`, then half-cosine decay to `min_lr` at
/// `total_steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub peak_lr: f64,
    pub min_lr: f64,
    pub warmup_steps: usize,
    pub total_steps: usize,
}

impl LrSchedule {
    pub fn new(peak_lr: f64, min_lr: f64, warmup_steps: usize, total_steps: usize) -> Result<Self, DpoError> {
        if !(peak_lr >= 0.0 && min_lr >= 0.0 && min_lr <= peak_lr) {
            return Err(DpoError::InvalidConfig(format!(
                "need 0 <= min_lr ({min_lr}) <= peak_lr ({peak_lr})"
            )));
        }
        if warmup_steps > total_steps {
            return Err(DpoError::InvalidConfig(format!(
                "warmup_steps {warmup_steps} exceeds total_steps {total_steps}"
            )));
        }
        Ok(Self {
            peak_lr,
            min_lr,
            warmup_steps,
            total_steps,
        })
    }

    pub fn lr_at(&self, step: usize) -> Result<f64, DpoError> {
        if step > self.total_steps {
            return Err(DpoError::StepOutOfRange {
                step,
                total: self.total_steps,
            });
        }
        if step < self.warmup_steps {
            return Ok(self.peak_lr * step as f64 / self.warmup_steps as f64);
        }
        let span = self.total_steps - self.warmup_steps;
        if span == 0 {
            return Ok(if step == self.total_steps && self.total_steps > 0 { self.min_lr } else { self.peak_lr });
        }
        let progress = (step - self.warmup_steps) as f64 / span as f64;
        Ok(self.min_lr
            + 0.5 * (self.peak_lr - self.min_lr) * (1.0 + (std::f64::consts::PI * progress).cos()))
    }
}

/// Learning rate at `step` for a config whose `total_steps` is set.
pub fn lr_at(cfg: &TrainConfig, step: usize) -> Result<f64, DpoError> {
    let total = cfg
        .total_steps
        .ok_or_else(|| DpoError::InvalidConfig("total_steps is not set".into()))?;
    cfg.schedule(total)?.lr_at(step)
}
