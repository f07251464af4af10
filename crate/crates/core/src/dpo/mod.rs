//! Direct Preference Optimization on a desk-scale bigram policy.
//!
//! The trainable policy is a frozen bigram model plus a low-rank delta on its
//! transition logits. The loss is the standard DPO objective
//!
//! ```text
//! L = -mean log σ( β · [(log π(y_w|x) - log π_ref(y_w|x)) - (log π(y_l|x) - log π_ref(y_l|x))] )
//! ```
//!
//! and its gradient with respect to the adapter factors is computed
//! analytically.

mod loss;
mod matrix;
mod policy;
mod schedule;
mod tokenize;
mod train;

pub use loss::{dpo_grad, dpo_loss, log_sigmoid, AdapterGrad, DpoBatch, DpoItem, DpoLoss};
pub use matrix::Matrix;
pub use policy::{seq_logprob, AdaptedPolicy, LogitModel, LowRankAdapter, ToyPolicy};
pub use schedule::{lr_at, LrSchedule};
pub use tokenize::{Alphabet, DEFAULT_ALPHABET};
pub use train::{
    train, train_with_observer, Checkpoint, CheckpointFile, EpochSummary, TrainConfig,
    TrainLogRecord, TrainState,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DpoError {
    #[error("token {token} out of range for vocabulary of {vocab}")]
    TokenOutOfRange { token: usize, vocab: usize },
    #[error("response is empty")]
    EmptyResponse,
    #[error("batch is empty")]
    EmptyBatch,
    #[error("vocabulary mismatch: policy {policy}, reference {reference}")]
    VocabMismatch { policy: usize, reference: usize },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("step {step} outside schedule range 0..={total}")]
    StepOutOfRange { step: usize, total: usize },
    #[error("non-finite loss at step {step}; lower the learning rate or beta")]
    NonFiniteLoss { step: usize },
    #[error("{0} set is empty")]
    EmptyDataset(&'static str),
    #[error("invalid alphabet: {0}")]
    Alphabet(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
}
