//! From-scratch neural network stack: tensors, exact-backprop layers, the
//! three-embedding-block conditioned classifier, Adam, and the
//! finite-difference gradient checker.
//!
//! Everything is generic over [`Scalar`] so training runs in `f32` while
//! the gradient-check oracles run in `f64`.

mod adam;
pub mod checkpoint;
mod gradcheck;
mod layers;
mod loss;
mod model;
mod tensor;

pub use adam::{adam_step, AdamParams, AdamState};
pub use gradcheck::{grad_check, GradCheckReport};
pub use layers::{
    film_backward, film_forward, maxpool2x2, maxpool2x2_backward, relu, relu_backward, BatchNorm,
    Conv2d, Dense,
};
pub use loss::{softmax_xent, softmax_xent_batch};
pub use model::{ConditioningMode, EmbeddingStack, Model, ModelConfig, ModelGrads, POOL_STAGES};
pub use tensor::{Scalar, Tensor};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("channel mismatch: kernel expects {expected}, input has {got}")]
    ChannelMismatch { expected: usize, got: usize },
    #[error("batch norm in train mode needs at least 2 values per channel, got {0}")]
    BatchTooSmall(usize),
    #[error("label {label} out of range for {n_classes} classes")]
    LabelOutOfRange { label: usize, n_classes: usize },
    #[error("non-finite gradient in parameter group {0}")]
    NonFiniteGradient(String),
    #[error("conditioned forward requires a conditioning input")]
    MissingConditioning,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
