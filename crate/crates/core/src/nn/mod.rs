//! Dense feed-forward networks with hand-written backpropagation.
//!
//! Networks are generic over [`Scalar`] (`f32` or `f64`). Layer weights are
//! stored `(out_dim, in_dim)`; batched tensors are `(batch, features)`.

mod mlp;
mod optim;
mod scalar;

pub use mlp::{soft_update, Dense, ForwardCache, Gradients, Mlp, OutputActivation};
pub use optim::{Optimizer, OptimizerKind};
pub use scalar::Scalar;

#[derive(Debug, thiserror::Error)]
pub enum NnError {
    #[error("invalid layer sizes {0:?}: need at least two entries, all positive")]
    InvalidLayerSizes(Vec<usize>),
    #[error("{what}: expected length {expected}, got {actual}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("architecture mismatch: {expected:?} vs {actual:?}")]
    ArchitectureMismatch {
        expected: Vec<usize>,
        actual: Vec<usize>,
    },
    #[error("non-finite gradient in layer {layer} ({tensor})")]
    NonFiniteGradient { layer: usize, tensor: &'static str },
    #[error("soft-update coefficient must lie in [0, 1], got {0}")]
    InvalidTau(f64),
    #[error("scaled-tanh bound must be positive and finite, got {0}")]
    InvalidBound(f64),
}
