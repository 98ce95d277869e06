//! Small deterministic numeric core.
//!
//! Everything is `f64`. Model code is written once against the [`Graph`]
//! trait and runs either eagerly ([`Eager`], for search and sampling) or on a
//! recorded [`Trace`] whose reverse pass yields exact gradients.

mod attention;
mod graph;
mod gru;
mod params;
mod softmax;
mod tensor;

pub use attention::{attention, AttentionParams};
pub use graph::{backprop_sequence, Eager, Graph, NodeId, Trace};
pub use gru::{gru_step, GruParams};
pub use params::{Grads, GruIds, ModelDims, ModelParams, ParamId};
pub use softmax::{log_softmax_masked, masked_softmax, softmax};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("mask has no valid entry")]
    EmptyMask,
    #[error("attention over an empty sequence")]
    EmptySequence,
}
