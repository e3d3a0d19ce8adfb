//! Dense networks with hand-written reverse-mode gradients.
//!
//! Everything is `f64` and row-major. A batch is a [`Matrix`] with one sample
//! per row.

mod adam;
mod matrix;
mod mlp;
mod policy;

pub use adam::{AdamConfig, AdamState};
pub use matrix::Matrix;
pub use mlp::{
    leaky_relu, Activation, ForwardCache, Gradients, Layer, LayerGrad, Mlp, NetworkDoc, LEAKY_SLOPE,
};
pub use policy::{
    squash_channel, ActionBounds, GaussianPolicyHead, SquashedSample, ACTION_DIM, LOG_STD_MAX,
    LOG_STD_MIN, TANH_EPS,
};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NnError {
    #[error("input has {got} columns, network expects {expected}")]
    InputDim { expected: usize, got: usize },
    #[error("non-finite value in network input at row {row}, column {col}")]
    NonFiniteInput { row: usize, col: usize },
    #[error("forward cache does not match this network or batch")]
    CacheMismatch,
    #[error("layer {index} expects {expected} inputs but previous layer yields {got}")]
    BrokenChain {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("layer {index} parameter array has {got} values, expected {expected}")]
    ParamLength {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("network has no layers")]
    Empty,
}
