//! Forward and backward passes for every layer kind used by the networks in
//! [`crate::netzoo`].
//!
//! Every function is pure: inputs are borrowed, outputs are fresh tensors.
//! Batch gradients (weights, biases) are accumulated over samples in index
//! order so results are bit-reproducible.

mod activation;
mod concat;
mod conv;
mod fc;
mod lrn;
mod pool;
mod softmax;

pub use activation::{relu, relu_backward};
pub use concat::{concat_channels, split_channels};
pub use conv::{conv2d_backward, conv2d_forward, ConvGrads, ConvSpec};
pub use fc::{fc_backward, fully_connected, FcGrads, FcSpec};
pub use lrn::{lrn_backward, lrn_forward, LrnParams};
pub use pool::{pool_backward, pool_forward, PoolIndex, PoolMode, PoolSpec, Rounding};
pub use softmax::{softmax, softmax_cross_entropy, softmax_cross_entropy_batch, BatchLoss, SoftmaxLoss};

use thiserror::Error;

use crate::tensor::TensorError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LayerError {
    #[error("{context}: expected shape {expected:?}, got {got:?}")]
    Shape {
        context: &'static str,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("invalid layer configuration: {0}")]
    InvalidSpec(String),
    #[error("output extent would be < 1 (input {input}, kernel {kernel}, stride {stride}, pad {pad})")]
    OutputTooSmall {
        input: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
    },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("max-pool backward needs the index map from the matching forward call")]
    StaleIndexMap,
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

pub(crate) fn expect_rank4(x: &crate::Tensor, context: &'static str) -> Result<[usize; 4], LayerError> {
    match *x.shape() {
        [n, c, h, w] => Ok([n, c, h, w]),
        _ => Err(LayerError::Shape {
            context,
            expected: vec![0, 0, 0, 0],
            got: x.shape().to_vec(),
        }),
    }
}
