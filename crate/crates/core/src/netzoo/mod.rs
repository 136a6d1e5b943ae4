//! Network architectures as data, their executor, and checkpoint files.

mod checkpoint;
mod exec;
mod init;
mod spec;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint, CheckpointError, MAGIC, VERSION,
};
pub use exec::{backward, forward, predict, Backward, ForwardCache};
pub use init::init_params;
pub use spec::{
    build_dfunet, build_dfunet_with, build_lenet, DfunetOptions, DfunetVariant, LayerSpec, NetworkSpec,
    ParallelConvSpec, ParamSlot, Shape,
};

use indexmap::IndexMap;
use thiserror::Error;

use crate::layers::LayerError;
use crate::Tensor;

/// Named parameter tensors in canonical (spec) order.
pub type Params = IndexMap<String, Tensor>;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("layer {layer}: {message}")]
    Spec { layer: usize, message: String },
    #[error("layer {layer}: {source}")]
    Layer {
        layer: usize,
        #[source]
        source: LayerError,
    },
    #[error("input {input:?} is smaller than the minimum spatial extent {min}")]
    InputTooSmall { min: usize, input: [usize; 3] },
    #[error("unknown architecture {0:?}")]
    UnknownArchitecture(String),
    #[error("missing or misshapen parameter {0:?}")]
    Param(String),
    #[error("input batch has shape {got:?}, network expects [N, {expected:?}]")]
    Input { expected: [usize; 3], got: Vec<usize> },
}
