//! Patch classification for diabetic foot ulcer detection.
//!
//! The crate covers the whole study pipeline: a small dense tensor type and
//! hand-written layer kernels, the DFUNet architecture (parallel 1×1/3×3/5×5
//! convolution blocks) and a LeNet baseline, Adam training with a step-down
//! learning-rate schedule, patch augmentation and preprocessing, classical
//! LBP/HOG/colour descriptors with an SMO-trained SVM, and ROC/AUC evaluation.

pub mod features;
pub mod layers;
pub mod metrics;
pub mod netzoo;
pub mod optim;
pub mod pipeline;
pub mod svm;
pub mod tensor;

pub use tensor::{matmul, Tensor, TensorError};
