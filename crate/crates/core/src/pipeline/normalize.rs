use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::Tensor;

pub const NORMALIZER_EPSILON: f64 = 1e-8;

/// Per-position mean and population standard deviation of a training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub shape: Vec<usize>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub epsilon: f64,
}

/// Fits mean and std at every pixel-channel position. Sums are accumulated in
/// input order.
pub fn fit_normalizer<'a>(patches: impl IntoIterator<Item = &'a Tensor>) -> Result<Normalizer, PipelineError> {
    let mut it = patches.into_iter();
    let first = it
        .next()
        .ok_or_else(|| PipelineError::InvalidInput("normalizer fit set is empty".into()))?;
    let shape = first.shape().to_vec();
    let mut all = vec![first];
    for t in it {
        if t.shape() != shape {
            return Err(PipelineError::InvalidInput(format!(
                "patch shape {:?} differs from {shape:?}",
                t.shape()
            )));
        }
        all.push(t);
    }
    let n = all.len() as f64;
    let mut mean = vec![0.0; first.len()];
    for t in &all {
        for (m, &v) in mean.iter_mut().zip(t.data()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; first.len()];
    for t in &all {
        for ((s, &v), &m) in var.iter_mut().zip(t.data()).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let std = var.into_iter().map(|s| (s / n).sqrt()).collect();
    Ok(Normalizer {
        shape,
        mean,
        std,
        epsilon: NORMALIZER_EPSILON,
    })
}

/// `(x − mean) / (std + ε)` per position.
pub fn apply_normalizer(n: &Normalizer, patch: &Tensor) -> Result<Tensor, PipelineError> {
    if patch.shape() != n.shape {
        return Err(PipelineError::InvalidInput(format!(
            "patch shape {:?}, normalizer fitted on {:?}",
            patch.shape(),
            n.shape
        )));
    }
    let data = patch
        .data()
        .iter()
        .zip(&n.mean)
        .zip(&n.std)
        .map(|((&x, &m), &s)| (x - m) / (s + n.epsilon))
        .collect::<Vec<_>>();
    Ok(Tensor::new(&n.shape, data).expect("shape checked"))
}
