use super::LayerError;
use crate::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxLoss {
    pub probs: Vec<f64>,
    pub loss: f64,
    pub grad: Vec<f64>,
}

/// Max-subtracted softmax.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Probabilities, `-ln p[label]`, and `∂L/∂z = p - onehot(label)`.
pub fn softmax_cross_entropy(z: &[f64], label: usize) -> Result<SoftmaxLoss, LayerError> {
    if z.len() < 2 {
        return Err(LayerError::InvalidSpec(format!(
            "softmax needs >= 2 classes, got {}",
            z.len()
        )));
    }
    if label >= z.len() {
        return Err(LayerError::LabelOutOfRange {
            label,
            classes: z.len(),
        });
    }
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_total = z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    let probs = softmax(z);
    let loss = -(z[label] - max - log_total);
    let mut grad = probs.clone();
    grad[label] -= 1.0;
    Ok(SoftmaxLoss { probs, loss, grad })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchLoss {
    /// `N×K` class probabilities.
    pub probs: Tensor,
    /// Mean loss over the batch.
    pub loss: f64,
    /// Gradient of the mean loss with respect to the `N×K` logits.
    pub grad: Tensor,
}

pub fn softmax_cross_entropy_batch(logits: &Tensor, labels: &[usize]) -> Result<BatchLoss, LayerError> {
    let [n, k] = *logits.shape() else {
        return Err(LayerError::Shape {
            context: "softmax logits",
            expected: vec![labels.len(), 0],
            got: logits.shape().to_vec(),
        });
    };
    if labels.len() != n {
        return Err(LayerError::Shape {
            context: "softmax labels",
            expected: vec![n],
            got: vec![labels.len()],
        });
    }
    let mut probs = Vec::with_capacity(n * k);
    let mut grad = Vec::with_capacity(n * k);
    let mut loss = 0.0;
    for (row, &label) in logits.data().chunks(k).zip(labels) {
        let out = softmax_cross_entropy(row, label)?;
        loss += out.loss;
        probs.extend(out.probs);
        grad.extend(out.grad.into_iter().map(|g| g / n as f64));
    }
    Ok(BatchLoss {
        probs: Tensor::new(&[n, k], probs)?,
        loss: loss / n as f64,
        grad: Tensor::new(&[n, k], grad)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn symmetric_logits() {
        for label in 0..2 {
            let out = softmax_cross_entropy(&[0.0, 0.0], label).unwrap();
            assert_eq!(out.probs, vec![0.5, 0.5]);
            assert!((out.loss - std::f64::consts::LN_2).abs() < 1e-15);
        }
    }

    #[test]
    fn scalar_oracle() {
        let e = std::f64::consts::E;
        let out = softmax_cross_entropy(&[1.0, 0.0], 0).unwrap();
        assert!((out.probs[0] - e / (e + 1.0)).abs() < 1e-15);
        assert!((out.loss - (1.0 + 1.0 / e).ln()).abs() < 1e-15);
        assert!((out.probs[0] - 0.73106).abs() < 1e-5);
        assert!((out.loss - 0.31326).abs() < 1e-5);
    }

    #[test]
    fn label_out_of_range() {
        assert_eq!(
            softmax_cross_entropy(&[0.0, 1.0], 2),
            Err(LayerError::LabelOutOfRange { label: 2, classes: 2 })
        );
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let z = [0.3, -1.2, 2.0, 0.7];
        let out = softmax_cross_entropy(&z, 2).unwrap();
        for i in 0..z.len() {
            let h = 1e-6;
            let mut up = z;
            up[i] += h;
            let mut down = z;
            down[i] -= h;
            let numeric = (softmax_cross_entropy(&up, 2).unwrap().loss - softmax_cross_entropy(&down, 2).unwrap().loss)
                / (2.0 * h);
            assert!((numeric - out.grad[i]).abs() < 1e-8);
        }
    }

    proptest! {
        #[test]
        fn probabilities_are_a_distribution(z in proptest::collection::vec(-50.0f64..50.0, 2..8), c in -100.0f64..100.0) {
            let p = softmax(&z);
            prop_assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let shifted: Vec<f64> = z.iter().map(|v| v + c).collect();
            for (a, b) in p.iter().zip(softmax(&shifted)) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
