use serde::{Deserialize, Serialize};

use super::LayerError;
use crate::tensor::{gemm, Mat};
use crate::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FcSpec {
    pub in_units: usize,
    pub out_units: usize,
}

impl FcSpec {
    pub fn weight_shape(&self) -> [usize; 2] {
        [self.out_units, self.in_units]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FcGrads {
    pub grad_x: Tensor,
    pub grad_w: Tensor,
    pub grad_b: Tensor,
}

/// Interprets `x` as a batch: rank 1 is a single sample, otherwise the
/// leading axis is the batch and trailing axes are flattened.
fn batch_dims(x: &Tensor, spec: &FcSpec) -> Result<(usize, usize), LayerError> {
    let (n, d) = match x.shape() {
        [d] => (1, *d),
        [n, rest @ ..] => (*n, rest.iter().product()),
        [] => unreachable!("tensor rank >= 1"),
    };
    if d != spec.in_units {
        return Err(LayerError::Shape {
            context: "fc input units",
            expected: vec![n, spec.in_units],
            got: x.shape().to_vec(),
        });
    }
    Ok((n, d))
}

fn check_params(spec: &FcSpec, weights: &Tensor, bias: Option<&Tensor>) -> Result<(), LayerError> {
    if weights.shape() != spec.weight_shape() {
        return Err(LayerError::Shape {
            context: "fc weights",
            expected: spec.weight_shape().to_vec(),
            got: weights.shape().to_vec(),
        });
    }
    if let Some(b) = bias {
        if b.shape() != [spec.out_units] {
            return Err(LayerError::Shape {
                context: "fc bias",
                expected: vec![spec.out_units],
                got: b.shape().to_vec(),
            });
        }
    }
    Ok(())
}

/// `y = W·x + b` per sample. Rank-1 input yields rank-1 output, otherwise `N×out`.
pub fn fully_connected(x: &Tensor, spec: &FcSpec, weights: &Tensor, bias: &Tensor) -> Result<Tensor, LayerError> {
    check_params(spec, weights, Some(bias))?;
    let (n, d) = batch_dims(x, spec)?;
    let o = spec.out_units;
    let mut y: Vec<f64> = (0..n).flat_map(|_| bias.data().iter().copied()).collect();
    gemm(
        Mat::row_major(x.data(), n, d),
        Mat::row_major(weights.data(), o, d).t(),
        &mut y,
        1.0,
    );
    let shape: &[usize] = if x.rank() == 1 { &[o] } else { &[n, o] };
    Ok(Tensor::new(shape, y)?)
}

/// `grad_x = Wᵀ·g`, `grad_W = g·xᵀ`, `grad_b = g`, summed over the batch.
pub fn fc_backward(x: &Tensor, spec: &FcSpec, weights: &Tensor, grad_out: &Tensor) -> Result<FcGrads, LayerError> {
    check_params(spec, weights, None)?;
    let (n, d) = batch_dims(x, spec)?;
    let o = spec.out_units;
    if grad_out.len() != n * o {
        return Err(LayerError::Shape {
            context: "fc grad_out",
            expected: vec![n, o],
            got: grad_out.shape().to_vec(),
        });
    }
    let g = Mat::row_major(grad_out.data(), n, o);
    let mut grad_x = vec![0.0; n * d];
    gemm(g, Mat::row_major(weights.data(), o, d), &mut grad_x, 0.0);
    let mut grad_w = vec![0.0; o * d];
    gemm(g.t(), Mat::row_major(x.data(), n, d), &mut grad_w, 0.0);
    let mut grad_b = vec![0.0; o];
    for row in grad_out.data().chunks(o) {
        for (b, v) in grad_b.iter_mut().zip(row) {
            *b += v;
        }
    }
    Ok(FcGrads {
        grad_x: Tensor::new(x.shape(), grad_x)?,
        grad_w: Tensor::new(weights.shape(), grad_w)?,
        grad_b: Tensor::new(&[o], grad_b)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::gradcheck;

    #[test]
    fn identity_weights() {
        let spec = FcSpec {
            in_units: 3,
            out_units: 3,
        };
        let mut w = vec![0.0; 9];
        for i in 0..3 {
            w[i * 4] = 1.0;
        }
        let w = Tensor::new(&[3, 3], w).unwrap();
        let x = Tensor::new(&[3], vec![1.5, -2.0, 0.25]).unwrap();
        assert_eq!(
            fully_connected(&x, &spec, &w, &Tensor::zeros(&[3]).unwrap()).unwrap(),
            x
        );
    }

    #[test]
    fn small_affine() {
        let spec = FcSpec {
            in_units: 2,
            out_units: 2,
        };
        let w = Tensor::new(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let x = Tensor::new(&[2], vec![1.0, 1.0]).unwrap();
        let y = fully_connected(&x, &spec, &w, &Tensor::zeros(&[2]).unwrap()).unwrap();
        assert_eq!(y.data(), &[3.0, 7.0]);
    }

    #[test]
    fn two_layer_widths() {
        let fc1 = FcSpec {
            in_units: 224,
            out_units: 100,
        };
        let fc2 = FcSpec {
            in_units: 100,
            out_units: 2,
        };
        let x = Tensor::new(&[1, 224, 1, 1], 0.1).unwrap();
        let h = fully_connected(
            &x,
            &fc1,
            &Tensor::zeros(&fc1.weight_shape()).unwrap(),
            &Tensor::zeros(&[100]).unwrap(),
        )
        .unwrap();
        assert_eq!(h.shape(), &[1, 100]);
        let y = fully_connected(
            &h,
            &fc2,
            &Tensor::zeros(&fc2.weight_shape()).unwrap(),
            &Tensor::zeros(&[2]).unwrap(),
        )
        .unwrap();
        assert_eq!(y.shape(), &[1, 2]);
    }

    #[test]
    fn rejects_length_mismatch() {
        let spec = FcSpec {
            in_units: 4,
            out_units: 2,
        };
        let w = Tensor::zeros(&[2, 4]).unwrap();
        let b = Tensor::zeros(&[2]).unwrap();
        assert!(fully_connected(&Tensor::zeros(&[3]).unwrap(), &spec, &w, &b).is_err());
    }

    #[test]
    fn matches_finite_differences() {
        let spec = FcSpec {
            in_units: 6,
            out_units: 3,
        };
        let x = gradcheck::random(&[4, 6, 1, 1], 60);
        let w = gradcheck::random(&[3, 6], 61);
        let b = gradcheck::random(&[3], 62);
        let proj = gradcheck::random(&[4, 3], 63);
        let g = fc_backward(&x, &spec, &w, &proj).unwrap();
        let f =
            |x: &Tensor, w: &Tensor, b: &Tensor| gradcheck::project(&fully_connected(x, &spec, w, b).unwrap(), &proj);
        gradcheck::assert_close(g.grad_x.data(), &gradcheck::numeric(&x, |x| f(x, &w, &b)));
        gradcheck::assert_close(g.grad_w.data(), &gradcheck::numeric(&w, |w| f(&x, w, &b)));
        gradcheck::assert_close(g.grad_b.data(), &gradcheck::numeric(&b, |b| f(&x, &w, b)));
        assert_eq!(g.grad_x.shape(), x.shape());
    }
}
