use super::LayerError;
use crate::Tensor;

pub fn relu(x: &Tensor) -> Tensor {
    x.map(|v| v.max(0.0))
}

/// The subgradient at exactly zero is taken as 0.
pub fn relu_backward(x: &Tensor, grad_out: &Tensor) -> Result<Tensor, LayerError> {
    if x.shape() != grad_out.shape() {
        return Err(LayerError::Shape {
            context: "relu grad_out",
            expected: x.shape().to_vec(),
            got: grad_out.shape().to_vec(),
        });
    }
    let data = x
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&v, &g)| if v > 0.0 { g } else { 0.0 })
        .collect::<Vec<_>>();
    Ok(Tensor::new(x.shape(), data)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::gradcheck;

    #[test]
    fn thresholds_at_zero() {
        let x = Tensor::new(&[2], vec![-3.0, 2.0]).unwrap();
        assert_eq!(relu(&x).data(), &[0.0, 2.0]);
    }

    #[test]
    fn backward_masks() {
        let x = Tensor::new(&[3], vec![-1.0, 0.0, 5.0]).unwrap();
        let g = Tensor::new(&[3], vec![7.0; 3]).unwrap();
        assert_eq!(relu_backward(&x, &g).unwrap().data(), &[0.0, 0.0, 7.0]);
    }

    #[test]
    fn matches_finite_differences_away_from_zero() {
        let x = gradcheck::random(&[2, 3, 4, 4], 30).map(|v| if v.abs() < 1e-3 { 0.5 } else { v });
        let proj = gradcheck::random(x.shape(), 31);
        let g = relu_backward(&x, &proj).unwrap();
        let n = gradcheck::numeric(&x, |x| gradcheck::project(&relu(x), &proj));
        gradcheck::assert_close(g.data(), &n);
    }
}
