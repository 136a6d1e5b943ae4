use serde::{Deserialize, Serialize};

use super::{expect_rank4, LayerError};
use crate::Tensor;

/// Cross-channel local response normalization:
///
/// `b_i = a_i / (k + alpha · Σ_{j=max(0,i-n/2)}^{min(N-1,i+n/2)} a_j²)^beta`
///
/// evaluated independently at each spatial position. `alpha` is applied to
/// the plain sum (not divided by `n`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrnParams {
    pub size: usize,
    pub k: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl Default for LrnParams {
    fn default() -> Self {
        LrnParams {
            size: 5,
            k: 2.0,
            alpha: 1e-4,
            beta: 0.75,
        }
    }
}

impl LrnParams {
    pub fn validate(&self) -> Result<(), LayerError> {
        let ok = self.size >= 1 && self.size % 2 == 1 && self.k > 0.0 && self.alpha >= 0.0 && self.beta > 0.0;
        if ok && self.k.is_finite() && self.alpha.is_finite() && self.beta.is_finite() {
            Ok(())
        } else {
            Err(LayerError::InvalidSpec(format!("{self:?}")))
        }
    }

    fn window(&self, i: usize, channels: usize) -> std::ops::RangeInclusive<usize> {
        let half = self.size / 2;
        i.saturating_sub(half)..=(i + half).min(channels - 1)
    }
}

/// `k + alpha·Σ a_j²` for every element.
fn scales(x: &Tensor, p: &LrnParams, [n, c, h, w]: [usize; 4]) -> Vec<f64> {
    let plane = h * w;
    let data = x.data();
    let mut out = vec![0.0; x.len()];
    for s in 0..n {
        let base = s * c * plane;
        for i in 0..c {
            let dst = &mut out[base + i * plane..base + (i + 1) * plane];
            dst.fill(0.0);
            for j in p.window(i, c) {
                let src = &data[base + j * plane..base + (j + 1) * plane];
                for (d, a) in dst.iter_mut().zip(src) {
                    *d += a * a;
                }
            }
            for d in dst.iter_mut() {
                *d = p.k + p.alpha * *d;
            }
        }
    }
    out
}

pub fn lrn_forward(x: &Tensor, p: &LrnParams) -> Result<Tensor, LayerError> {
    p.validate()?;
    let dims = expect_rank4(x, "lrn input")?;
    let s = scales(x, p, dims);
    let data = x
        .data()
        .iter()
        .zip(&s)
        .map(|(a, s)| a * s.powf(-p.beta))
        .collect::<Vec<_>>();
    Ok(Tensor::new(x.shape(), data)?)
}

/// `∂L/∂a_j = g_j·s_j^(-β) − 2αβ·a_j·Σ_{i: j ∈ window(i)} g_i·a_i·s_i^(-β-1)`;
/// the window relation is symmetric, so the inner sum runs over `window(j)`.
pub fn lrn_backward(x: &Tensor, p: &LrnParams, grad_out: &Tensor) -> Result<Tensor, LayerError> {
    p.validate()?;
    let [n, c, h, w] = expect_rank4(x, "lrn input")?;
    if grad_out.shape() != x.shape() {
        return Err(LayerError::Shape {
            context: "lrn grad_out",
            expected: x.shape().to_vec(),
            got: grad_out.shape().to_vec(),
        });
    }
    let s = scales(x, p, [n, c, h, w]);
    let a = x.data();
    let g = grad_out.data();
    // t_i = g_i · a_i · s_i^(-β-1)
    let t: Vec<f64> = (0..a.len()).map(|i| g[i] * a[i] * s[i].powf(-p.beta - 1.0)).collect();
    let plane = h * w;
    let mut grad = vec![0.0; a.len()];
    for sample in 0..n {
        let base = sample * c * plane;
        for j in 0..c {
            let row = base + j * plane;
            for q in 0..plane {
                let acc: f64 = p.window(j, c).map(|i| t[base + i * plane + q]).sum();
                let idx = row + q;
                grad[idx] = g[idx] * s[idx].powf(-p.beta) - 2.0 * p.alpha * p.beta * a[idx] * acc;
            }
        }
    }
    Ok(Tensor::new(x.shape(), grad)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::gradcheck;

    #[test]
    fn alpha_zero_is_identity() {
        let p = LrnParams {
            size: 5,
            k: 1.0,
            alpha: 0.0,
            beta: 0.6,
        };
        let x = gradcheck::random(&[1, 4, 2, 3], 40);
        assert_eq!(lrn_forward(&x, &p).unwrap(), x);
        let g = gradcheck::random(x.shape(), 41);
        assert_eq!(lrn_backward(&x, &p, &g).unwrap(), g);
    }

    #[test]
    fn single_channel_scalar() {
        let x = Tensor::new(&[1, 1, 1, 1], 2.0).unwrap();
        let y = lrn_forward(&x, &LrnParams::default()).unwrap();
        let expect = 2.0 * (2.0f64 + 1e-4 * 4.0).powf(-0.75);
        assert!((y.data()[0] - expect).abs() < 1e-15);
        // neighbourhood is clamped to channel 0 for any size
        let wide = LrnParams {
            size: 11,
            ..LrnParams::default()
        };
        assert_eq!(lrn_forward(&x, &wide).unwrap(), y);
    }

    #[test]
    fn zero_upstream() {
        let x = gradcheck::random(&[1, 3, 2, 2], 42);
        let g = lrn_backward(&x, &LrnParams::default(), &Tensor::zeros(&[1, 3, 2, 2]).unwrap()).unwrap();
        assert_eq!(g.max_abs(), 0.0);
    }

    #[test]
    fn rejects_bad_params() {
        let x = Tensor::zeros(&[1, 1, 1, 1]).unwrap();
        for p in [
            LrnParams {
                size: 4,
                ..Default::default()
            },
            LrnParams {
                k: 0.0,
                ..Default::default()
            },
            LrnParams {
                beta: 0.0,
                ..Default::default()
            },
            LrnParams {
                alpha: -1.0,
                ..Default::default()
            },
        ] {
            assert!(lrn_forward(&x, &p).is_err());
        }
    }

    #[test]
    fn matches_finite_differences() {
        // large alpha so the cross-channel term is not negligible
        let p = LrnParams {
            size: 3,
            k: 1.5,
            alpha: 0.3,
            beta: 0.75,
        };
        for (shape, seed) in [([2, 3, 2, 2], 43), ([1, 6, 2, 1], 44)] {
            let x = gradcheck::random(&shape, seed);
            let proj = gradcheck::random(&shape, seed + 100);
            let g = lrn_backward(&x, &p, &proj).unwrap();
            let n = gradcheck::numeric(&x, |x| gradcheck::project(&lrn_forward(x, &p).unwrap(), &proj));
            gradcheck::assert_close(g.data(), &n);
        }
    }
}
