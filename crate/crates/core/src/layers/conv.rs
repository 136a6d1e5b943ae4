use serde::{Deserialize, Serialize};

use super::{expect_rank4, LayerError};
use crate::tensor::{gemm, Mat};
use crate::Tensor;

/// Upper bound on im2col buffer entries; larger batches are processed in
/// sample chunks.
const COL_BUDGET: usize = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvSpec {
    pub fn new(in_channels: usize, out_channels: usize, kernel: usize, stride: usize, pad: usize) -> Self {
        ConvSpec {
            in_channels,
            out_channels,
            kernel,
            stride,
            pad,
        }
    }

    /// Stride 1 with `(k-1)/2` padding: preserves spatial extent for odd `k`.
    pub fn same(in_channels: usize, out_channels: usize, kernel: usize) -> Self {
        Self::new(in_channels, out_channels, kernel, 1, (kernel - 1) / 2)
    }

    pub fn validate(&self) -> Result<(), LayerError> {
        if self.in_channels == 0 || self.out_channels == 0 || self.kernel == 0 || self.stride == 0 {
            return Err(LayerError::InvalidSpec(format!("{self:?}")));
        }
        Ok(())
    }

    pub fn output_extent(&self, input: usize) -> Result<usize, LayerError> {
        let padded = input + 2 * self.pad;
        if padded < self.kernel {
            return Err(LayerError::OutputTooSmall {
                input,
                kernel: self.kernel,
                stride: self.stride,
                pad: self.pad,
            });
        }
        Ok((padded - self.kernel) / self.stride + 1)
    }

    pub fn weight_shape(&self) -> [usize; 4] {
        [self.out_channels, self.in_channels, self.kernel, self.kernel]
    }

    /// Number of rows of the unrolled patch matrix, `C·k·k`.
    fn patch_len(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads {
    pub grad_x: Tensor,
    pub grad_w: Tensor,
    pub grad_b: Tensor,
}

struct Geometry {
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    ho: usize,
    wo: usize,
}

impl Geometry {
    fn out_plane(&self) -> usize {
        self.ho * self.wo
    }

    fn chunk(&self, spec: &ConvSpec) -> usize {
        (COL_BUDGET / (spec.patch_len() * self.out_plane()).max(1)).clamp(1, self.n)
    }
}

fn check(x: &Tensor, spec: &ConvSpec, weights: &Tensor) -> Result<Geometry, LayerError> {
    spec.validate()?;
    let [n, c, h, w] = expect_rank4(x, "conv input")?;
    if c != spec.in_channels {
        return Err(LayerError::Shape {
            context: "conv input channels",
            expected: vec![n, spec.in_channels, h, w],
            got: x.shape().to_vec(),
        });
    }
    if weights.shape() != spec.weight_shape() {
        return Err(LayerError::Shape {
            context: "conv weights",
            expected: spec.weight_shape().to_vec(),
            got: weights.shape().to_vec(),
        });
    }
    let ho = spec.output_extent(h)?;
    let wo = spec.output_extent(w)?;
    Ok(Geometry { n, c, h, w, ho, wo })
}

/// Unrolls one sample into columns `[offset, offset + ho·wo)` of `col`,
/// a row-major `(C·k·k) × ncols` matrix.
fn im2col(sample: &[f64], g: &Geometry, spec: &ConvSpec, col: &mut [f64], ncols: usize, offset: usize) {
    let k = spec.kernel;
    for ci in 0..g.c {
        let plane = &sample[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for ky in 0..k {
            for kx in 0..k {
                let row = (ci * k + ky) * k + kx;
                let dst = &mut col[row * ncols + offset..row * ncols + offset + g.out_plane()];
                for oy in 0..g.ho {
                    let iy = (oy * spec.stride + ky) as isize - spec.pad as isize;
                    let line = &mut dst[oy * g.wo..(oy + 1) * g.wo];
                    if iy < 0 || iy >= g.h as isize {
                        line.fill(0.0);
                        continue;
                    }
                    let src = &plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    for (ox, v) in line.iter_mut().enumerate() {
                        let ix = (ox * spec.stride + kx) as isize - spec.pad as isize;
                        *v = if ix < 0 || ix >= g.w as isize {
                            0.0
                        } else {
                            src[ix as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters columns back, accumulating into `sample`.
fn col2im(col: &[f64], g: &Geometry, spec: &ConvSpec, ncols: usize, offset: usize, sample: &mut [f64]) {
    let k = spec.kernel;
    for ci in 0..g.c {
        let plane = &mut sample[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for ky in 0..k {
            for kx in 0..k {
                let row = (ci * k + ky) * k + kx;
                let src = &col[row * ncols + offset..row * ncols + offset + g.out_plane()];
                for oy in 0..g.ho {
                    let iy = (oy * spec.stride + ky) as isize - spec.pad as isize;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    for ox in 0..g.wo {
                        let ix = (ox * spec.stride + kx) as isize - spec.pad as isize;
                        if ix >= 0 && ix < g.w as isize {
                            dst[ix as usize] += src[oy * g.wo + ox];
                        }
                    }
                }
            }
        }
    }
}

/// Zero-padded cross-correlation (no kernel flip).
pub fn conv2d_forward(x: &Tensor, spec: &ConvSpec, weights: &Tensor, bias: &Tensor) -> Result<Tensor, LayerError> {
    let g = check(x, spec, weights)?;
    if bias.shape() != [spec.out_channels] {
        return Err(LayerError::Shape {
            context: "conv bias",
            expected: vec![spec.out_channels],
            got: bias.shape().to_vec(),
        });
    }
    let o = spec.out_channels;
    let plane = g.out_plane();
    let in_len = g.c * g.h * g.w;
    let mut y = vec![0.0; g.n * o * plane];
    let chunk = g.chunk(spec);
    let mut col = vec![0.0; spec.patch_len() * chunk * plane];
    let mut prod = vec![0.0; o * chunk * plane];

    for start in (0..g.n).step_by(chunk) {
        let nc = chunk.min(g.n - start);
        let ncols = nc * plane;
        for s in 0..nc {
            let idx = start + s;
            im2col(
                &x.data()[idx * in_len..(idx + 1) * in_len],
                &g,
                spec,
                &mut col,
                ncols,
                s * plane,
            );
        }
        gemm(
            Mat::row_major(weights.data(), o, spec.patch_len()),
            Mat::row_major(&col, spec.patch_len(), ncols),
            &mut prod,
            0.0,
        );
        for s in 0..nc {
            for oc in 0..o {
                let b = bias.data()[oc];
                let src = &prod[oc * ncols + s * plane..oc * ncols + (s + 1) * plane];
                let dst = &mut y[((start + s) * o + oc) * plane..((start + s) * o + oc + 1) * plane];
                for (d, v) in dst.iter_mut().zip(src) {
                    *d = v + b;
                }
            }
        }
    }
    Ok(Tensor::new(&[g.n, o, g.ho, g.wo], y)?)
}

pub fn conv2d_backward(
    x: &Tensor,
    spec: &ConvSpec,
    weights: &Tensor,
    grad_out: &Tensor,
) -> Result<ConvGrads, LayerError> {
    let g = check(x, spec, weights)?;
    let o = spec.out_channels;
    let expected = [g.n, o, g.ho, g.wo];
    if grad_out.shape() != expected {
        return Err(LayerError::Shape {
            context: "conv grad_out",
            expected: expected.to_vec(),
            got: grad_out.shape().to_vec(),
        });
    }
    let plane = g.out_plane();
    let in_len = g.c * g.h * g.w;
    let patch = spec.patch_len();
    let chunk = g.chunk(spec);

    let mut grad_x = vec![0.0; x.len()];
    let mut grad_w = vec![0.0; weights.len()];
    let mut grad_b = vec![0.0; o];
    let mut col = vec![0.0; patch * chunk * plane];
    let mut gcol = vec![0.0; patch * chunk * plane];
    let mut gout = vec![0.0; o * chunk * plane];

    for start in (0..g.n).step_by(chunk) {
        let nc = chunk.min(g.n - start);
        let ncols = nc * plane;
        for s in 0..nc {
            let idx = start + s;
            im2col(
                &x.data()[idx * in_len..(idx + 1) * in_len],
                &g,
                spec,
                &mut col,
                ncols,
                s * plane,
            );
            for oc in 0..o {
                let src = &grad_out.data()[(idx * o + oc) * plane..(idx * o + oc + 1) * plane];
                gout[oc * ncols + s * plane..oc * ncols + (s + 1) * plane].copy_from_slice(src);
                grad_b[oc] += src.iter().sum::<f64>();
            }
        }
        let gout_m = Mat::row_major(&gout, o, ncols);
        // grad_w += gout · colᵀ
        gemm(gout_m, Mat::row_major(&col, patch, ncols).t(), &mut grad_w, 1.0);
        // gcol = wᵀ · gout
        gemm(Mat::row_major(weights.data(), o, patch).t(), gout_m, &mut gcol, 0.0);
        for s in 0..nc {
            let idx = start + s;
            col2im(
                &gcol,
                &g,
                spec,
                ncols,
                s * plane,
                &mut grad_x[idx * in_len..(idx + 1) * in_len],
            );
        }
    }

    Ok(ConvGrads {
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
    fn dfunet_stem_conv_shape() {
        let spec = ConvSpec::new(3, 64, 7, 2, 3);
        assert_eq!(spec.output_extent(224).unwrap(), 112);
        let x = Tensor::zeros(&[1, 3, 224, 224]).unwrap();
        let w = Tensor::zeros(&spec.weight_shape()).unwrap();
        let b = Tensor::zeros(&[64]).unwrap();
        assert_eq!(conv2d_forward(&x, &spec, &w, &b).unwrap().shape(), &[1, 64, 112, 112]);
    }

    #[test]
    fn identity_one_by_one() {
        let x = gradcheck::random(&[2, 1, 3, 4], 1);
        let spec = ConvSpec::new(1, 1, 1, 1, 0);
        let w = Tensor::new(&[1, 1, 1, 1], 1.0).unwrap();
        let b = Tensor::zeros(&[1]).unwrap();
        assert_eq!(conv2d_forward(&x, &spec, &w, &b).unwrap(), x);
        let g = gradcheck::random(&[2, 1, 3, 4], 2);
        assert_eq!(conv2d_backward(&x, &spec, &w, &g).unwrap().grad_x, g);
    }

    #[test]
    fn window_sums() {
        let x = Tensor::new(&[1, 1, 3, 3], (1..=9).map(f64::from).collect::<Vec<_>>()).unwrap();
        let spec = ConvSpec::new(1, 1, 2, 1, 0);
        let w = Tensor::new(&[1, 1, 2, 2], 1.0).unwrap();
        let b = Tensor::zeros(&[1]).unwrap();
        let y = conv2d_forward(&x, &spec, &w, &b).unwrap();
        assert_eq!(y.data(), &[12.0, 16.0, 24.0, 28.0]);

        // grad_w[i][j] under an all-ones upstream gradient is the sum of the
        // inputs the tap (i, j) sees: 1+2+4+5, 2+3+5+6, 4+5+7+8, 5+6+8+9.
        let ones = Tensor::new(&[1, 1, 2, 2], 1.0).unwrap();
        let grads = conv2d_backward(&x, &spec, &w, &ones).unwrap();
        assert_eq!(grads.grad_w.data(), &[12.0, 16.0, 24.0, 28.0]);
        assert_eq!(grads.grad_b.data(), &[4.0]);
        let numeric = gradcheck::numeric(&w, |w| {
            gradcheck::project(&conv2d_forward(&x, &spec, w, &b).unwrap(), &ones)
        });
        gradcheck::assert_close(grads.grad_w.data(), &numeric);
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let spec = ConvSpec::new(2, 3, 3, 1, 1);
        let x = gradcheck::random(&[2, 2, 4, 4], 3);
        let w = gradcheck::random(&spec.weight_shape(), 4);
        let g = conv2d_backward(&x, &spec, &w, &Tensor::zeros(&[2, 3, 4, 4]).unwrap()).unwrap();
        assert_eq!(g.grad_x.max_abs() + g.grad_w.max_abs() + g.grad_b.max_abs(), 0.0);
    }

    #[test]
    fn same_padding_preserves_extent() {
        for k in [1, 3, 5, 7] {
            let spec = ConvSpec::same(1, 1, k);
            for h in [1, 4, 9, 28] {
                assert_eq!(spec.output_extent(h).unwrap(), h);
            }
        }
    }

    #[test]
    fn rejects_mismatches() {
        let spec = ConvSpec::new(3, 2, 3, 1, 0);
        let w = Tensor::zeros(&spec.weight_shape()).unwrap();
        let b = Tensor::zeros(&[2]).unwrap();
        assert!(conv2d_forward(&Tensor::zeros(&[1, 2, 5, 5]).unwrap(), &spec, &w, &b).is_err());
        assert!(matches!(
            conv2d_forward(&Tensor::zeros(&[1, 3, 2, 2]).unwrap(), &spec, &w, &b),
            Err(LayerError::OutputTooSmall { .. })
        ));
        let x = Tensor::zeros(&[1, 3, 5, 5]).unwrap();
        assert!(conv2d_backward(&x, &spec, &w, &Tensor::zeros(&[1, 2, 2, 2]).unwrap()).is_err());
    }

    #[test]
    fn strided_padded_gradients_match_finite_differences() {
        let spec = ConvSpec::new(2, 3, 3, 2, 1);
        let x = gradcheck::random(&[2, 2, 5, 4], 10);
        let w = gradcheck::random(&spec.weight_shape(), 11);
        let b = gradcheck::random(&[3], 12);
        let y = conv2d_forward(&x, &spec, &w, &b).unwrap();
        let proj = gradcheck::random(y.shape(), 13);
        let grads = conv2d_backward(&x, &spec, &w, &proj).unwrap();
        let nx = gradcheck::numeric(&x, |x| {
            gradcheck::project(&conv2d_forward(x, &spec, &w, &b).unwrap(), &proj)
        });
        let nw = gradcheck::numeric(&w, |w| {
            gradcheck::project(&conv2d_forward(&x, &spec, w, &b).unwrap(), &proj)
        });
        let nb = gradcheck::numeric(&b, |b| {
            gradcheck::project(&conv2d_forward(&x, &spec, &w, b).unwrap(), &proj)
        });
        gradcheck::assert_close(grads.grad_x.data(), &nx);
        gradcheck::assert_close(grads.grad_w.data(), &nw);
        gradcheck::assert_close(grads.grad_b.data(), &nb);
    }
}
