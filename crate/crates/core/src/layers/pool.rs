use serde::{Deserialize, Serialize};

use super::{expect_rank4, LayerError};
use crate::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolMode {
    Max,
    Average,
}

/// Output-extent rounding. `Ceil` admits a trailing partial window, which is
/// clamped to the input boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rounding {
    Ceil,
    Floor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolSpec {
    pub mode: PoolMode,
    /// Window `[height, width]`.
    pub kernel: [usize; 2],
    pub stride: [usize; 2],
    pub rounding: Rounding,
}

impl PoolSpec {
    pub fn square(mode: PoolMode, kernel: usize, stride: usize, rounding: Rounding) -> Self {
        PoolSpec {
            mode,
            kernel: [kernel, kernel],
            stride: [stride, stride],
            rounding,
        }
    }

    /// One window covering the whole `h×w` plane.
    pub fn global(mode: PoolMode, h: usize, w: usize) -> Self {
        PoolSpec {
            mode,
            kernel: [h, w],
            stride: [1, 1],
            rounding: Rounding::Floor,
        }
    }

    fn extent(&self, input: usize, axis: usize) -> Result<usize, LayerError> {
        let (k, s) = (self.kernel[axis], self.stride[axis]);
        if k == 0 || s == 0 || input == 0 {
            return Err(LayerError::InvalidSpec(format!("{self:?}")));
        }
        match self.rounding {
            Rounding::Floor => {
                if input < k {
                    return Err(LayerError::OutputTooSmall {
                        input,
                        kernel: k,
                        stride: s,
                        pad: 0,
                    });
                }
                Ok((input - k) / s + 1)
            }
            Rounding::Ceil => {
                if input <= k {
                    return Ok(1);
                }
                let mut out = (input - k).div_ceil(s) + 1;
                // the last window must start inside the input
                if (out - 1) * s >= input {
                    out -= 1;
                }
                Ok(out)
            }
        }
    }

    /// Output `(height, width)` for an `h×w` input.
    pub fn output_extent(&self, h: usize, w: usize) -> Result<(usize, usize), LayerError> {
        Ok((self.extent(h, 0)?, self.extent(w, 1)?))
    }
}

/// Flat input offset of the winning element for every max-pool output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolIndex {
    input_shape: Vec<usize>,
    argmax: Vec<usize>,
}

struct Window {
    y0: usize,
    y1: usize,
    x0: usize,
    x1: usize,
}

impl Window {
    fn size(&self) -> usize {
        (self.y1 - self.y0) * (self.x1 - self.x0)
    }
}

fn window(spec: &PoolSpec, oy: usize, ox: usize, h: usize, w: usize) -> Window {
    let y0 = oy * spec.stride[0];
    let x0 = ox * spec.stride[1];
    Window {
        y0,
        y1: (y0 + spec.kernel[0]).min(h),
        x0,
        x1: (x0 + spec.kernel[1]).min(w),
    }
}

pub fn pool_forward(x: &Tensor, spec: &PoolSpec) -> Result<(Tensor, Option<PoolIndex>), LayerError> {
    let [n, c, h, w] = expect_rank4(x, "pool input")?;
    let (ho, wo) = spec.output_extent(h, w)?;
    let mut y = Vec::with_capacity(n * c * ho * wo);
    let mut argmax = Vec::new();
    let data = x.data();
    for plane in 0..n * c {
        let base = plane * h * w;
        for oy in 0..ho {
            for ox in 0..wo {
                let win = window(spec, oy, ox, h, w);
                match spec.mode {
                    PoolMode::Max => {
                        let mut best = base + win.y0 * w + win.x0;
                        for iy in win.y0..win.y1 {
                            for ix in win.x0..win.x1 {
                                let off = base + iy * w + ix;
                                if data[off] > data[best] {
                                    best = off;
                                }
                            }
                        }
                        y.push(data[best]);
                        argmax.push(best);
                    }
                    PoolMode::Average => {
                        let mut sum = 0.0;
                        for iy in win.y0..win.y1 {
                            sum += data[base + iy * w + win.x0..base + iy * w + win.x1].iter().sum::<f64>();
                        }
                        y.push(sum / win.size() as f64);
                    }
                }
            }
        }
    }
    let index = (spec.mode == PoolMode::Max).then(|| PoolIndex {
        input_shape: x.shape().to_vec(),
        argmax,
    });
    Ok((Tensor::new(&[n, c, ho, wo], y)?, index))
}

pub fn pool_backward(
    x: &Tensor,
    spec: &PoolSpec,
    index: Option<&PoolIndex>,
    grad_out: &Tensor,
) -> Result<Tensor, LayerError> {
    let [n, c, h, w] = expect_rank4(x, "pool input")?;
    let (ho, wo) = spec.output_extent(h, w)?;
    let expected = [n, c, ho, wo];
    if grad_out.shape() != expected {
        return Err(LayerError::Shape {
            context: "pool grad_out",
            expected: expected.to_vec(),
            got: grad_out.shape().to_vec(),
        });
    }
    let mut grad = vec![0.0; x.len()];
    match spec.mode {
        PoolMode::Max => {
            let index = index.ok_or(LayerError::StaleIndexMap)?;
            if index.input_shape != x.shape() || index.argmax.len() != grad_out.len() {
                return Err(LayerError::StaleIndexMap);
            }
            for (&src, &g) in index.argmax.iter().zip(grad_out.data()) {
                *grad.get_mut(src).ok_or(LayerError::StaleIndexMap)? += g;
            }
        }
        PoolMode::Average => {
            let gd = grad_out.data();
            for plane in 0..n * c {
                let base = plane * h * w;
                for oy in 0..ho {
                    for ox in 0..wo {
                        let win = window(spec, oy, ox, h, w);
                        let share = gd[(plane * ho + oy) * wo + ox] / win.size() as f64;
                        for iy in win.y0..win.y1 {
                            for v in &mut grad[base + iy * w + win.x0..base + iy * w + win.x1] {
                                *v += share;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(Tensor::new(x.shape(), grad)?)
}
