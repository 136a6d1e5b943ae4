use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::NetError;
use crate::layers::{ConvSpec, FcSpec, LrnParams, PoolMode, PoolSpec, Rounding};

/// Largest spatial extent or channel count a spec may declare.
const MAX_EXTENT: usize = 1 << 20;

/// Three same-padded branches (1×1, 3×3, 5×5) over one input, concatenated
/// along channels in that order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParallelConvSpec {
    pub in_channels: usize,
    /// Output channels of the 1×1, 3×3 and 5×5 branches.
    pub widths: [usize; 3],
}

impl ParallelConvSpec {
    pub const KERNELS: [usize; 3] = [1, 3, 5];
    pub const BRANCH_NAMES: [&'static str; 3] = ["b1x1", "b3x3", "b5x5"];

    pub fn branches(&self) -> [ConvSpec; 3] {
        let k = Self::KERNELS;
        [0, 1, 2].map(|i| ConvSpec::same(self.in_channels, self.widths[i], k[i]))
    }

    pub fn out_channels(&self) -> usize {
        self.widths.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv(ConvSpec),
    Pool(PoolSpec),
    /// Pooling window spanning the whole incoming plane.
    GlobalPool {
        mode: PoolMode,
    },
    Relu,
    Lrn(LrnParams),
    ParallelConv(ParallelConvSpec),
    FullyConnected(FcSpec),
    /// Terminal classifier; the network's logits are this layer's input.
    Softmax,
}

impl LayerSpec {
    /// Layers that correspond to a numbered row of the architecture table
    /// (activations, normalization and the loss head are not counted).
    pub fn is_table_row(&self) -> bool {
        matches!(
            self,
            LayerSpec::Conv(_)
                | LayerSpec::Pool(_)
                | LayerSpec::GlobalPool { .. }
                | LayerSpec::ParallelConv(_)
                | LayerSpec::FullyConnected(_)
        )
    }
}

/// Per-sample activation shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Shape {
    Spatial { c: usize, h: usize, w: usize },
    Flat(usize),
}

impl Shape {
    pub fn numel(&self) -> usize {
        match *self {
            Shape::Spatial { c, h, w } => c * h * w,
            Shape::Flat(n) => n,
        }
    }

    /// Batch tensor shape for `n` samples.
    pub fn batch(&self, n: usize) -> Vec<usize> {
        match *self {
            Shape::Spatial { c, h, w } => vec![n, c, h, w],
            Shape::Flat(d) => vec![n, d],
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shape::Spatial { c, h, w } => write!(f, "{c}×{h}×{w}"),
            Shape::Flat(n) => write!(f, "{n}"),
        }
    }
}

/// A named parameter slot: weight or bias of some layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamSlot {
    pub name: String,
    pub shape: Vec<usize>,
    pub fan_in: usize,
    pub fan_out: usize,
    pub is_bias: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    /// Declared input `[C, H, W]`.
    pub input: [usize; 3],
    pub classes: usize,
    pub layers: Vec<LayerSpec>,
}

fn layer_err(layer: usize, msg: impl Into<String>) -> NetError {
    NetError::Spec {
        layer,
        message: msg.into(),
    }
}

impl NetworkSpec {
    pub fn new(input: [usize; 3], classes: usize, layers: Vec<LayerSpec>) -> Result<Self, NetError> {
        let spec = NetworkSpec { input, classes, layers };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), NetError> {
        self.shapes().map(|_| ())
    }

    pub fn input_shape(&self) -> Shape {
        let [c, h, w] = self.input;
        Shape::Spatial { c, h, w }
    }

    /// Output shape of every layer, by symbolic propagation. Fails at the
    /// first layer whose input does not chain.
    pub fn shapes(&self) -> Result<Vec<Shape>, NetError> {
        if self.input.iter().any(|&e| e == 0 || e > MAX_EXTENT) {
            return Err(layer_err(0, format!("invalid input shape {:?}", self.input)));
        }
        if self.classes < 2 {
            return Err(layer_err(0, "need at least 2 classes"));
        }
        let mut cur = self.input_shape();
        let mut out = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            cur = match (*layer, cur) {
                (LayerSpec::Conv(conv), Shape::Spatial { c, h, w }) => {
                    check_conv(i, &conv, c)?;
                    let ext = |e| {
                        conv.output_extent(e)
                            .map_err(|e| NetError::Layer { layer: i, source: e })
                    };
                    Shape::Spatial {
                        c: conv.out_channels,
                        h: ext(h)?,
                        w: ext(w)?,
                    }
                }
                (LayerSpec::ParallelConv(par), Shape::Spatial { c, h, w }) => {
                    for branch in par.branches() {
                        check_conv(i, &branch, c)?;
                    }
                    Shape::Spatial {
                        c: par.out_channels(),
                        h,
                        w,
                    }
                }
                (LayerSpec::Pool(pool), Shape::Spatial { c, h, w }) => {
                    if pool.kernel.iter().chain(&pool.stride).any(|&v| v > MAX_EXTENT) {
                        return Err(layer_err(i, format!("pool window out of range: {pool:?}")));
                    }
                    let (h, w) = pool
                        .output_extent(h, w)
                        .map_err(|e| NetError::Layer { layer: i, source: e })?;
                    Shape::Spatial { c, h, w }
                }
                (LayerSpec::GlobalPool { .. }, Shape::Spatial { c, .. }) => Shape::Spatial { c, h: 1, w: 1 },
                (LayerSpec::Relu, s) => s,
                (LayerSpec::Lrn(p), s @ Shape::Spatial { .. }) => {
                    p.validate().map_err(|e| NetError::Layer { layer: i, source: e })?;
                    s
                }
                (LayerSpec::FullyConnected(fc), s) => {
                    if fc.in_units != s.numel() {
                        return Err(layer_err(
                            i,
                            format!("fc expects {} inputs, previous layer emits {s}", fc.in_units),
                        ));
                    }
                    if fc.out_units == 0 || fc.out_units > MAX_EXTENT {
                        return Err(layer_err(i, "fc output units out of range"));
                    }
                    Shape::Flat(fc.out_units)
                }
                (LayerSpec::Softmax, s) => {
                    if i + 1 != self.layers.len() {
                        return Err(layer_err(i, "softmax must be the last layer"));
                    }
                    s
                }
                (layer, s) => return Err(layer_err(i, format!("{layer:?} cannot take a {s} input"))),
            };
            out.push(cur);
        }
        if cur != Shape::Flat(self.classes) {
            return Err(layer_err(
                self.layers.len().saturating_sub(1),
                format!("network emits {cur}, expected {} logits", self.classes),
            ));
        }
        Ok(out)
    }

    /// Indices of the layers that make up the numbered architecture rows.
    pub fn table_rows(&self) -> Vec<usize> {
        (0..self.layers.len())
            .filter(|&i| self.layers[i].is_table_row())
            .collect()
    }

    /// Every learnable tensor, in canonical order.
    pub fn param_slots(&self) -> Vec<ParamSlot> {
        let mut slots = Vec::new();
        let conv = |prefix: String, c: &ConvSpec, slots: &mut Vec<ParamSlot>| {
            let kk = c.kernel * c.kernel;
            slots.push(ParamSlot {
                name: format!("{prefix}.weight"),
                shape: c.weight_shape().to_vec(),
                fan_in: c.in_channels * kk,
                fan_out: c.out_channels * kk,
                is_bias: false,
            });
            slots.push(ParamSlot {
                name: format!("{prefix}.bias"),
                shape: vec![c.out_channels],
                fan_in: c.in_channels * kk,
                fan_out: c.out_channels * kk,
                is_bias: true,
            });
        };
        for (i, layer) in self.layers.iter().enumerate() {
            match layer {
                LayerSpec::Conv(c) => conv(format!("l{i:02}"), c, &mut slots),
                LayerSpec::ParallelConv(p) => {
                    for (name, branch) in ParallelConvSpec::BRANCH_NAMES.iter().zip(p.branches()) {
                        conv(format!("l{i:02}.{name}"), &branch, &mut slots);
                    }
                }
                LayerSpec::FullyConnected(fc) => {
                    slots.push(ParamSlot {
                        name: format!("l{i:02}.weight"),
                        shape: fc.weight_shape().to_vec(),
                        fan_in: fc.in_units,
                        fan_out: fc.out_units,
                        is_bias: false,
                    });
                    slots.push(ParamSlot {
                        name: format!("l{i:02}.bias"),
                        shape: vec![fc.out_units],
                        fan_in: fc.in_units,
                        fan_out: fc.out_units,
                        is_bias: true,
                    });
                }
                _ => {}
            }
        }
        slots
    }

    pub fn param_count(&self) -> usize {
        self.param_slots()
            .iter()
            .map(|s| s.shape.iter().product::<usize>())
            .sum()
    }
}

fn check_conv(layer: usize, conv: &ConvSpec, channels: usize) -> Result<(), NetError> {
    conv.validate().map_err(|e| NetError::Layer { layer, source: e })?;
    if conv.in_channels != channels {
        return Err(layer_err(
            layer,
            format!(
                "conv expects {} channels, previous layer emits {channels}",
                conv.in_channels
            ),
        ));
    }
    if [conv.out_channels, conv.kernel, conv.stride, conv.pad]
        .iter()
        .any(|&v| v > MAX_EXTENT)
    {
        return Err(layer_err(layer, format!("conv parameters out of range: {conv:?}")));
    }
    Ok(())
}

/// DFUNet parallel-block configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DfunetVariant {
    Base,
    V1,
    V2,
    V3,
    V4,
    V5,
}

impl DfunetVariant {
    pub const ALL: [DfunetVariant; 6] = [Self::Base, Self::V1, Self::V2, Self::V3, Self::V4, Self::V5];

    /// `(1×1, 3×3, 5×5)` widths of the four parallel blocks, in order.
    pub fn parallel_widths(self) -> [[usize; 3]; 4] {
        match self {
            Self::Base => [[32, 64, 128]; 4],
            Self::V1 => [[128, 256, 512]; 4],
            Self::V2 => [[192, 256, 512]; 4],
            Self::V3 => [[128, 128, 128], [128, 128, 128], [256, 256, 256], [256, 256, 256]],
            Self::V4 => [[192, 192, 192], [256, 256, 256], [256, 256, 256], [512, 512, 512]],
            Self::V5 => [[256, 256, 256], [256, 256, 256], [512, 512, 512], [512, 512, 512]],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Base => "base",
            Self::V1 => "v1",
            Self::V2 => "v2",
            Self::V3 => "v3",
            Self::V4 => "v4",
            Self::V5 => "v5",
        }
    }
}

impl FromStr for DfunetVariant {
    type Err = NetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.strip_prefix("dfunet-").unwrap_or(s);
        Self::ALL
            .into_iter()
            .find(|v| v.name() == key)
            .ok_or_else(|| NetError::UnknownArchitecture(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DfunetOptions {
    /// Width of the first fully-connected layer.
    pub fc_units: usize,
    /// Pooling ahead of the classifier, spanning the final plane.
    pub final_pool: PoolMode,
    pub lrn: LrnParams,
}

impl Default for DfunetOptions {
    fn default() -> Self {
        DfunetOptions {
            fc_units: 100,
            final_pool: PoolMode::Average,
            lrn: LrnParams::default(),
        }
    }
}

pub fn build_dfunet(variant: DfunetVariant, input: [usize; 3], classes: usize) -> Result<NetworkSpec, NetError> {
    build_dfunet_with(variant, input, classes, &DfunetOptions::default())
}

/// Stem (conv 7×7/2, max-pool, conv 1×1, conv 3×3, max-pool), four parallel
/// blocks with max-pools after the first and third, a pool over the final
/// plane, then FC → ReLU → FC(classes).
pub fn build_dfunet_with(
    variant: DfunetVariant,
    input: [usize; 3],
    classes: usize,
    opts: &DfunetOptions,
) -> Result<NetworkSpec, NetError> {
    let [c, h, w] = input;
    if h < 29 || w < 29 {
        return Err(NetError::InputTooSmall { min: 29, input });
    }
    let max_pool = || LayerSpec::Pool(PoolSpec::square(PoolMode::Max, 3, 2, Rounding::Ceil));
    let widths = variant.parallel_widths();
    let mut layers = vec![
        LayerSpec::Conv(ConvSpec::new(c, 64, 7, 2, 3)),
        LayerSpec::Relu,
        max_pool(),
        LayerSpec::Conv(ConvSpec::new(64, 64, 1, 1, 0)),
        LayerSpec::Relu,
        LayerSpec::Conv(ConvSpec::new(64, 192, 3, 1, 1)),
        LayerSpec::Relu,
        max_pool(),
    ];
    let mut channels = 192;
    for (block, w) in widths.iter().enumerate() {
        let par = ParallelConvSpec {
            in_channels: channels,
            widths: *w,
        };
        channels = par.out_channels();
        layers.extend([LayerSpec::ParallelConv(par), LayerSpec::Relu, LayerSpec::Lrn(opts.lrn)]);
        if block == 0 || block == 2 {
            layers.push(max_pool());
        }
    }
    layers.extend([
        LayerSpec::GlobalPool { mode: opts.final_pool },
        LayerSpec::FullyConnected(FcSpec {
            in_units: channels,
            out_units: opts.fc_units,
        }),
        LayerSpec::Relu,
        LayerSpec::FullyConnected(FcSpec {
            in_units: opts.fc_units,
            out_units: classes,
        }),
        LayerSpec::Softmax,
    ]);
    NetworkSpec::new(input, classes, layers)
}

/// conv 5×5(20) → pool 2×2 → conv 5×5(50) → pool 2×2 → FC(500) → ReLU → FC(classes)
/// over 1×28×28 grayscale input.
pub fn build_lenet(classes: usize) -> Result<NetworkSpec, NetError> {
    let pool = || LayerSpec::Pool(PoolSpec::square(PoolMode::Max, 2, 2, Rounding::Ceil));
    NetworkSpec::new(
        [1, 28, 28],
        classes,
        vec![
            LayerSpec::Conv(ConvSpec::new(1, 20, 5, 1, 0)),
            pool(),
            LayerSpec::Conv(ConvSpec::new(20, 50, 5, 1, 0)),
            pool(),
            LayerSpec::FullyConnected(FcSpec {
                in_units: 50 * 4 * 4,
                out_units: 500,
            }),
            LayerSpec::Relu,
            LayerSpec::FullyConnected(FcSpec {
                in_units: 500,
                out_units: classes,
            }),
            LayerSpec::Softmax,
        ],
    )
}
