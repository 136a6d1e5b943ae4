use super::{LayerSpec, NetError, NetworkSpec, ParallelConvSpec, Params};
use crate::layers::{self, PoolIndex, PoolSpec};
use crate::Tensor;

/// Activations retained by [`forward`] for [`backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input of every layer ahead of the softmax head.
    inputs: Vec<Tensor>,
    pool_index: Vec<Option<PoolIndex>>,
    /// `N×K` network output.
    pub logits: Tensor,
}

impl ForwardCache {
    /// Input tensor seen by layer `i`.
    pub fn layer_input(&self, i: usize) -> Option<&Tensor> {
        self.inputs.get(i)
    }

    /// Output of layer `i` (the next layer's input, or the logits).
    pub fn layer_output(&self, i: usize) -> Option<&Tensor> {
        match i + 1 {
            j if j < self.inputs.len() => Some(&self.inputs[j]),
            j if j == self.inputs.len() => Some(&self.logits),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Backward {
    /// Mean cross-entropy over the batch.
    pub loss: f64,
    /// `N×K` class probabilities.
    pub probs: Tensor,
    /// Gradient of the mean loss for every parameter, in spec order.
    pub grads: Params,
}

fn param<'a>(params: &'a Params, name: &str, shape: &[usize]) -> Result<&'a Tensor, NetError> {
    params
        .get(name)
        .filter(|t| t.shape() == shape)
        .ok_or_else(|| NetError::Param(name.to_string()))
}

fn check_input(spec: &NetworkSpec, x: &Tensor) -> Result<(), NetError> {
    match x.shape() {
        [_, c, h, w] if [*c, *h, *w] == spec.input => Ok(()),
        _ => Err(NetError::Input {
            expected: spec.input,
            got: x.shape().to_vec(),
        }),
    }
}

fn wrap(layer: usize) -> impl Fn(layers::LayerError) -> NetError {
    move |source| NetError::Layer { layer, source }
}

fn global_spec(mode: layers::PoolMode, x: &Tensor) -> PoolSpec {
    let s = x.shape();
    PoolSpec::global(mode, s[2], s[3])
}

fn layer_forward(
    i: usize,
    layer: &LayerSpec,
    params: &Params,
    x: &Tensor,
) -> Result<(Tensor, Option<PoolIndex>), NetError> {
    let err = wrap(i);
    let out = match layer {
        LayerSpec::Conv(c) => {
            let w = param(params, &format!("l{i:02}.weight"), &c.weight_shape())?;
            let b = param(params, &format!("l{i:02}.bias"), &[c.out_channels])?;
            layers::conv2d_forward(x, c, w, b).map_err(err)?
        }
        LayerSpec::ParallelConv(p) => {
            let mut parts = Vec::with_capacity(3);
            for (name, branch) in ParallelConvSpec::BRANCH_NAMES.iter().zip(p.branches()) {
                let w = param(params, &format!("l{i:02}.{name}.weight"), &branch.weight_shape())?;
                let b = param(params, &format!("l{i:02}.{name}.bias"), &[branch.out_channels])?;
                parts.push(layers::conv2d_forward(x, &branch, w, b).map_err(&err)?);
            }
            let refs: Vec<&Tensor> = parts.iter().collect();
            layers::concat_channels(&refs).map_err(err)?
        }
        LayerSpec::Pool(p) => return layers::pool_forward(x, p).map_err(err),
        LayerSpec::GlobalPool { mode } => return layers::pool_forward(x, &global_spec(*mode, x)).map_err(err),
        LayerSpec::Relu => layers::relu(x),
        LayerSpec::Lrn(p) => layers::lrn_forward(x, p).map_err(err)?,
        LayerSpec::FullyConnected(fc) => {
            let w = param(params, &format!("l{i:02}.weight"), &fc.weight_shape())?;
            let b = param(params, &format!("l{i:02}.bias"), &[fc.out_units])?;
            layers::fully_connected(x, fc, w, b).map_err(err)?
        }
        LayerSpec::Softmax => x.clone(),
    };
    Ok((out, None))
}

fn body(spec: &NetworkSpec) -> &[LayerSpec] {
    match spec.layers.last() {
        Some(LayerSpec::Softmax) => &spec.layers[..spec.layers.len() - 1],
        _ => &spec.layers,
    }
}

/// Runs the network on an `N×C×H×W` batch, keeping what backward needs.
pub fn forward(spec: &NetworkSpec, params: &Params, x: &Tensor) -> Result<ForwardCache, NetError> {
    check_input(spec, x)?;
    let layers = body(spec);
    let mut inputs = Vec::with_capacity(layers.len());
    let mut pool_index = Vec::with_capacity(layers.len());
    let mut cur = x.clone();
    for (i, layer) in layers.iter().enumerate() {
        let (out, idx) = layer_forward(i, layer, params, &cur)?;
        inputs.push(std::mem::replace(&mut cur, out));
        pool_index.push(idx);
    }
    Ok(ForwardCache {
        inputs,
        pool_index,
        logits: cur,
    })
}

/// Logits only; intermediates are dropped as soon as they are consumed.
pub fn predict(spec: &NetworkSpec, params: &Params, x: &Tensor) -> Result<Tensor, NetError> {
    check_input(spec, x)?;
    let mut cur = x.clone();
    for (i, layer) in body(spec).iter().enumerate() {
        cur = layer_forward(i, layer, params, &cur)?.0;
    }
    Ok(cur)
}

/// Softmax cross-entropy on the cached logits, then the chain rule in reverse.
pub fn backward(
    spec: &NetworkSpec,
    params: &Params,
    cache: &ForwardCache,
    labels: &[usize],
) -> Result<Backward, NetError> {
    let layers = body(spec);
    if cache.inputs.len() != layers.len() {
        return Err(NetError::Spec {
            layer: cache.inputs.len(),
            message: "forward cache does not belong to this network".into(),
        });
    }
    let head = layers::softmax_cross_entropy_batch(&cache.logits, labels).map_err(wrap(layers.len()))?;
    let mut grads = Params::new();
    let mut grad = head.grad;
    for (i, layer) in layers.iter().enumerate().rev() {
        let x = &cache.inputs[i];
        let err = wrap(i);
        grad = match layer {
            LayerSpec::Conv(c) => {
                let w = param(params, &format!("l{i:02}.weight"), &c.weight_shape())?;
                let g = layers::conv2d_backward(x, c, w, &grad).map_err(err)?;
                grads.insert(format!("l{i:02}.weight"), g.grad_w);
                grads.insert(format!("l{i:02}.bias"), g.grad_b);
                g.grad_x
            }
            LayerSpec::ParallelConv(p) => {
                let branches = p.branches();
                let parts = layers::split_channels(&grad, &p.widths).map_err(&err)?;
                let mut grad_x = x.zeros_like();
                for ((name, branch), part) in ParallelConvSpec::BRANCH_NAMES.iter().zip(&branches).zip(&parts) {
                    let w = param(params, &format!("l{i:02}.{name}.weight"), &branch.weight_shape())?;
                    let g = layers::conv2d_backward(x, branch, w, part).map_err(&err)?;
                    grad_x.add_assign(&g.grad_x).map_err(|e| err(e.into()))?;
                    grads.insert(format!("l{i:02}.{name}.weight"), g.grad_w);
                    grads.insert(format!("l{i:02}.{name}.bias"), g.grad_b);
                }
                grad_x
            }
            LayerSpec::Pool(p) => layers::pool_backward(x, p, cache.pool_index[i].as_ref(), &grad).map_err(err)?,
            LayerSpec::GlobalPool { mode } => {
                layers::pool_backward(x, &global_spec(*mode, x), cache.pool_index[i].as_ref(), &grad).map_err(err)?
            }
            LayerSpec::Relu => layers::relu_backward(x, &grad).map_err(err)?,
            LayerSpec::Lrn(p) => layers::lrn_backward(x, p, &grad).map_err(err)?,
            LayerSpec::FullyConnected(fc) => {
                let w = param(params, &format!("l{i:02}.weight"), &fc.weight_shape())?;
                let g = layers::fc_backward(x, fc, w, &grad).map_err(err)?;
                grads.insert(format!("l{i:02}.weight"), g.grad_w);
                grads.insert(format!("l{i:02}.bias"), g.grad_b);
                g.grad_x
            }
            LayerSpec::Softmax => grad,
        };
    }
    let ordered = spec
        .param_slots()
        .into_iter()
        .map(|slot| {
            let g = grads
                .swap_remove(&slot.name)
                .ok_or(NetError::Param(slot.name.clone()))?;
            Ok((slot.name, g))
        })
        .collect::<Result<Params, NetError>>()?;
    Ok(Backward {
        loss: head.loss,
        probs: head.probs,
        grads: ordered,
    })
}
