use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{NetworkSpec, Params};
use crate::Tensor;

/// Fan-based uniform initialization: weights ~ U(−a, a) with
/// `a = sqrt(6 / (fan_in + fan_out))`, biases 0. Tensors are drawn in
/// canonical slot order from one ChaCha8 stream.
pub fn init_params(spec: &NetworkSpec, seed: u64) -> Params {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    spec.param_slots()
        .into_iter()
        .map(|slot| {
            let len: usize = slot.shape.iter().product();
            let values = if slot.is_bias {
                vec![0.0; len]
            } else {
                let bound = (6.0 / (slot.fan_in + slot.fan_out) as f64).sqrt();
                (0..len).map(|_| rng.gen_range(-bound..bound)).collect()
            };
            let tensor = Tensor::new(&slot.shape, values).expect("slot shapes are validated by the spec");
            (slot.name, tensor)
        })
        .collect()
}
