use super::{expect_rank4, LayerError};
use crate::Tensor;

/// Stacks `N×Ci×H×W` tensors along the channel axis, in argument order.
pub fn concat_channels(parts: &[&Tensor]) -> Result<Tensor, LayerError> {
    let first = parts
        .first()
        .ok_or_else(|| LayerError::InvalidSpec("concat of zero tensors".into()))?;
    let [n, _, h, w] = expect_rank4(first, "concat part")?;
    let mut channels = Vec::with_capacity(parts.len());
    for part in parts {
        let [pn, pc, ph, pw] = expect_rank4(part, "concat part")?;
        if (pn, ph, pw) != (n, h, w) {
            return Err(LayerError::Shape {
                context: "concat part",
                expected: vec![n, pc, h, w],
                got: part.shape().to_vec(),
            });
        }
        channels.push(pc);
    }
    let plane = h * w;
    let total: usize = channels.iter().sum();
    let mut out = Vec::with_capacity(n * total * plane);
    for s in 0..n {
        for (part, &pc) in parts.iter().zip(&channels) {
            out.extend_from_slice(&part.data()[s * pc * plane..(s + 1) * pc * plane]);
        }
    }
    Ok(Tensor::new(&[n, total, h, w], out)?)
}

/// Backward of [`concat_channels`]: slices `grad` into per-part gradients.
pub fn split_channels(grad: &Tensor, channels: &[usize]) -> Result<Vec<Tensor>, LayerError> {
    let [n, c, h, w] = expect_rank4(grad, "concat grad")?;
    if channels.iter().sum::<usize>() != c || channels.contains(&0) {
        return Err(LayerError::InvalidSpec(format!(
            "channel split {channels:?} does not partition {c}"
        )));
    }
    let plane = h * w;
    let mut parts: Vec<Vec<f64>> = channels.iter().map(|&pc| Vec::with_capacity(n * pc * plane)).collect();
    for s in 0..n {
        let mut offset = s * c * plane;
        for (buf, &pc) in parts.iter_mut().zip(channels) {
            buf.extend_from_slice(&grad.data()[offset..offset + pc * plane]);
            offset += pc * plane;
        }
    }
    parts
        .into_iter()
        .zip(channels)
        .map(|(buf, &pc)| Ok(Tensor::new(&[n, pc, h, w], buf)?))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::gradcheck;

    #[test]
    fn dfunet_parallel_block_widths() {
        let parts: Vec<Tensor> = [32, 64, 128]
            .iter()
            .map(|&c| Tensor::zeros(&[1, c, 28, 28]).unwrap())
            .collect();
        let refs: Vec<&Tensor> = parts.iter().collect();
        assert_eq!(concat_channels(&refs).unwrap().shape(), &[1, 224, 28, 28]);
    }

    #[test]
    fn single_part_is_identity() {
        let x = gradcheck::random(&[2, 3, 2, 2], 50);
        assert_eq!(concat_channels(&[&x]).unwrap(), x);
    }

    #[test]
    fn scalar_parts() {
        let a = Tensor::new(&[1, 1, 1, 1], 4.0).unwrap();
        let b = Tensor::new(&[1, 1, 1, 1], -2.0).unwrap();
        assert_eq!(concat_channels(&[&a, &b]).unwrap().data(), &[4.0, -2.0]);
        let g = Tensor::new(&[1, 2, 1, 1], vec![0.5, 9.0]).unwrap();
        let split = split_channels(&g, &[1, 1]).unwrap();
        assert_eq!(split[0].data(), &[0.5]);
        assert_eq!(split[1].data(), &[9.0]);
    }

    #[test]
    fn split_then_concat_roundtrips() {
        let g = gradcheck::random(&[3, 6, 2, 3], 51);
        let parts = split_channels(&g, &[1, 2, 3]).unwrap();
        let refs: Vec<&Tensor> = parts.iter().collect();
        assert_eq!(concat_channels(&refs).unwrap(), g);
    }

    #[test]
    fn rejects_mismatched_parts() {
        let a = Tensor::zeros(&[1, 1, 2, 2]).unwrap();
        let b = Tensor::zeros(&[1, 1, 3, 2]).unwrap();
        assert!(concat_channels(&[&a, &b]).is_err());
        assert!(split_channels(&a, &[2]).is_err());
    }
}
